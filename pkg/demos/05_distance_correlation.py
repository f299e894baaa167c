"""
How much does a permuted hidden layer say about the input?
==========================================================

Distance correlation between the input X and (a) a random linear map XA,
(b) the same map after shuffling all its entries, and (c) a one-dimensional
projection. The squared V-statistic estimator is biased upward for
independent high-dimensional samples, so the bias-corrected version is
shown too.
"""
import numpy as np

from ssperm import privacy

rng = np.random.default_rng(5)
n, d, h = 400, 50, 50
for kind in privacy.DISTRIBUTIONS:
    X = privacy.simulate_distribution(kind, n, d, rng)
    lin = privacy.dcor_random_projection(X, h, repeats=5, rng=rng)
    perm = privacy.dcor_permuted_hidden(X, repeats=5, rng=rng, h=h)
    one = privacy.dcor_random_projection(X, 1, repeats=5, rng=rng)
    perm_u = privacy.dcor_permuted_hidden(X, repeats=5, rng=rng, h=h, unbiased=True)
    one_u = privacy.dcor_random_projection(X, 1, repeats=5, rng=rng, unbiased=True)
    expected = privacy.expected_dcor_linear(X, h, mc_samples=8, rng=rng)
    print(f"{kind:<9} XA {lin.value:.3f} (closed form {expected:.3f})  "
          f"pi[XA] {perm.value:.3f}  1-d {one.value:.3f}  | corrected: pi[XA] {perm_u.value:+.4f}  1-d {one_u.value:.3f}")

# %%
# The angle function behind the closed form: g(theta) = E|Ax||Ay| for unit x, y.
g = privacy.g_theta_mc(10, 10, thetas=np.linspace(0, np.pi / 2, 5), mc_samples=20000, rng=0)
print("g(theta), h=10:", np.round(g.mean, 3), " g(0) should be h =", 10)
