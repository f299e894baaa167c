"""
Projection of a permuted vector onto a direction orthogonal to 1
================================================================

For e = pi[x] - mean(x) and a unit y with sum(y) = 0, averaging over all
n! permutations gives E[e.y] = 0 and Var[e.y] = |e|^2 / (n - 1). The
simple |e|^2 / n approximation is close for large n.
"""
import numpy as np

from ssperm import privacy

rng = np.random.default_rng(7)
print(f"{'n':>2} {'mean':>10} {'variance':>9} {'|e|^2/(n-1)':>12} {'|e|^2/n':>9}")
for n in range(3, 8):
    s = privacy.perm_error_stats(rng.normal(size=n), privacy.random_orthogonal_unit(n, rng))
    print(f"{n:>2} {s.mean:>10.1e} {s.variance:>9.4f} {s.exact_formula:>12.4f} {s.approx_1_over_n:>9.4f}")

# %%
# Random sign flips: whatever the input signs, half the outputs are negative.
for sign in (+1, -1):
    res = privacy.flipping_distribution_test(sign * np.ones(10000), trials=10)
    print(f"inputs all {'+' if sign > 0 else '-'}: P(negative) = {res.p_negative:.4f} +- {res.stderr:.4f}")
