import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dcor_v_squared
from ssperm import privacy as pv
from ssperm.sharing import CommonPrg


def test_dcor_matches_oracle():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 3))
    Y = X[:, :1] ** 2 + 0.3 * rng.normal(size=(40, 1))
    assert pv.dcor(X, Y).value == pytest.approx(dcor_v_squared(X, Y), rel=1e-10)
    assert pv.dcor_sqrt(X, Y) == pytest.approx(math.sqrt(dcor_v_squared(X, Y)), rel=1e-10)


def test_dcor_identity_and_invariances():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(30, 4))
    assert pv.dcor(X, X).value == pytest.approx(1.0)
    Q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    assert pv.dcor(X, 3.0 * X @ Q + 7.0).value == pytest.approx(1.0)
    Y = rng.normal(size=(30, 2))
    assert pv.dcor(X, Y).value == pytest.approx(pv.dcor(Y, X).value)


def test_dcor_degenerate_and_errors():
    X = np.random.default_rng(2).normal(size=(10, 2))
    assert pv.dcor(X, np.ones((10, 1))).value == 0.0
    with pytest.raises(pv.LengthMismatch):
        pv.dcor(X, X[:5])
    with pytest.raises(pv.DegenerateData):
        pv.dcor(X[:1], X[:1])
    with pytest.raises(pv.DegenerateData):
        pv.dcor_unbiased(X[:3], X[:3])


def test_unbiased_dcor_near_zero_for_independent():
    rng = np.random.default_rng(3)
    vals = [pv.dcor_unbiased(rng.normal(size=(200, 5)), rng.normal(size=(200, 5))) for _ in range(20)]
    assert abs(np.mean(vals)) < 0.01
    biased = [pv.dcor(rng.normal(size=(200, 5)), rng.normal(size=(200, 5))).value for _ in range(5)]
    assert np.mean(biased) > 0.05


def test_double_center_rows_and_cols_sum_to_zero():
    D = pv.pairwise_distances(np.random.default_rng(4).normal(size=(12, 3)))
    A = pv.double_center(D)
    np.testing.assert_allclose(A.sum(0), 0, atol=1e-10)
    np.testing.assert_allclose(A.sum(1), 0, atol=1e-10)


@settings(max_examples=30)
@given(st.integers(1, 12), st.integers(0, 2**31))
def test_permute_batches_preserves_batch_multisets(b, seed):
    Y = np.random.default_rng(seed).normal(size=(23, 3))
    Z = pv.permute_batches(Y, b, seed)
    for s in range(0, 23, b):
        assert np.array_equal(np.sort(Y[s : s + b].ravel()), np.sort(Z[s : s + b].ravel()))


def test_permute_batches_explicit_perm_and_errors():
    Y = np.arange(6.0).reshape(3, 2)
    assert pv.permute_batches(Y, perm=[5, 4, 3, 2, 1, 0]).ravel().tolist() == [5, 4, 3, 2, 1, 0]
    with pytest.raises(ValueError):
        pv.permute_batches(Y, 0)


def test_permuted_hidden_and_projection_estimates():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(80, 6))
    full = pv.dcor_random_projection(X, 6, repeats=5, rng=rng)
    perm = pv.dcor_permuted_hidden(X, repeats=5, rng=rng, h=6)
    assert full.value > perm.value
    assert perm.repeats == 5 and perm.ci()[0] <= perm.value <= perm.ci()[1]


# --- permutation statistics ------------------------------------------------------

def _brute(x, y):
    n = len(x)
    m = sum(x) / n
    vals = [sum((x[p[i]] - m) * y[i] for i in range(n)) for p in itertools.permutations(range(n))]
    mu = sum(vals) / len(vals)
    return mu, sum((v - mu) ** 2 for v in vals) / len(vals)


@pytest.mark.parametrize("n", [2, 3, 5, 6])
def test_perm_error_stats_enumeration(n):
    rng = np.random.default_rng(n)
    x = rng.normal(size=n)
    y = pv.random_orthogonal_unit(n, rng)
    st_ = pv.perm_error_stats(x, y)
    mu, var = _brute(x.tolist(), y.tolist())
    assert abs(st_.mean) < 1e-12 and abs(mu) < 1e-12
    assert st_.variance == pytest.approx(var, rel=1e-9)
    assert st_.variance == pytest.approx(st_.exact_formula, rel=1e-9)
    assert st_.count == math.factorial(n)


def test_perm_error_stats_sampling_and_errors():
    rng = np.random.default_rng(9)
    x, y = rng.normal(size=30), pv.random_orthogonal_unit(30, rng)
    s = pv.perm_error_stats(x, y, "sample", 20000, rng)
    assert s.variance == pytest.approx(s.exact_formula, rel=0.05)
    with pytest.raises(pv.TooLargeForEnumeration):
        pv.perm_error_stats(x, y)
    with pytest.raises(ValueError):
        pv.perm_error_stats(x[:4], np.array([1.0, 0, 0, 0]))
    with pytest.raises(pv.LengthMismatch):
        pv.perm_error_stats(x[:4], y)


def test_mean_vector():
    assert pv.mean_vector([1.0, 2.0, 6.0]).tolist() == [3.0, 3.0, 3.0]


# --- expected dcor under a Gaussian map -----------------------------------------

def test_gaussian_map_constants_against_sampling():
    rng = np.random.default_rng(11)
    for h in (1, 4, 30):
        a, b = pv.gaussian_map_constants(h, 2.0)
        norms = np.linalg.norm(rng.normal(0, 2.0, size=(200000, h)), axis=1)
        assert a == pytest.approx(norms.mean(), rel=5e-3)
        assert b == pytest.approx(math.sqrt(np.mean(norms**2)), rel=5e-3)


def test_distance_moments_small_case():
    X = np.array([[0.0], [1.0], [3.0]])
    S1, S2, S3 = pv.distance_moments(X)
    D = np.abs(X - X.T)
    assert S1 == pytest.approx((D**2).mean())
    assert S2 == pytest.approx(D.mean() ** 2)
    assert S3 == pytest.approx(np.mean([D[k, l] * D[k, m] for k in range(3) for l in range(3) for m in range(3)]))


def test_g_theta_endpoints_and_monotone():
    g = pv.g_theta_mc(5, 10, thetas=np.linspace(0, np.pi / 2, 5), mc_samples=40000, rng=0)
    a, _ = pv.gaussian_map_constants(10)
    assert g.mean[0] == pytest.approx(10.0, rel=0.02)
    assert g.mean[-1] == pytest.approx(a * a, rel=0.02)
    assert np.all(np.diff(g.mean) <= 3 * g.stderr[1:])
    assert g(np.pi) == pytest.approx(g.mean[0])
    with pytest.raises(ValueError):
        pv.g_theta_mc(5, 10, thetas=[2.0])


def test_expected_dcor_matches_monte_carlo():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(120, 8))
    want = np.mean([pv.dcor(X, X @ rng.normal(size=(8, 20))).value for _ in range(60)])
    direct = pv.expected_dcor_linear(X, 20, mc_samples=32, rng=1)
    assert direct == pytest.approx(want, abs=0.01)
    gpath = pv.expected_dcor_linear(X, 20, method="g_theta", rng=2)
    assert gpath == pytest.approx(want, abs=0.05)
    with pytest.raises(ValueError):
        pv.expected_dcor_linear(X, 20, method="nope")


# --- flipping --------------------------------------------------------------------

def test_flipping_half_negative():
    res = pv.flipping_distribution_test(np.ones(1000), trials=20)
    assert res.n == 20000
    assert abs(res.p_negative - 0.5) < 4 * res.stderr
    assert pv.flipping_distribution_test(np.zeros(10)).p_negative == 0.0
    again = pv.flipping_distribution_test(np.ones(1000), trials=20, prg=CommonPrg(bytes(32)))
    assert again.p_negative == res.p_negative


# --- histogram attack -------------------------------------------------------------

def test_emd_1d():
    assert pv.emd_1d([1, 0, 0], [0, 0, 1]) == 2.0
    assert pv.emd_1d([0.5, 0.5], [[0.5, 0.5], [1, 0]], 0.5).tolist() == [0.0, 0.25]


def test_distance_histograms_normalised():
    H, w = pv.distance_histograms(np.random.default_rng(13).normal(size=(20, 3)), bins=10)
    np.testing.assert_allclose(H.sum(1), 1.0)
    assert w == pytest.approx(0.3)


def test_attack_recovers_identical_rows():
    X = np.random.default_rng(14).normal(size=(50, 4))
    top = pv.histogram_attack(X, X, k=1)
    assert np.array_equal(top[:, 0], np.arange(50))
    with pytest.raises(pv.EmptyAux):
        pv.histogram_attack(X, np.zeros((0, 4)))


def test_attack_success_shape():
    r = pv.attack_success(n=200, d=10, h=4, n_targets=20, seed=1)
    assert r["batch_size"] is None and 0 <= r["rate"] <= 1 and 0 < r["chance"] < 1
    assert r["rate"] > r["chance"]


def test_simulate_distribution_kinds():
    for kind in pv.DISTRIBUTIONS:
        assert pv.simulate_distribution(kind, 15, 7, 0).shape == (15, 7)
    with pytest.raises(ValueError):
        pv.simulate_distribution("cauchy", 5, 5)


def test_dcor_simulation_rows():
    rows = pv.dcor_simulation(["normal"], n=60, d=10, h=10, repeats=3, include_expected=True, mc_samples=4)
    assert [r["method"] for r in rows] == ["permuted", "linear_1d", "linear_expected"]
    assert all(r["ci_low"] <= r["dcor"] <= r["ci_high"] for r in rows)


@pytest.mark.parametrize("n", [4, 5, 6, 7, 8])
def test_enumerated_variance_vs_one_over_n_ratio(n):
    rng = np.random.default_rng(100 + n)
    s = pv.perm_error_stats(rng.normal(size=n), pv.random_orthogonal_unit(n, rng))
    assert 0.9 <= s.variance / s.approx_1_over_n <= 1.5
    assert s.variance / s.approx_1_over_n == pytest.approx(n / (n - 1))


def test_simulated_distribution_statistics():
    rng = np.random.default_rng(15)
    sparse = pv.simulate_distribution("sparse", 2000, 100, rng)
    assert abs(sparse.mean() - 0.1) < 3 * math.sqrt(0.09 / sparse.size)
    normal = pv.simulate_distribution("normal", 2000, 100, rng)
    assert abs(normal.var(axis=0).mean() - 1.0) < 0.02
    sub = pv.simulate_distribution("subspace", 2000, 100, rng)
    sv = np.linalg.svd(sub - sub.mean(0), compute_uv=False)
    # the widest spectral gap (away from the edges) is right after 20 directions
    ratios = sv[5:90] / sv[6:91]
    assert int(np.argmax(ratios)) + 5 == 19 and ratios.max() > 1.1


def test_flipping_negative_inputs():
    res = pv.flipping_distribution_test(-np.ones(10**5), seed=bytes(range(32)))
    assert abs(res.p_negative - 0.5) < 3 * res.stderr
