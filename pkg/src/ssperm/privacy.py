"""Leakage analysis: distance correlation, permutation statistics, attacks.

Distance correlation here is the V-statistic ratio

    dcor(X, Y) = V_n^2(X, Y) / sqrt(V_n^2(X, X) V_n^2(Y, Y)),
    V_n^2(X, Y) = (1/n^2) sum_kl A_kl B_kl,

with ``A``, ``B`` the doubly-centred Euclidean distance matrices. Note that
this is the *squared* distance correlation of the statistics literature;
:func:`dcor_sqrt` returns its square root and :func:`dcor_unbiased` the
bias-corrected (U-centred) version, which matters at small ``n``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import gammaln

from .sharing import CommonPrg, gen_mask

DISTRIBUTIONS = ("normal", "uniform", "sparse", "subspace")
MAX_ENUMERATION = 8


class LengthMismatch(ValueError):
    pass


class DegenerateData(ValueError):
    pass


class TooLargeForEnumeration(ValueError):
    pass


class EmptyAux(ValueError):
    pass


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _as_samples(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"samples must be a 2-D array, got shape {X.shape}")
    return X


# ----------------------------------------------------------------------------
# distance correlation


@dataclass
class DcorEstimate:
    value: float
    n: int
    repeats: int = 1
    std: float = 0.0
    values: np.ndarray | None = field(default=None, repr=False)

    @property
    def stderr(self) -> float:
        return self.std / math.sqrt(self.repeats) if self.repeats > 1 else 0.0

    def ci(self, z: float = 1.96) -> tuple[float, float]:
        """Normal-approximation confidence interval for the mean."""
        return self.value - z * self.stderr, self.value + z * self.stderr

    def __float__(self) -> float:
        return float(self.value)


def pairwise_distances(X) -> np.ndarray:
    """Euclidean distance matrix between the rows of ``X``."""
    X = _as_samples(X)
    D = cdist(X, X)
    np.fill_diagonal(D, 0.0)
    return D


def double_center(D) -> np.ndarray:
    """``D_kl - rowmean_k - colmean_l + grandmean``."""
    D = np.asarray(D, dtype=np.float64)
    return D - D.mean(axis=0)[None, :] - D.mean(axis=1)[:, None] + D.mean()


def u_center(D) -> np.ndarray:
    """U-centring used by the bias-corrected estimator (needs ``n > 3``)."""
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    if n < 4:
        raise DegenerateData("U-centring needs at least 4 samples")
    A = (
        D
        - D.sum(axis=0)[None, :] / (n - 2)
        - D.sum(axis=1)[:, None] / (n - 2)
        + D.sum() / ((n - 1) * (n - 2))
    )
    np.fill_diagonal(A, 0.0)
    return A


def _ratio(A: np.ndarray, B: np.ndarray) -> float:
    vxy = float(np.mean(A * B))
    vxx = float(np.mean(A * A))
    vyy = float(np.mean(B * B))
    if vxx <= 0.0 or vyy <= 0.0:
        return 0.0
    return vxy / math.sqrt(vxx * vyy)


def _check_pair(X, Y):
    X, Y = _as_samples(X), _as_samples(Y)
    if X.shape[0] != Y.shape[0]:
        raise LengthMismatch(f"sample counts differ: {X.shape[0]} vs {Y.shape[0]}")
    if X.shape[0] < 2:
        raise DegenerateData("distance correlation needs at least 2 samples")
    return X, Y


def dcor(X, Y) -> DcorEstimate:
    """Empirical distance correlation (squared convention); 0 if degenerate."""
    X, Y = _check_pair(X, Y)
    value = _ratio(double_center(pairwise_distances(X)), double_center(pairwise_distances(Y)))
    return DcorEstimate(value, X.shape[0])


def dcor_sqrt(X, Y) -> float:
    """Square root of :func:`dcor` (the usual 'distance correlation')."""
    return math.sqrt(max(dcor(X, Y).value, 0.0))


def dcor_unbiased(X, Y) -> float:
    """Bias-corrected squared distance correlation; near 0 for independent data."""
    X, Y = _check_pair(X, Y)
    A = u_center(pairwise_distances(X))
    B = u_center(pairwise_distances(Y))
    return _ratio(A, B)


class _CenteredX:
    """Cache of the centred distance matrix of ``X`` for repeated comparisons."""

    def __init__(self, X, unbiased: bool = False):
        self.X = _as_samples(X)
        self.center = u_center if unbiased else double_center
        self.A = self.center(pairwise_distances(self.X))
        self.vxx = float(np.mean(self.A * self.A))

    def against(self, Y) -> float:
        B = self.center(pairwise_distances(Y))
        vyy = float(np.mean(B * B))
        if self.vxx <= 0.0 or vyy <= 0.0:
            return 0.0
        return float(np.mean(self.A * B)) / math.sqrt(self.vxx * vyy)


def _estimate(values, n: int) -> DcorEstimate:
    v = np.asarray(values, dtype=np.float64)
    std = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return DcorEstimate(float(v.mean()), n, int(v.size), std, v)


def permute_batches(Y, batch_size: int | None = None, rng=None, perm=None) -> np.ndarray:
    """CAP-style permutation: flatten each batch of rows and shuffle it.

    ``batch_size=None`` treats the whole matrix as one batch. ``perm`` forces
    a specific permutation (only for a single batch).
    """
    Y = np.array(Y, dtype=np.float64, copy=True)
    if perm is not None:
        return Y.ravel()[np.asarray(perm)].reshape(Y.shape)
    rng = _rng(rng)
    b = Y.shape[0] if batch_size is None else int(batch_size)
    if b < 1:
        raise ValueError("batch_size must be >= 1")
    for s in range(0, Y.shape[0], b):
        blk = Y[s : s + b]
        Y[s : s + b] = blk.ravel()[rng.permutation(blk.size)].reshape(blk.shape)
    return Y


def dcor_permuted_hidden(
    X, A=None, repeats: int = 100, rng=None, *, h: int | None = None, sigma: float = 1.0,
    batch_size: int | None = None, perm=None, unbiased: bool = False,
) -> DcorEstimate:
    """Mean of ``dcor(X, pi[X A])`` over ``repeats`` fresh permutations.

    With ``A=None`` a fresh Gaussian ``d x h`` projection is drawn for every
    repeat, which estimates the expectation over both ``A`` and ``pi``.
    """
    rng = _rng(rng)
    cx = _CenteredX(X, unbiased)
    d = cx.X.shape[1]
    vals = []
    for _ in range(repeats):
        proj = A if A is not None else rng.normal(0.0, sigma, size=(d, h or d))
        Y = cx.X @ proj
        vals.append(cx.against(permute_batches(Y, batch_size, rng, perm)))
    return _estimate(vals, cx.X.shape[0])


def dcor_random_projection(
    X, h: int, repeats: int = 100, rng=None, sigma: float = 1.0, unbiased: bool = False
) -> DcorEstimate:
    """Mean of ``dcor(X, X B)`` over fresh Gaussian ``d x h`` maps ``B``."""
    rng = _rng(rng)
    cx = _CenteredX(X, unbiased)
    d = cx.X.shape[1]
    vals = [cx.against(cx.X @ rng.normal(0.0, sigma, size=(d, h))) for _ in range(repeats)]
    return _estimate(vals, cx.X.shape[0])


# ----------------------------------------------------------------------------
# expected dcor under a random Gaussian linear map


def gaussian_map_constants(h: int, sigma: float = 1.0) -> tuple[float, float]:
    """``a = E|A u|`` and ``b = sqrt(E|A u|^2)`` for a unit vector ``u``."""
    a = sigma * math.sqrt(2.0) * math.exp(gammaln((h + 1) / 2) - gammaln(h / 2))
    b = sigma * math.sqrt(h)
    return a, b


def distance_moments(X) -> tuple[float, float, float]:
    """V-statistic moments ``S1 = E|X-X'|^2``, ``S2 = (E|X-X'|)^2``,
    ``S3 = E|X-X'||X-X''|`` over the empirical distribution."""
    D = pairwise_distances(X)
    return float(np.mean(D * D)), float(np.mean(D)) ** 2, float(np.mean(D.mean(axis=1) ** 2))


@dataclass
class GThetaEstimate:
    thetas: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    h: int
    sigma: float

    def __call__(self, theta) -> np.ndarray:
        """Interpolate ``g`` at angles in ``[0, pi]`` (folded onto ``[0, pi/2]``)."""
        t = np.asarray(theta, dtype=np.float64)
        t = np.minimum(t, np.pi - t)
        return np.interp(t, self.thetas, self.mean)


def g_theta_mc(d: int, h: int, sigma: float = 1.0, thetas=None, mc_samples: int = 20000, rng=None) -> GThetaEstimate:
    """Monte Carlo ``g(theta) = E_A |A x||A y|`` for unit ``x, y`` at angle theta.

    By rotation invariance only the first two columns ``a0, a1`` of ``A``
    matter; with ``x = (cos t/2, sin t/2, 0...)`` and
    ``y = (cos t/2, -sin t/2, 0...)`` we have ``|Ax| = |cos(t/2) a0 + sin(t/2) a1|``.
    The same draws are reused for every angle.
    """
    if d < 2:
        raise ValueError("need d >= 2")
    thetas = np.linspace(0.0, np.pi / 2, 9) if thetas is None else np.asarray(thetas, dtype=np.float64)
    if np.any(thetas < 0) or np.any(thetas > np.pi / 2 + 1e-12):
        raise ValueError("theta must lie in [0, pi/2]")
    rng = _rng(rng)
    a0 = rng.normal(0.0, sigma, size=(mc_samples, h))
    a1 = rng.normal(0.0, sigma, size=(mc_samples, h))
    means, errs = [], []
    for t in thetas:
        c, s = math.cos(t / 2), math.sin(t / 2)
        prod = np.linalg.norm(c * a0 + s * a1, axis=1) * np.linalg.norm(c * a0 - s * a1, axis=1)
        means.append(prod.mean())
        errs.append(prod.std(ddof=1) / math.sqrt(mc_samples))
    return GThetaEstimate(thetas, np.asarray(means), np.asarray(errs), h, sigma)


def _s3_prime_direct(X: np.ndarray, h: int, sigma: float, mc_samples: int, rng, S1, S2, a, b) -> float:
    # E_A mean_k (rowmean_l |A(x_k - x_l)|)^2, with two control variates whose
    # expectations are known exactly: E mean|AD|^2 = b^2 S1, E (mean|AD|)^2 ~ a^2 S2
    d = X.shape[1]
    s3p, sq, m2 = [], [], []
    for _ in range(mc_samples):
        Y = X @ rng.normal(0.0, sigma, size=(d, h))
        DY = pairwise_distances(Y)
        s3p.append(np.mean(DY.mean(axis=1) ** 2))
        sq.append(np.mean(DY * DY))
        m2.append(np.mean(DY) ** 2)
    return float(
        np.mean(s3p) - 0.5 * (np.mean(sq) - b * b * S1) - 0.5 * (np.mean(m2) - a * a * S2)
    )


def _calibrated(g: GThetaEstimate) -> GThetaEstimate:
    # pin the Monte Carlo curve to its two exactly known end points,
    # g(0) = sigma^2 h and g(pi/2) = a^2; common random numbers make the
    # shape far more accurate than the level
    a, _ = gaussian_map_constants(g.h, g.sigma)
    lo, hi = a * a, g.sigma**2 * g.h
    m = g.mean
    if g.thetas[0] != 0.0 or not np.isclose(g.thetas[-1], np.pi / 2) or m[0] == m[-1]:
        return g
    cal = lo + (m - m[-1]) * (hi - lo) / (m[0] - m[-1])
    return GThetaEstimate(g.thetas, cal, g.stderr, g.h, g.sigma)


def _s3_prime_g(X: np.ndarray, g: GThetaEstimate, n_triples: int, rng, exact_max: int = 200) -> float:
    n = X.shape[0]
    if n <= exact_max:
        total = 0.0
        for k in range(n):
            U = X - X[k]
            nu = np.linalg.norm(U, axis=1)
            den = np.outer(nu, nu)
            ok = den > 0
            cos = np.zeros_like(den)
            cos[ok] = (U @ U.T)[ok] / den[ok]
            total += float(np.sum(np.where(ok, den * g(np.arccos(np.clip(cos, -1.0, 1.0))), 0.0)))
        return total / n**3
    k, l, m = (rng.integers(0, n, size=n_triples) for _ in range(3))
    u = X[l] - X[k]
    v = X[m] - X[k]
    nu = np.linalg.norm(u, axis=1)
    nv = np.linalg.norm(v, axis=1)
    ok = (nu > 0) & (nv > 0)
    cos = np.zeros_like(nu)
    cos[ok] = np.einsum("ij,ij->i", u[ok], v[ok]) / (nu[ok] * nv[ok])
    theta = np.arccos(np.clip(cos, -1.0, 1.0))
    return float(np.mean(np.where(ok, nu * nv * g(theta), 0.0)))


def expected_dcor_linear(
    X, h: int, sigma: float = 1.0, mc_samples: int = 32, rng=None, *, method: str = "direct",
    n_triples: int = 200000, g: GThetaEstimate | None = None, details: bool = False,
):
    """Expected ``dcor(X, X A)`` over Gaussian ``A`` (d x h, entries N(0, sigma^2)).

    Returns ``sqrt(a^2 (S1 + S2 - 2 S3) / (b^2 S1 + a^2 S2 - 2 S3'))`` where
    ``S3' = E_A E|A(X-X')||A(X-X'')|``. ``method="direct"`` estimates S3'
    by Monte Carlo over ``A`` (with control variates, which turns the
    denominator into the Monte Carlo mean of ``V^2(XA, XA)``);
    ``method="g_theta"`` integrates the angle function ``g`` over all index
    triples (sampled ones when ``n > 200``) and keeps ``a^2 S2`` as is. The
    two agree closely for large ``h``; at small ``h`` the ``a^2 S2`` term is a
    visible approximation.
    """
    X = _as_samples(X)
    rng = _rng(rng)
    S1, S2, S3 = distance_moments(X)
    if S1 <= 0:
        raise DegenerateData("all samples coincide")
    a, b = gaussian_map_constants(h, sigma)
    if method == "direct":
        S3p = _s3_prime_direct(X, h, sigma, mc_samples, rng, S1, S2, a, b)
    elif method == "g_theta":
        if g is None:
            g = g_theta_mc(max(X.shape[1], 2), h, sigma, np.linspace(0, np.pi / 2, 65), 200000, rng)
        S3p = _s3_prime_g(X, _calibrated(g), n_triples, rng)
    else:
        raise ValueError(f"unknown method {method!r}")
    num = a * a * (S1 + S2 - 2 * S3)
    den = b * b * S1 + a * a * S2 - 2 * S3p
    if den <= 0:
        raise DegenerateData("non-positive denominator; increase mc_samples")
    value = math.sqrt(max(num, 0.0) / den)
    if details:
        return {"value": value, "S1": S1, "S2": S2, "S3": S3, "S3_prime": S3p, "a": a, "b": b}
    return value


# ----------------------------------------------------------------------------
# permutation error vectors


@dataclass
class PermutationStats:
    n: int
    mean: float
    variance: float
    e_norm2: float
    count: int
    mode: str

    @property
    def approx_1_over_n(self) -> float:
        return self.e_norm2 / self.n

    @property
    def approx_1_over_n_plus(self) -> float:
        return (1.0 / self.n + 1.0 / self.n**2) * self.e_norm2

    @property
    def exact_formula(self) -> float:
        """``|e_x|^2 / (n - 1)``, the exact variance for unit ``y`` orthogonal to 1."""
        return self.e_norm2 / (self.n - 1)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.update(
            approx_1_over_n=self.approx_1_over_n,
            approx_1_over_n_plus=self.approx_1_over_n_plus,
            exact_formula=self.exact_formula,
            ratio_to_1_over_n=self.variance / self.approx_1_over_n if self.e_norm2 else float("nan"),
        )
        return d


def mean_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.full_like(x, x.mean())


def random_orthogonal_unit(n: int, rng=None) -> np.ndarray:
    """A random unit vector orthogonal to the all-ones vector."""
    y = _rng(rng).normal(size=n)
    y -= y.mean()
    return y / np.linalg.norm(y)


def perm_error_stats(x, y, mode: str = "enumerate", samples: int = 100000, rng=None) -> PermutationStats:
    """Mean and variance of ``e_x . y`` with ``e_x = pi[x] - M(x)`` over random ``pi``."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    n = x.size
    if y.size != n:
        raise LengthMismatch("x and y must have equal length")
    if n < 2:
        raise ValueError("need n >= 2")
    if abs(y.sum()) > 1e-9 or abs(np.linalg.norm(y) - 1.0) > 1e-9:
        raise ValueError("y must be a unit vector orthogonal to the all-ones vector")
    e = x - x.mean()
    if mode == "enumerate":
        if n > MAX_ENUMERATION:
            raise TooLargeForEnumeration(f"enumeration supports n <= {MAX_ENUMERATION}, got {n}")
        perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    elif mode == "sample":
        rng = _rng(rng)
        perms = np.argsort(rng.random((samples, n)), axis=1)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    proj = e[perms] @ y
    mean = float(proj.mean())
    var = float(np.mean((proj - mean) ** 2)) if mode == "enumerate" else float(proj.var(ddof=1))
    return PermutationStats(n, mean, var, float(e @ e), int(perms.shape[0]), mode)


# ----------------------------------------------------------------------------
# simulated data


def simulate_distribution(kind: str, n: int, d: int = 100, rng=None) -> np.ndarray:
    """Synthetic sample matrices.

    ``normal``: N(0,1) entries; ``uniform``: U(0,1); ``sparse``: each entry 1
    with probability 0.1; ``subspace``: ``H A + E`` with ``H`` n x 20 N(0,1),
    ``A`` 20 x d with N(0, 1/20^2) entries and noise of variance 0.1.
    """
    rng = _rng(rng)
    if kind == "normal":
        return rng.normal(size=(n, d))
    if kind == "uniform":
        return rng.uniform(size=(n, d))
    if kind == "sparse":
        return (rng.uniform(size=(n, d)) < 0.1).astype(np.float64)
    if kind == "subspace":
        H = rng.normal(size=(n, 20))
        A = rng.normal(0.0, 1.0 / 20, size=(20, d))
        return H @ A + rng.normal(0.0, math.sqrt(0.1), size=(n, d))
    raise ValueError(f"unknown distribution {kind!r}; expected one of {DISTRIBUTIONS}")


def dcor_simulation(
    kinds=DISTRIBUTIONS, n: int = 1000, d: int = 100, h: int = 100, repeats: int = 200,
    seed: int = 0, unbiased: bool = False, include_expected: bool = False, mc_samples: int = 16,
) -> list[dict]:
    """Permuted hidden layer vs 1-d projection, per distribution.

    Each row has ``distribution, method, dcor, ci_low, ci_high``. Methods are
    ``permuted`` (``pi[X A]``, A d x h), ``linear_1d`` (``X B``, B d x 1) and
    optionally ``linear_expected`` (the closed form for ``X A``).
    """
    rows = []
    for i, kind in enumerate(kinds):
        rng = np.random.default_rng([seed, i])
        X = simulate_distribution(kind, n, d, rng)
        perm = dcor_permuted_hidden(X, repeats=repeats, rng=rng, h=h, unbiased=unbiased)
        lin1 = dcor_random_projection(X, 1, repeats=repeats, rng=rng, unbiased=unbiased)
        for method, est in (("permuted", perm), ("linear_1d", lin1)):
            lo, hi = est.ci()
            rows.append({"distribution": kind, "method": method, "dcor": est.value,
                         "ci_low": lo, "ci_high": hi, "repeats": est.repeats})
        if include_expected:
            v = expected_dcor_linear(X, h, mc_samples=mc_samples, rng=rng)
            rows.append({"distribution": kind, "method": "linear_expected", "dcor": v,
                         "ci_low": v, "ci_high": v, "repeats": mc_samples})
    return rows


# ----------------------------------------------------------------------------
# random flipping


@dataclass
class FlipResult:
    p_negative: float
    n: int

    @property
    def stderr(self) -> float:
        return math.sqrt(0.25 / self.n) if self.n else float("nan")


def flipping_distribution_test(z, trials: int = 1, prg: CommonPrg | None = None, seed: bytes = bytes(32)) -> FlipResult:
    """Apply random sign flips (as CAP does) and count negative outputs.

    ``z`` is flipped ``trials`` times with fresh masks; zero counts as
    non-negative.
    """
    z = np.asarray(z, dtype=np.float64).ravel()
    prg = prg or CommonPrg(seed, ("P0", "P1"))
    total = z.size * trials
    mask = gen_mask(prg, total).reshape(trials, z.size)
    flipped = np.where(mask, -z[None, :], z[None, :])
    return FlipResult(float(np.mean(flipped < 0)) if total else float("nan"), total)


# ----------------------------------------------------------------------------
# histogram attack


def distance_histograms(Z, bins: int = 50, rmax: float = 3.0) -> tuple[np.ndarray, float]:
    """Per-row normalised histograms of distances to the other rows.

    Distances are divided by the row's mean distance (cancelling any global
    scale of an unknown projection) and clipped to ``[0, rmax]``.
    Returns ``(histograms, bin_width)``.
    """
    Z = _as_samples(Z)
    n = Z.shape[0]
    if n < 2:
        raise ValueError("need at least two rows")
    D = pairwise_distances(Z)
    off = D[~np.eye(n, dtype=bool)].reshape(n, n - 1)
    mean = off.mean(axis=1, keepdims=True)
    off = np.divide(off, mean, out=np.zeros_like(off), where=mean > 0)
    width = rmax / bins
    idx = np.minimum((np.clip(off, 0.0, rmax) / width).astype(np.int64), bins - 1)
    H = np.zeros((n, bins))
    np.add.at(H, (np.repeat(np.arange(n), n - 1), idx.ravel()), 1.0)
    return H / (n - 1), width


def emd_1d(h1, h2, bin_width: float = 1.0) -> np.ndarray:
    """Earth mover's distance between 1-D histograms on a common grid.

    ``h2`` may be a stack of histograms (one per row).
    """
    c1 = np.cumsum(np.asarray(h1, dtype=np.float64), axis=-1)
    c2 = np.cumsum(np.asarray(h2, dtype=np.float64), axis=-1)
    return np.abs(c1 - c2).sum(axis=-1) * bin_width


def histogram_attack(leaked, aux, bins: int = 50, k: int = 10, targets=None, rmax: float = 3.0) -> np.ndarray:
    """Rank auxiliary samples by histogram similarity to leaked rows.

    Returns an array of shape ``(len(targets), k)`` of aux indices, best first.
    """
    aux = _as_samples(aux)
    if aux.shape[0] == 0:
        raise EmptyAux("auxiliary set is empty")
    if aux.shape[0] < k:
        raise ValueError(f"aux has {aux.shape[0]} samples, fewer than k={k}")
    H_leak, width = distance_histograms(leaked, bins, rmax)
    H_aux, _ = distance_histograms(aux, bins, rmax)
    targets = np.arange(H_leak.shape[0]) if targets is None else np.atleast_1d(targets)
    out = np.empty((targets.size, k), dtype=np.int64)
    for i, t in enumerate(targets):
        out[i] = np.argsort(emd_1d(H_leak[t], H_aux, width), kind="stable")[:k]
    return out


def two_cluster_data(n: int, d: int = 50, rng=None, frac: float = 0.35, shift: float = 1.2,
                     spreads=(0.6, 1.4)) -> tuple[np.ndarray, np.ndarray]:
    """Two Gaussian clusters of unequal size and spread; returns ``(X, labels)``."""
    rng = _rng(rng)
    lab = (rng.uniform(size=n) < frac).astype(np.int64)
    mu = np.where(lab[:, None] == 1, shift, 0.0)
    sd = np.asarray(spreads, dtype=np.float64)[lab][:, None]
    return mu + rng.normal(size=(n, d)) * sd, lab


def attack_success(
    n: int = 1000, d: int = 50, h: int = 16, batch_size: int | None = None, k: int = 10,
    n_targets: int = 100, bins: int = 50, seed: int = 0,
) -> dict:
    """Same-cluster rate of the top-k histogram matches, plus the chance level.

    The leaked matrix is ``X W`` for a Gaussian ``W`` (d -> h), optionally
    batch-permuted as CAP would; the attacker holds an independent aux sample
    from the same distribution.
    """
    rng = np.random.default_rng(seed)
    X, lab = two_cluster_data(n, d, rng)
    Xa, laba = two_cluster_data(n, d, rng)
    Y = X @ rng.normal(size=(d, h))
    if batch_size is not None:
        Y = permute_batches(Y, batch_size, rng)
    targets = rng.choice(n, size=min(n_targets, n), replace=False)
    top = histogram_attack(Y, Xa, bins, k, targets)
    rate = float(np.mean(laba[top] == lab[targets][:, None]))
    chance = float(np.mean([np.mean(laba == lab[t]) for t in targets]))
    return {"batch_size": batch_size, "rate": rate, "chance": chance, "k": k,
            "n_targets": int(targets.size)}
