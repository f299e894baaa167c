import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import MOD, encode_int, to_signed, trunc_int
from ssperm import ring
from ssperm.ring import FixedPointConfig, OutOfRange

U64 = st.integers(0, MOD - 1)


def test_encode_known_values():
    cfg = FixedPointConfig(23)
    assert int(ring.encode(1.0, cfg)) == 1 << 23
    assert int(ring.encode(-1.0, cfg)) == MOD - (1 << 23)
    # half an ulp rounds away from zero on both sides
    assert int(ring.encode(0.5 * cfg.ulp, cfg)) == 1
    assert to_signed(int(ring.encode(-0.5 * cfg.ulp, cfg))) == -1
    assert int(ring.encode(0.49 * cfg.ulp, cfg)) == 0


def test_encode_rejects_out_of_range_and_nan():
    cfg = FixedPointConfig(23)
    with pytest.raises(OutOfRange):
        ring.encode(cfg.value_bound, cfg)
    with pytest.raises(OutOfRange):
        ring.encode([np.nan], cfg)
    ring.encode(np.nextafter(cfg.value_bound, 0), cfg)


@pytest.mark.parametrize("p", [0, 41])
def test_precision_bounds(p):
    with pytest.raises(ValueError):
        FixedPointConfig(p)


@given(st.floats(-1e6, 1e6, allow_nan=False), st.integers(1, 40))
def test_encode_matches_integer_oracle(x, p):
    cfg = FixedPointConfig(p)
    if abs(x) >= cfg.value_bound:
        return
    assert int(ring.encode(x, cfg)) == encode_int(x, p)


@given(st.floats(-1e4, 1e4, allow_nan=False))
def test_roundtrip_within_half_ulp(x):
    cfg = FixedPointConfig(23)
    assert abs(ring.decode(ring.encode(x, cfg), cfg) - x) <= 0.5 * cfg.ulp + 1e-12 * abs(x)


@given(U64, U64)
def test_ring_ops_wrap(a, b):
    assert int(ring.ring_add(a, b)) == (a + b) % MOD
    assert int(ring.ring_sub(a, b)) == (a - b) % MOD
    assert int(ring.ring_mul(a, b)) == (a * b) % MOD
    assert int(ring.ring_neg(a)) == (-a) % MOD


def test_ring_matmul_and_sum_wrap():
    rng = np.random.default_rng(0)
    A = rng.integers(0, 2**63, size=(3, 4), dtype=np.uint64) * np.uint64(2)
    B = rng.integers(0, 2**63, size=(4, 2), dtype=np.uint64)
    want = [[sum(int(A[i, k]) * int(B[k, j]) for k in range(4)) % MOD for j in range(2)] for i in range(3)]
    assert ring.ring_matmul(A, B).tolist() == want
    assert int(ring.ring_sum(A)) == sum(int(v) for v in A.ravel()) % MOD


@given(U64, st.integers(1, 40))
def test_truncate_plain_matches_oracle(v, p):
    assert int(ring.truncate_plain(np.uint64(v), FixedPointConfig(p))) == trunc_int(v, p)


def test_signed_views():
    assert int(ring.signed(np.uint64(MOD - 1))) == -1
    assert int(ring.from_signed(-2)) == MOD - 2
    assert ring.as_ring(-1) == np.uint64(MOD - 1)
    assert ring.as_ring(np.array([-3])).dtype == np.uint64
    with pytest.raises(TypeError):
        ring.as_ring(np.array([1.5]))


@settings(max_examples=50)
@given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=20))
def test_encode_linearity_of_addition(xs):
    cfg = FixedPointConfig(23)
    x = np.asarray(xs)
    s = ring.ring_add(ring.encode(x, cfg), ring.encode(x, cfg))
    np.testing.assert_allclose(ring.decode(s, cfg), 2 * x, atol=cfg.ulp)
