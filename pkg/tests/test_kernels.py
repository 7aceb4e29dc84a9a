import math

import numpy as np
import pytest

from tsapolar import _pykernels as py
from tsapolar import kernels
from tsapolar.kernels import DATA, FROZEN, SHAPING
from tsapolar.polar import transform

try:
    from tsapolar import _ckernels as cx
except ImportError:  # pragma: no cover - extension not built
    cx = None

needs_ext = pytest.mark.skipif(cx is None, reason="compiled extension not built")


def _case(rng, n):
    chan = rng.normal(1.0, 3.0, n)
    kind = rng.integers(0, 3, n).astype(np.int8)
    return chan, kind


def test_backend_selected():
    assert kernels.BACKEND in ("compiled", "python")


@needs_ext
@pytest.mark.parametrize("n", [1, 2, 4, 16, 128, 256])
def test_genie_parity(rng, n):
    chan = rng.normal(0.5, 2.0, (5, n))
    ub = rng.integers(0, 2, (5, n)).astype(np.uint8)
    assert np.allclose(cx.genie_llrs(chan, ub), py.genie_llrs(chan, ub), rtol=1e-9, atol=1e-9)


@needs_ext
@pytest.mark.parametrize("n", [2, 8, 64, 256])
def test_encode_parity(rng, n):
    chan, kind = _case(rng, n)
    given = rng.integers(0, 2, n).astype(np.uint8)
    unif = rng.random(n)
    a = cx.sc_encode(chan, kind, given, unif)
    b = py.sc_encode(chan, kind, given, unif)
    assert np.array_equal(a[0], b[0])
    assert np.allclose(a[1], b[1], atol=1e-9)


@needs_ext
@pytest.mark.parametrize("n", [1, 2, 8, 64, 256])
@pytest.mark.parametrize("L", [1, 2, 4, 8])
def test_decode_parity(rng, n, L):
    for _ in range(5):
        chan, kind = _case(rng, n)
        a = cx.scl_decode(chan, kind, L)
        b = py.scl_decode(chan, kind, L)
        assert np.array_equal(a[0], b[0])
        assert a[1] == pytest.approx(b[1], abs=1e-9)
        s1, s2 = cx.sc_decode(chan, kind), py.sc_decode(chan, kind)
        assert np.array_equal(s1[0], s2[0])


@pytest.mark.parametrize("mod", [py] + ([cx] if cx is not None else []))
def test_scl1_equals_sc(rng, mod):
    for n in (2, 16, 128):
        for _ in range(20):
            chan, kind = _case(rng, n)
            assert np.array_equal(mod.sc_decode(chan, kind)[0], mod.scl_decode(chan, kind, 1)[0])


@pytest.mark.parametrize("mod", [py] + ([cx] if cx is not None else []))
def test_path_metric_is_posterior(rng, mod):
    # -log2 P(ubar|y) factorises over x = ubar G
    n = 64
    chan, kind = _case(rng, n)
    ub, pm, finals = mod.scl_decode(chan, kind, 4)
    x = transform(ub).astype(float)
    direct = np.logaddexp(0, -(1 - 2 * x) * chan).sum() / math.log(2)
    assert pm == pytest.approx(direct, abs=1e-6)
    assert pm == pytest.approx(min(finals), abs=1e-12)


@pytest.mark.parametrize("mod", [py] + ([cx] if cx is not None else []))
def test_frozen_forced_zero(rng, mod):
    n = 32
    chan, _ = _case(rng, n)
    kind = np.full(n, FROZEN, dtype=np.int8)
    assert not mod.scl_decode(chan, kind, 4)[0].any()
    ub, _ = mod.sc_encode(chan, kind, np.ones(n, np.uint8), rng.random(n))
    assert not ub.any()


@pytest.mark.parametrize("mod", [py] + ([cx] if cx is not None else []))
def test_encode_places_data(rng, mod):
    n = 32
    kind = np.full(n, DATA, dtype=np.int8)
    given = rng.integers(0, 2, n).astype(np.uint8)
    ub, _ = mod.sc_encode(rng.normal(size=n), kind, given, rng.random(n))
    assert np.array_equal(ub, given)


@pytest.mark.parametrize("mod", [py] + ([cx] if cx is not None else []))
def test_noiseless_roundtrip(rng, mod):
    n = 128
    kind = np.where(rng.random(n) < 0.5, DATA, SHAPING).astype(np.int8)
    ub, _ = mod.sc_encode(np.full(n, 0.7), kind, rng.integers(0, 2, n).astype(np.uint8), rng.random(n))
    x = transform(ub)
    chan = np.where(x == 0, 4.0, -4.0)
    for L in (1, 4):
        assert np.array_equal(mod.scl_decode(chan, kind, L)[0], ub)


@pytest.mark.parametrize("mod", [py] + ([cx] if cx is not None else []))
def test_errors(mod):
    with pytest.raises(ValueError):
        mod.sc_decode(np.zeros(3), np.zeros(3, np.int8))
    with pytest.raises(ValueError):
        mod.scl_decode(np.zeros(4), np.zeros(4, np.int8), 0)


def test_boxplus_exact():
    a, b = 1.3, -0.4
    exact = 2 * math.atanh(math.tanh(a / 2) * math.tanh(b / 2))
    assert float(py.f_op(np.array(a), np.array(b))) == pytest.approx(exact, rel=1e-12)
    a, b = 5.0, 7.0
    exact = math.log((1 + math.exp(a + b)) / (math.exp(a) + math.exp(b)))
    assert float(py.f_op(np.array(a), np.array(b))) == pytest.approx(exact, rel=1e-12)
