import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tsapolar.polar import (CodeSpec, Exhausted, InfeasibleRate, PolarTransform, ReliabilityProfile,
                            build_code, estimate_profile, make_transform, read_profile_csv,
                            stage_order_adjacent_first, stage_order_butterfly_first, transform,
                            write_profile_csv)
from tsapolar.scheme import SchemeSource, known_mask

H13 = math.log2(3) - 2 / 3


def _kron(n):
    g = np.array([[1]], dtype=np.uint8)
    while g.shape[0] < n:
        g = np.kron(g, np.array([[1, 0], [1, 1]], dtype=np.uint8))
    return g


def test_transform_examples():
    assert transform([1, 0]).tolist() == [1, 0]
    assert transform([0, 1]).tolist() == [1, 1]
    for n in (2, 8, 64):
        assert not transform(np.zeros(n)).any()
    with pytest.raises(ValueError):
        transform([1, 0, 1])


@given(st.integers(0, 10), st.integers(0, 2**32 - 1))
def test_transform_matches_matrix_and_is_involutive(m, seed):
    n = 1 << m
    u = np.random.default_rng(seed).integers(0, 2, n).astype(np.uint8)
    x = transform(u)
    if n <= 256:
        assert np.array_equal(x, (u @ _kron(n)) % 2)
    assert np.array_equal(transform(x), u)


def test_stage_order_independent_of_map(rng):
    u = rng.integers(0, 2, (10, 64)).astype(np.uint8)
    a = transform(u, stage_order_butterfly_first(64))
    b = transform(u, stage_order_adjacent_first(64))
    assert np.array_equal(a, b)


@pytest.mark.parametrize("name", ["butterfly-first", "adjacent-first"])
def test_permutation_commutes(rng, name):
    t = make_transform(128, name)
    u = rng.integers(0, 2, 128).astype(np.uint8)
    assert np.array_equal(transform(u[t.perm]), transform(u)[t.perm])


def test_first_stage_pairs():
    assert stage_order_butterfly_first(2).first_stage_pairs() == [(0, 1)]
    assert stage_order_butterfly_first(4).first_stage_pairs() == [(0, 2), (1, 3)]
    assert stage_order_butterfly_first(8).first_stage_pairs() == [(i, i + 4) for i in range(4)]
    assert stage_order_adjacent_first(8).first_stage_pairs() == [(0, 1), (2, 3), (4, 5), (6, 7)]
    assert stage_order_butterfly_first(16).is_natural
    p = stage_order_adjacent_first(8).perm
    assert p.tolist() == [0, 4, 2, 6, 1, 5, 3, 7]


def test_bad_stage_order():
    with pytest.raises(ValueError):
        PolarTransform(8, (0, 0, 1))
    with pytest.raises(ValueError):
        make_transform(8, "sideways")


class _Iid:
    """Ber(p) bits with no side information and no observation."""

    def __init__(self, n, p, known=False):
        self.n, self.p, self.known = n, p, known

    def draw(self, rng, count):
        u = (rng.random((count, self.n)) < self.p).astype(np.uint8)
        prior = math.log((1 - self.p) / self.p)
        s = np.where(u == 0, 30.0, -30.0) if self.known else np.full(u.shape, prior)
        return s, u, np.full(u.shape, prior)


def test_profile_uniform():
    t = make_transform(64)
    prof = estimate_profile(_Iid(64, 0.5), t, 3000, seed=1)
    assert np.all(np.abs(prof.h_state - 1.0) <= 3 * prof.se_h_state + 1e-9)


def test_profile_deterministic():
    prof = estimate_profile(_Iid(64, 0.3, known=True), make_transform(64), 200)
    assert prof.h_state.max() < 1e-9


def test_profile_ber13_n1024():
    prof = estimate_profile(_Iid(1024, 1 / 3), make_transform(1024), 1500, seed=4)
    assert prof.mean_state() == pytest.approx(H13, abs=0.01)


def test_profile_worker_independent():
    src = _Iid(32, 0.3)
    t = make_transform(32)
    a = estimate_profile(src, t, 2500, seed=9, workers=1, chunk=1000)
    b = estimate_profile(src, t, 2500, seed=9, workers=2, chunk=1000)
    assert np.array_equal(a.h_state, b.h_state) and np.array_equal(a.z_rx, b.z_rx)


def test_profile_exhaustion():
    def short(rng, count):
        u = np.zeros((count - 1, 8), np.uint8)
        return np.zeros(u.shape), u, np.zeros(u.shape)

    with pytest.raises(Exhausted):
        estimate_profile(short, make_transform(8), 10)
    with pytest.raises(ValueError):
        estimate_profile(short, make_transform(8), 0)


def test_profile_conservation_with_side_info(blackwell):
    n = 256
    src = SchemeSource(blackwell, 1, n, known_mask(n, n // 2))
    prof = estimate_profile(src, make_transform(n), 3000, seed=2)
    target = 0.5 * (H13 - (H13 - 2 / 3)) + 0.5 * H13
    assert abs(prof.mean_state() - target) <= 3 * prof.se_state_mean
    assert np.all(prof.z_state ** 2 <= prof.h_state + 1e-12)
    assert np.all(prof.h_state <= prof.z_state + 1e-12)


def test_polarization_trend():
    fr = {}
    for n in (256, 2048):
        prof = estimate_profile(_Iid(n, 1 / 3), make_transform(n), 800, seed=n)
        fr[n] = ((prof.h_state > 0.99).mean(), ((prof.h_state > 0.01) & (prof.h_state < 0.99)).mean())
    assert fr[2048][0] > fr[256][0]
    assert fr[2048][1] < fr[256][1]


class _Bsc:
    """U ~ Ber(1/2) observed through a chain of BSCs; rx uses the last stage."""

    def __init__(self, n, flips):
        self.n, self.flips = n, flips

    def draw(self, rng, count):
        u = rng.integers(0, 2, (count, self.n)).astype(np.uint8)
        y = u.copy()
        for p in self.flips:
            y ^= (rng.random(y.shape) < p).astype(np.uint8)
        eff = 0.5 * (1 - np.prod([1 - 2 * p for p in self.flips]))
        llr = np.where(y == 0, 1.0, -1.0) * math.log((1 - eff) / eff)
        return np.zeros(u.shape), u, llr


def test_nesting_under_degradation():
    n, cut = 256, 0.1
    t = make_transform(n)
    good = estimate_profile(_Bsc(n, [0.05]), t, 2000, seed=1)
    bad = estimate_profile(_Bsc(n, [0.05, 0.05]), t, 2000, seed=1)
    sg = set(np.flatnonzero(good.h_rx <= cut))
    sb = set(np.flatnonzero(bad.h_rx <= cut))
    # indices within 3 sigma of the cutoff are unresolved
    unresolved = set(np.flatnonzero(np.abs(good.h_rx - cut) <= 3 * good.se_h_rx + 1e-12))
    unresolved |= set(np.flatnonzero(np.abs(bad.h_rx - cut) <= 3 * bad.se_h_rx + 1e-12))
    assert (sb - sg) <= unresolved
    assert len(sb) < len(sg)


def _flat_profile(n, h_state=1.0, h_rx=0.0):
    z = np.zeros(n)
    return ReliabilityProfile(n, np.full(n, h_state), np.full(n, h_rx), z, z, 1)


def test_build_code_examples():
    c = build_code(_flat_profile(16), 0)
    assert c.data_set == () and c.rate == 0
    c = build_code(_flat_profile(16), 5)
    assert c.data_set == (0, 1, 2, 3, 4)
    assert set(c.shaping_set) == set(range(5, 16)) and c.frozen_set == ()


def test_build_code_ranking_and_cutoffs():
    h_state = np.array([0.2, 0.9, 0.9, 0.5, 1.0, 0.0, 0.7, 0.3])
    h_rx = np.array([0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.05, 0.2])
    prof = ReliabilityProfile(8, h_state, h_rx, np.zeros(8), np.zeros(8), 1)
    c = build_code(prof, 3)
    assert c.data_set == (1, 4, 6)
    assert c.frozen_set == (2, 7)
    assert c.shaping_set == (0, 3, 5)
    with pytest.raises(InfeasibleRate) as e:
        build_code(prof, 7)
    assert e.value.maximum == 6 and "6" in str(e.value)
    c = build_code(prof, 1, shaping_cutoff=0.25)
    assert c.frozen_set == (0, 2, 5, 7)


@given(st.integers(0, 2**32 - 1), st.integers(0, 64))
def test_build_code_partition(seed, k):
    r = np.random.default_rng(seed)
    prof = ReliabilityProfile(64, r.random(64), r.random(64) * 0.05, np.zeros(64), np.zeros(64), 1)
    c = build_code(prof, k)
    assert sorted(c.data_set + c.shaping_set + c.frozen_set) == list(range(64))
    assert c.rate == k / 64
    if k:
        worst_data = min(prof.h_state[list(c.data_set)])
        assert all(prof.h_state[i] <= worst_data for i in c.shaping_set)


def test_codespec_validation_and_io(tmp_path):
    with pytest.raises(ValueError):
        CodeSpec(4, [0, 1], [1], [2, 3])
    c = CodeSpec(8, [1, 5], [0, 2, 3], [4, 6, 7])
    c.save(tmp_path / "c.json")
    back = CodeSpec.load(tmp_path / "c.json")
    assert back == c and back.kinds.tolist() == c.kinds.tolist()


def test_profile_csv_roundtrip(tmp_path):
    r = np.random.default_rng(0)
    prof = ReliabilityProfile(16, r.random(16), r.random(16), r.random(16), r.random(16), 5)
    write_profile_csv(tmp_path / "p.csv", prof)
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "index,h_state,h_rx,z_state,z_rx"
    back = read_profile_csv(tmp_path / "p.csv", 5)
    for k in ("h_state", "h_rx", "z_state", "z_rx"):
        assert np.array_equal(getattr(back, k), getattr(prof, k))
