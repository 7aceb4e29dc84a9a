import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tsapolar.prob import (ConditionalPmf, JointPmf, Pmf, bernoulli, bhattacharyya, bsc,
                           conditional_entropy, entropy, h2, is_degraded, is_typical,
                           joint_entropy, mutual_information)

H13 = math.log2(3) - 2 / 3  # h2(1/3)
BW_PUV = [[1 / 3, 1 / 3], [1 / 3, 0.0]]


def test_entropy_examples():
    assert entropy(bernoulli(0.5)) == pytest.approx(1.0, abs=1e-15)
    assert entropy(bernoulli(0.0)) == 0.0
    assert entropy(bernoulli(1 / 3)) == pytest.approx(0.918296, abs=1e-6)
    assert entropy(bernoulli(1 / 3)) == pytest.approx(H13, abs=1e-15)


def test_conditional_entropy_examples():
    assert conditional_entropy(JointPmf([[0.5, 0], [0, 0.5]])) == pytest.approx(0.0, abs=1e-15)
    indep = JointPmf(np.outer([1 / 3, 2 / 3], [0.5, 0.5]))
    # H(X|Y) with X ~ Ber(2/3) on the rows is h2(1/3)
    assert conditional_entropy(indep) == pytest.approx(0.918296, abs=1e-6)
    # H(V|U) for the Blackwell law: rows of the swapped table are V
    assert conditional_entropy(JointPmf(BW_PUV).swap()) == pytest.approx(2 / 3, abs=1e-12)


def test_mutual_information_examples():
    assert mutual_information(JointPmf(np.outer([0.2, 0.8], [0.6, 0.4]))) == pytest.approx(0, abs=1e-12)
    assert mutual_information(JointPmf(BW_PUV)) == pytest.approx(0.251629, abs=1e-6)
    assert mutual_information(JointPmf(BW_PUV)) == pytest.approx(H13 - 2 / 3, abs=1e-12)
    assert mutual_information(JointPmf([[2 / 3, 0], [0, 1 / 3]])) == pytest.approx(0.918296, abs=1e-6)


def test_bhattacharyya_examples():
    assert bhattacharyya(JointPmf(np.outer([0.5, 0.5], [0.3, 0.7]))) == pytest.approx(1.0)
    assert bhattacharyya(JointPmf([[0.4, 0], [0, 0.6]])) == 0.0
    assert bhattacharyya(JointPmf(np.outer([1 / 3, 2 / 3], [0.5, 0.5]))) == pytest.approx(0.9428, abs=1e-4)
    with pytest.raises(ValueError):
        bhattacharyya(JointPmf(np.full((3, 2), 1 / 6)))


def test_typicality_examples():
    p = bernoulli(1 / 3)
    assert is_typical([0, 0, 1, 0, 1, 0], p, 1e-6)
    assert not is_typical([1] * 9, p, 0.1)
    assert is_typical([0, 0, 0, 0, 1, 1], p, 0.01)
    with pytest.raises(ValueError):
        is_typical([], p, 0.1)
    # zero-probability symbols are never typical
    assert not is_typical([0, 1], Pmf([1.0, 0.0]), 0.5)


def test_degraded_examples():
    assert is_degraded(bsc(0.1), bsc(0.1))
    assert is_degraded(bsc(0.2), bsc(0.1))
    assert not is_degraded(bsc(0.0), bsc(0.1))
    with pytest.raises(ValueError):
        is_degraded(bsc(0.1), ConditionalPmf(np.full((3, 2), 0.5)))


def test_pmf_validation():
    with pytest.raises(ValueError):
        Pmf([0.5, 0.6])
    with pytest.raises(ValueError):
        Pmf([-0.1, 1.1])
    with pytest.raises(ValueError):
        JointPmf([[0.5, 0.5], [0.5, 0.5]])


def test_bsc_composition_is_bsc():
    w = bsc(0.1).compose(bsc(0.125))
    assert np.allclose(w.rows, bsc(0.2).rows)


# -- properties ------------------------------------------------------------------------

def _joint(seed, nx=2, ny=3):
    r = np.random.default_rng(seed)
    t = r.dirichlet(np.ones(nx * ny) * 0.7).reshape(nx, ny)
    return JointPmf(t)


@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(1, 4))
def test_mi_identity(seed, nx, ny):
    j = _joint(seed, nx, ny)
    lhs = mutual_information(j)
    rhs = entropy(j.marginal_x()) + entropy(j.marginal_y()) - joint_entropy(j)
    assert lhs == pytest.approx(rhs, abs=1e-12)
    assert lhs >= -1e-12
    assert mutual_information(j.swap()) == pytest.approx(lhs, abs=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(1, 4))
def test_marginals_normalised(seed, nx, ny):
    j = _joint(seed, nx, ny)
    assert abs(j.marginal_x().probs.sum() - 1) <= 1e-12
    c = j.conditional_y_given_x()
    back = c.joint(j.marginal_x())
    assert np.allclose(back.table, j.table, atol=1e-12)


def test_z_sandwich_1000_random():
    r = np.random.default_rng(7)
    for _ in range(1000):
        ny = r.integers(1, 6)
        j = JointPmf(r.dirichlet(np.ones(2 * ny) * r.uniform(0.2, 3)).reshape(2, ny))
        z, h = bhattacharyya(j), conditional_entropy(j)
        assert z * z <= h + 1e-12
        assert h <= z + 1e-12


@given(st.integers(0, 2**32 - 1))
def test_conditioning_reduces_z(seed):
    r = np.random.default_rng(seed)
    # P(x, y, s) with binary x
    t = r.dirichlet(np.ones(2 * 3 * 2)).reshape(2, 3, 2)
    z_ys = bhattacharyya(JointPmf(t.reshape(2, 6)))
    z_y = bhattacharyya(JointPmf(t.sum(axis=2)))
    assert z_ys <= z_y + 1e-12


@given(st.integers(0, 2**32 - 1), st.integers(2, 3))
def test_degradedness_reflexive_transitive(seed, nx):
    r = np.random.default_rng(seed)
    w = ConditionalPmf(r.dirichlet(np.ones(3), size=nx))
    a = ConditionalPmf(r.dirichlet(np.ones(3), size=3))
    b = ConditionalPmf(r.dirichlet(np.ones(2), size=3))
    w1 = w.compose(a)
    w2 = w1.compose(b)
    assert is_degraded(w, w)
    assert is_degraded(w1, w)
    assert is_degraded(w2, w1)
    assert is_degraded(w2, w)


def test_h2_vectorised():
    p = np.array([0.0, 0.5, 1.0, 1 / 3])
    assert np.allclose(h2(p), [0, 1, 0, H13])
