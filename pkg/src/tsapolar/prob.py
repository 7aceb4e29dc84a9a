"""Finite-alphabet probability tables and information measures.

All quantities are in bits. Tables are small dense ``float64`` arrays that are
frozen (read-only) after construction so they can be shared between worker
processes without copying concerns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

NORM_TOL = 1e-12
LP_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Pmf:
    """Distribution over the symbols ``0 .. alphabet_size - 1``."""

    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("Pmf needs a non-empty 1-d probability vector")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError(f"probabilities outside [0, 1]: {p}")
        if abs(p.sum() - 1.0) > NORM_TOL:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", p)

    @property
    def alphabet_size(self) -> int:
        return self.probs.size

    def __getitem__(self, a):
        return self.probs[a]

    def __repr__(self):
        return f"Pmf({self.probs.tolist()})"


@dataclass(frozen=True, eq=False)
class ConditionalPmf:
    """Channel-like table; ``rows[x, y] = P(y | x)``."""

    rows: np.ndarray

    def __post_init__(self):
        w = _frozen(self.rows)
        if w.ndim != 2 or w.size == 0:
            raise ValueError("ConditionalPmf needs a non-empty 2-d table")
        if np.any(w < 0) or np.any(w > 1):
            raise ValueError("transition probabilities outside [0, 1]")
        bad = np.abs(w.sum(axis=1) - 1.0) > NORM_TOL
        if np.any(bad):
            raise ValueError(f"rows {np.flatnonzero(bad).tolist()} do not sum to 1")
        object.__setattr__(self, "rows", w)

    @property
    def input_size(self) -> int:
        return self.rows.shape[0]

    @property
    def output_size(self) -> int:
        return self.rows.shape[1]

    def row(self, x: int) -> Pmf:
        return Pmf(self.rows[x])

    def compose(self, then: "ConditionalPmf") -> "ConditionalPmf":
        """Cascade ``self`` followed by ``then``."""
        if self.output_size != then.input_size:
            raise ValueError("alphabet mismatch in channel composition")
        out = self.rows @ then.rows
        return ConditionalPmf(out / out.sum(axis=1, keepdims=True))

    def joint(self, prior: Pmf) -> "JointPmf":
        if prior.alphabet_size != self.input_size:
            raise ValueError("prior does not match channel input alphabet")
        return JointPmf(prior.probs[:, None] * self.rows)

    def __repr__(self):
        return f"ConditionalPmf({self.rows.tolist()})"


@dataclass(frozen=True, eq=False)
class JointPmf:
    """Joint distribution of a pair; ``table[x, y] = P(x, y)``."""

    table: np.ndarray

    def __post_init__(self):
        t = _frozen(self.table)
        if t.ndim != 2 or t.size == 0:
            raise ValueError("JointPmf needs a non-empty 2-d table")
        if np.any(t < 0):
            raise ValueError("negative joint probability")
        if abs(t.sum() - 1.0) > NORM_TOL:
            raise ValueError(f"joint mass is {t.sum()!r}, not 1")
        object.__setattr__(self, "table", t)

    @property
    def sizes(self) -> tuple[int, int]:
        return self.table.shape

    def marginal_x(self) -> Pmf:
        return Pmf(_renorm(self.table.sum(axis=1)))

    def marginal_y(self) -> Pmf:
        return Pmf(_renorm(self.table.sum(axis=0)))

    def swap(self) -> "JointPmf":
        return JointPmf(self.table.T)

    def conditional_y_given_x(self) -> ConditionalPmf:
        """``P(y|x)``; rows of zero-probability ``x`` are left uniform."""
        return ConditionalPmf(_rows_normalized(self.table))

    def conditional_x_given_y(self) -> ConditionalPmf:
        return ConditionalPmf(_rows_normalized(self.table.T))

    def __repr__(self):
        return f"JointPmf({self.table.tolist()})"


def _renorm(p: np.ndarray) -> np.ndarray:
    return p / p.sum()


def _rows_normalized(t: np.ndarray) -> np.ndarray:
    s = t.sum(axis=1, keepdims=True)
    out = np.where(s > 0, t / np.where(s > 0, s, 1.0), 1.0 / t.shape[1])
    return out / out.sum(axis=1, keepdims=True)


def bernoulli(p: float) -> Pmf:
    return Pmf([1.0 - p, p])


def bsc(p: float) -> ConditionalPmf:
    return ConditionalPmf([[1.0 - p, p], [p, 1.0 - p]])


def h2(p):
    """Binary entropy, elementwise, with ``h2(0) = h2(1) = 0``."""
    p = np.asarray(p, dtype=np.float64)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -(np.where(p > 0, p * np.log2(p), 0.0) + np.where(q > 0, q * np.log2(q), 0.0))
    return out if out.ndim else float(out)


def _plogp_sum(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def entropy(p: Pmf) -> float:
    return _plogp_sum(p.probs)


def joint_entropy(joint: JointPmf) -> float:
    return _plogp_sum(joint.table.ravel())


def conditional_entropy(joint: JointPmf) -> float:
    """``H(X|Y)`` for ``joint`` over ``(X, Y)``."""
    h = joint_entropy(joint) - entropy(joint.marginal_y())
    return max(h, 0.0)


def mutual_information(joint: JointPmf) -> float:
    mi = entropy(joint.marginal_x()) - conditional_entropy(joint)
    return max(mi, 0.0)


def bhattacharyya(joint: JointPmf) -> float:
    """Conditional Bhattacharyya parameter ``Z(X|Y)`` for binary ``X``."""
    if joint.sizes[0] != 2:
        raise ValueError(f"Z(X|Y) needs binary X, got |X| = {joint.sizes[0]}")
    # 2 E[sqrt(P(0|Y) P(1|Y))] = 2 sum_y sqrt(P(0,y) P(1,y))
    t = joint.table
    return float(min(1.0, 2.0 * np.sqrt(t[0] * t[1]).sum()))


def is_typical(x: Sequence[int], p: Pmf, eps: float) -> bool:
    """Multiplicative eps-typicality of the string ``x`` w.r.t. ``p``."""
    x = np.asarray(x)
    if x.size == 0:
        raise ValueError("typicality of an empty string is undefined")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if np.any((x < 0) | (x >= p.alphabet_size)):
        raise ValueError("symbol outside the alphabet")
    counts = np.bincount(x.ravel(), minlength=p.alphabet_size)
    freq = counts / x.size
    return bool(np.all(np.abs(freq - p.probs) <= eps * p.probs + 1e-15))


def is_degraded(w1: ConditionalPmf, w2: ConditionalPmf, tol: float = LP_TOL) -> bool:
    """True iff ``w1 = w2`` followed by some channel ``W`` (``w1`` is worse).

    Decided by an LP feasibility problem over the row-stochastic matrices W.
    """
    if w1.input_size != w2.input_size:
        raise ValueError("channels have different input alphabets")
    nx, n1, n2 = w1.input_size, w1.output_size, w2.output_size
    # Unknowns W[y2, y1] flattened row-major; slack s >= |residual| minimized.
    nw = n2 * n1
    a_eq, b_eq = [], []
    for y2 in range(n2):
        row = np.zeros(nw + 1)
        row[y2 * n1:(y2 + 1) * n1] = 1.0
        a_eq.append(row)
        b_eq.append(1.0)
    a_ub, b_ub = [], []
    for x in range(nx):
        for y1 in range(n1):
            coef = np.zeros(nw + 1)
            for y2 in range(n2):
                coef[y2 * n1 + y1] = w2.rows[x, y2]
            # |coef . W - w1[x, y1]| <= s
            up = coef.copy()
            up[-1] = -1.0
            a_ub.append(up)
            b_ub.append(w1.rows[x, y1])
            lo = -coef
            lo[-1] = -1.0
            a_ub.append(lo)
            b_ub.append(-w1.rows[x, y1])
    cost = np.zeros(nw + 1)
    cost[-1] = 1.0
    res = linprog(cost, A_ub=np.array(a_ub), b_ub=np.array(b_ub), A_eq=np.array(a_eq),
                  b_eq=np.array(b_eq), bounds=[(0, None)] * (nw + 1), method="highs")
    return bool(res.status == 0 and res.fun <= tol)
