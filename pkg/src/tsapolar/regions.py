"""Marton's region, its corner points and the time-shifted alternating rate line.

Everything here is evaluated for one fixed input structure ``(P_UV, g, channel)``;
the receiver marginals ``P_{Y1|X}`` and ``P_{Y2|X}`` are always derived from the
joint channel law so they cannot disagree with it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple

import numpy as np

from .prob import JointPmf, Pmf, entropy, mutual_information


class RatePair(NamedTuple):
    r1: float
    r2: float

    @property
    def total(self) -> float:
        return self.r1 + self.r2


@dataclass(frozen=True, eq=False)
class InputStructure:
    """Auxiliary law ``P_UV``, symbol map ``x = g(u, v)`` and broadcast channel.

    ``channel`` is any object with ``law`` (ConditionalPmf from X to the
    flattened pair ``y1 * |Y2| + y2``) and ``y_sizes``; see :mod:`tsapolar.channel`.
    """

    joint: JointPmf
    symbol_map: np.ndarray
    channel: object

    def __post_init__(self):
        g = np.array(self.symbol_map, dtype=np.int64)
        if g.shape != self.joint.sizes:
            raise ValueError(f"symbol map shape {g.shape} != |U|x|V| {self.joint.sizes}")
        nx = self.channel.law.input_size
        if np.any((g < 0) | (g >= nx)):
            raise ValueError("symbol map leaves the channel input alphabet")
        g.setflags(write=False)
        object.__setattr__(self, "symbol_map", g)

    @property
    def u_size(self) -> int:
        return self.joint.sizes[0]

    @property
    def v_size(self) -> int:
        return self.joint.sizes[1]

    def input_pmf(self) -> Pmf:
        """``P_X`` induced by pushing ``P_UV`` through ``g``."""
        nx = self.channel.law.input_size
        px = np.bincount(self.symbol_map.ravel(), weights=self.joint.table.ravel(), minlength=nx)
        return Pmf(px / px.sum())

    def receiver_rows(self, k: int) -> np.ndarray:
        """``P(y_k | x)`` as an array of shape ``(|X|, |Y_k|)``."""
        n1, n2 = self.channel.y_sizes
        w = self.channel.law.rows.reshape(-1, n1, n2)
        return w.sum(axis=2) if k == 1 else w.sum(axis=1)

    def aux_output_joint(self, k: int) -> JointPmf:
        """``P(u, y1)`` for ``k = 1`` or ``P(v, y2)`` for ``k = 2``."""
        w = self.receiver_rows(k)
        # P(u, v, y) = P(u, v) W_k(y | g(u, v))
        puvy = self.joint.table[:, :, None] * w[self.symbol_map]
        t = puvy.sum(axis=1) if k == 1 else puvy.sum(axis=0)
        return JointPmf(t / t.sum())


def marton_constraints(s: InputStructure) -> tuple[float, float, float]:
    """``(I(U;Y1), I(V;Y2), I(U;Y1) + I(V;Y2) - I(U;V))``."""
    i1 = mutual_information(s.aux_output_joint(1))
    i2 = mutual_information(s.aux_output_joint(2))
    iuv = mutual_information(s.joint)
    return i1, i2, i1 + i2 - iuv


def sum_rate(s: InputStructure) -> float:
    return marton_constraints(s)[2]


def corner_points(s: InputStructure) -> tuple[RatePair, RatePair]:
    i1, i2, _ = marton_constraints(s)
    iuv = mutual_information(s.joint)
    return RatePair(i1, i2 - iuv), RatePair(i1 - iuv, i2)


def tsa_rates(s: InputStructure, alpha: float) -> RatePair:
    """Rate pair reached with block offset fraction ``alpha = n1 / n``.

    ``alpha = 0`` encodes receiver 1 first everywhere (first corner point),
    ``alpha = 1`` encodes receiver 2 first everywhere (second corner point).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    i1, i2, _ = marton_constraints(s)
    iuv = mutual_information(s.joint)
    return RatePair(i1 - alpha * iuv, i2 - (1.0 - alpha) * iuv)


def tsa_line(s: InputStructure, alphas: Iterable[float]) -> list[tuple[float, RatePair]]:
    return [(float(a), tsa_rates(s, a)) for a in alphas]


def write_region_csv(path, samples: Iterable[tuple[float, RatePair]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "r1", "r2"])
        for a, rp in samples:
            w.writerow([repr(float(a)), repr(float(rp.r1)), repr(float(rp.r2))])


def read_region_csv(path) -> list[tuple[float, RatePair]]:
    with open(path, newline="") as fh:
        return [(float(r["alpha"]), RatePair(float(r["r1"]), float(r["r2"])))
                for r in csv.DictReader(fh)]


def grid_search(family: Callable[..., InputStructure], grid: Iterable) -> tuple[object, InputStructure, float]:
    """Maximise the Marton sum-rate bound over a parametrised structure family.

    ``family(params)`` builds a structure; ``grid`` yields parameter values.
    Returns ``(best_params, best_structure, best_sum_rate)``; structures the
    family rejects with ``ValueError`` are skipped.
    """
    best = None
    for params in grid:
        try:
            s = family(params)
        except ValueError:
            continue
        val = sum_rate(s)
        if best is None or val > best[2] + 1e-15:
            best = (params, s, val)
    if best is None:
        raise ValueError("no admissible structure in the grid")
    return best


def marginal_entropies(s: InputStructure) -> tuple[float, float]:
    return entropy(s.joint.marginal_x()), entropy(s.joint.marginal_y())
