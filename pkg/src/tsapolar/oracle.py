"""Brute-force random-coding TSA experiment for tiny block lengths.

Used as a test oracle only: i.i.d. codebooks, joint-typicality encoding of
the bin index and joint-typicality decoding, evaluated for one pair of
overlapping blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .prob import mutual_information
from .regions import InputStructure

MAX_N = 12


def typical_rows(a, b, pab: np.ndarray, eps: float) -> np.ndarray:
    """Row-wise joint typicality of ``(a[k], b)`` with respect to ``pab``.

    ``a`` has shape ``(K, m)`` and ``b`` has shape ``(m,)``.  Uses the
    multiplicative rule ``|N(s)/m - P(s)| <= eps P(s)``, so a pair of zero
    probability is never typical.  Empty strings are vacuously typical.
    """
    a = np.atleast_2d(a)
    m = a.shape[1]
    if m == 0:
        return np.ones(a.shape[0], dtype=bool)
    nb = pab.shape[1]
    sym = a * nb + np.asarray(b)[None, :]
    counts = np.zeros((a.shape[0], pab.size))
    np.add.at(counts, (np.arange(a.shape[0])[:, None], sym), 1.0)
    p = pab.ravel()
    return np.all(np.abs(counts / m - p) <= eps * p + 1e-15, axis=1)


@dataclass
class OracleResult:
    n: int
    trials: int
    errors: int
    sizes: tuple
    bin_rates: tuple

    @property
    def error_rate(self) -> float:
        return self.errors / self.trials if self.trials else 0.0


def default_bin_rates(model: InputStructure, rates, alpha: float) -> tuple[float, float]:
    """Midpoints between ``I(U;V)`` and the largest bin rate the decoder tolerates."""
    iuv = mutual_information(model.joint)
    i1 = mutual_information(model.aux_output_joint(1))
    i2 = mutual_information(model.aux_output_joint(2))
    out = []
    for cap, r, frac in ((i1, rates[0], alpha), (i2, rates[1], 1.0 - alpha)):
        hi = (cap - r) / frac if frac > 0 else iuv
        out.append(0.5 * (iuv + max(hi, iuv)))
    return tuple(out)


def typicality_oracle(model: InputStructure, n: int, rates, trials: int, eps: float = 0.3,
                      alpha: float = 0.5, seed: int = 0, bin_rates=None) -> OracleResult:
    """Empirical error rate of one TSA block pair under random coding.

    Each trial draws fresh codebooks and messages.  A trial fails when either
    receiver does not single out its true message.
    """
    if n > MAX_N:
        raise ValueError(f"n={n} is too large for enumeration (max {MAX_N})")
    if n < 1 or trials < 0:
        raise ValueError("need n >= 1 and trials >= 0")
    n1 = int(round(alpha * n))
    n2 = n - n1
    r1, r2 = rates
    if bin_rates is None:
        bin_rates = default_bin_rates(model, rates, n1 / n)
    b1, b2 = bin_rates
    M1, M2 = max(1, int(round(2 ** (n * r1)))), max(1, int(round(2 ** (n * r2))))
    L1, L2 = max(1, int(round(2 ** (n1 * b1)))), max(1, int(round(2 ** (n2 * b2))))
    puv = model.joint.table
    pu, pv = puv.sum(axis=1), puv.sum(axis=0)
    puy = model.aux_output_joint(1).table
    pvy = model.aux_output_joint(2).table
    g = model.symbol_map
    rng = np.random.default_rng(seed)
    errors = 0

    def gp_index(book, other, joint_first_is_u):
        # first bin index whose codeword is jointly typical with the state
        if joint_first_is_u:
            ok = typical_rows(book, other, puv, eps)
        else:
            ok = typical_rows(book, other, puv.T, eps)
        hit = np.flatnonzero(ok)
        return int(hit[0]) if hit.size else 0

    for _ in range(trials):
        cu_gp = rng.choice(2, size=(M1, L1, n1), p=pu)
        cu_pl = rng.choice(2, size=(M1, n2), p=pu)
        cv_gp = rng.choice(2, size=(M2, L2, n2), p=pv)
        cv_pl = rng.choice(2, size=(M2, n1), p=pv)
        m2_prev, m2 = rng.integers(M2, size=2)
        m1, m1_next = rng.integers(M1, size=2)
        v_prev = cv_pl[m2_prev]
        u_gp = cu_gp[m1, gp_index(cu_gp[m1], v_prev, True)]
        u_pl = cu_pl[m1]
        v_gp = cv_gp[m2, gp_index(cv_gp[m2], u_pl, False)]
        v_pl = cv_pl[m2]
        u_next = cu_gp[m1_next, gp_index(cu_gp[m1_next], v_pl, True)]
        # channel inputs over [u_gp | u_pl/v_gp | v_pl]
        x = np.concatenate([g[u_gp, v_prev], g[u_pl, v_gp], g[u_next, v_pl]])
        y1, y2 = model.channel.transmit(x, rng)
        y1 = np.asarray(y1)[:n]
        y2 = np.asarray(y2)[n1:]
        # receiver 1: (m, l) with both parts typical
        ok_gp = typical_rows(cu_gp.reshape(M1 * L1, n1), y1[:n1], puy, eps).reshape(M1, L1).any(axis=1)
        ok_pl = typical_rows(cu_pl, y1[n1:], puy, eps)
        cand1 = np.flatnonzero(ok_gp & ok_pl)
        ok_gp = typical_rows(cv_gp.reshape(M2 * L2, n2), y2[:n2], pvy, eps).reshape(M2, L2).any(axis=1)
        ok_pl = typical_rows(cv_pl, y2[n2:], pvy, eps)
        cand2 = np.flatnonzero(ok_gp & ok_pl)
        # a receiver with a single-message codebook has nothing to decide
        ok1 = M1 == 1 or (cand1.size == 1 and cand1[0] == m1)
        ok2 = M2 == 1 or (cand2.size == 1 and cand2[0] == m2)
        good = ok1 and ok2
        errors += not good
    return OracleResult(n, trials, errors, (M1, L1, M2, L2), (b1, b2))
