"""Polar transform, genie-aided reliability profiling and code construction.

Index conventions
-----------------
All index sets and profiles are expressed in the *natural* index domain of
``x = u_bar G_n`` with ``G_n`` the ``log2(n)``-fold Kronecker power of
``[[1, 0], [1, 1]]``.  The stage order only changes the order in which an SC
decoder visits ``u_bar``; it is represented by ``PolarTransform.perm`` which
maps decoding position ``j`` to the natural index ``perm[j]``.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .prob import h2

WORKERS_ENV = "TSAPOLAR_WORKERS"
CHUNK = 1000


def _log2_exact(n: int) -> int:
    if n < 1 or n & (n - 1):
        raise ValueError(f"block length {n} is not a power of two")
    return n.bit_length() - 1


def worker_count() -> int:
    """Worker processes requested through ``TSAPOLAR_WORKERS`` (default 1)."""
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        w = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, w)


def map_ordered(fn, items, workers=None):
    """``list(map(fn, items))`` optionally spread over worker processes.

    Results always come back in input order, so any reduction done by the
    caller is independent of the worker count.
    """
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as ex:
        return list(ex.map(fn, items))


class PolarTransform:
    """Kronecker polar transform of length ``n`` with a chosen stage order.

    ``stage_order[s]`` is the index bit combined by the ``s``-th butterfly
    stage acting on ``x``.  Bit ``m - 1`` pairs ``(i, i + n/2)``, bit 0 pairs
    ``(i, i + 1)``.
    """

    def __init__(self, n: int, stage_order=None):
        self.m = _log2_exact(n)
        self.n = n
        if stage_order is None:
            stage_order = tuple(range(self.m - 1, -1, -1))
        stage_order = tuple(int(s) for s in stage_order)
        if sorted(stage_order) != list(range(self.m)):
            raise ValueError(f"stage order {stage_order} is not a permutation of 0..{self.m - 1}")
        self.stage_order = stage_order
        # decoding position j has bit (m-1-s) equal to natural-index bit stage_order[s]
        j = np.arange(n)
        perm = np.zeros(n, dtype=np.int64)
        for s, b in enumerate(stage_order):
            perm |= ((j >> (self.m - 1 - s)) & 1) << b
        self.perm = perm
        self.inv_perm = np.argsort(perm)

    @property
    def is_natural(self) -> bool:
        return bool(np.all(self.perm == np.arange(self.n)))

    def first_stage_pairs(self) -> list[tuple[int, int]]:
        """0-based index pairs combined by the first stage acting on ``x``."""
        if self.m == 0:
            return []
        step = 1 << self.stage_order[0]
        return [(i, i + step) for i in range(self.n) if not i & step]

    def __call__(self, bits):
        return transform(bits, self)

    def __repr__(self):
        return f"PolarTransform(n={self.n}, stage_order={self.stage_order})"


def stage_order_butterfly_first(n: int) -> PolarTransform:
    """Stage order whose first stage combines ``(i, i + n/2)``."""
    m = _log2_exact(n)
    return PolarTransform(n, tuple(range(m - 1, -1, -1)))


def stage_order_adjacent_first(n: int) -> PolarTransform:
    """Ablation order: first stage combines ``(i, i + 1)`` (bit-reversed decoding)."""
    m = _log2_exact(n)
    return PolarTransform(n, tuple(range(m)))


STAGE_ORDERS = {
    "butterfly-first": stage_order_butterfly_first,
    "adjacent-first": stage_order_adjacent_first,
}


def make_transform(n: int, name: str = "butterfly-first") -> PolarTransform:
    try:
        return STAGE_ORDERS[name](n)
    except KeyError:
        raise ValueError(f"unknown stage order {name!r}; choose from {sorted(STAGE_ORDERS)}") from None


def transform(bits, t: PolarTransform | None = None) -> np.ndarray:
    """``bits @ G_n`` over GF(2) along the last axis (batched)."""
    x = np.array(bits, dtype=np.uint8, copy=True)
    n = x.shape[-1]
    m = _log2_exact(n)
    if t is not None and t.n != n:
        raise ValueError(f"length {n} does not match transform length {t.n}")
    order = t.stage_order if t is not None else range(m - 1, -1, -1)
    lead = x.shape[:-1]
    for b in order:
        step = 1 << b
        v = x.reshape(lead + (n // (2 * step), 2, step))
        v[..., 0, :] ^= v[..., 1, :]
    return x


# -- profiling -----------------------------------------------------------------

@dataclass
class ReliabilityProfile:
    """Per-index genie-aided conditional entropies and Bhattacharyya values.

    ``h_state[i]`` estimates ``H(u_bar_i | u_bar^{i-1}, side info)`` and
    ``h_rx[i]`` estimates ``H(u_bar_i | u_bar^{i-1}, y^n)`` (natural indices).
    ``se_*`` are per-index standard errors; ``se_state_mean`` is the standard
    error of ``h_state.mean()`` computed from per-block totals.
    """

    n: int
    h_state: np.ndarray
    h_rx: np.ndarray
    z_state: np.ndarray
    z_rx: np.ndarray
    sample_count: int
    se_h_state: np.ndarray | None = None
    se_h_rx: np.ndarray | None = None
    se_z_state: np.ndarray | None = None
    se_z_rx: np.ndarray | None = None
    se_state_mean: float = float("nan")
    se_rx_mean: float = float("nan")

    def __post_init__(self):
        for name in ("h_state", "h_rx", "z_state", "z_rx"):
            a = np.asarray(getattr(self, name), dtype=np.float64)
            if a.shape != (self.n,):
                raise ValueError(f"{name} has shape {a.shape}, expected ({self.n},)")
            setattr(self, name, np.clip(a, 0.0, 1.0))

    def mean_state(self) -> float:
        return float(self.h_state.mean())

    def mean_rx(self) -> float:
        return float(self.h_rx.mean())


class Exhausted(RuntimeError):
    """Raised when a block source returns fewer blocks than requested."""


def _chunk_stats(args):
    source, perm, seed, chunk, count = args
    rng = np.random.default_rng(np.random.SeedSequence([seed, chunk]))
    drawn = source.draw(rng, count) if hasattr(source, "draw") else source(rng, count)
    state_llr, u, rx_llr = (np.asarray(a) for a in drawn)
    if u.shape[0] < count:
        raise Exhausted(f"source produced {u.shape[0]} of {count} requested blocks")
    u, state_llr, rx_llr = u[:count], state_llr[:count], rx_llr[:count]
    ubar = transform(u)
    out = []
    for llr in (state_llr, rx_llr):
        # decoding domain; leaf j belongs to natural index perm[j]
        leaf = kernels.genie_llrs(np.ascontiguousarray(llr[:, perm], dtype=np.float64),
                                  np.ascontiguousarray(ubar[:, perm]))
        p1 = 1.0 / (1.0 + np.exp(np.clip(leaf, -700, 700)))
        h = np.empty_like(leaf)
        h[:, perm] = h2(p1)
        z = np.empty_like(leaf)
        z[:, perm] = 2.0 * np.sqrt(p1 * (1.0 - p1))
        tot = h.mean(axis=1)
        out.append((h.sum(0), (h * h).sum(0), z.sum(0), (z * z).sum(0), tot.sum(), (tot * tot).sum()))
    return out


def _mean_se(s, s2, k):
    mean = s / k
    if k < 2:
        return mean, np.full_like(np.asarray(mean, dtype=float), np.nan)
    var = np.maximum(s2 / k - mean * mean, 0.0) * k / (k - 1)
    return mean, np.sqrt(var / k)


def estimate_profile(source, t: PolarTransform, samples: int, seed: int = 0,
                     workers: int | None = None, chunk: int = CHUNK) -> ReliabilityProfile:
    """Monte-Carlo genie-aided SC profile.

    Parameters
    ----------
    source : object with ``draw(rng, count)`` or a callable ``(rng, count)``
        Returns ``(state_llr, u, rx_llr)``, each of shape ``(count, n)``:
        the true bits ``u`` and per-position LLRs ``ln P(u=0|.)/P(u=1|.)``
        given the side information and given the receiver observation.
    t : PolarTransform
    samples : int
        Number of blocks.
    seed : int
        Chunk ``c`` uses ``SeedSequence([seed, c])`` so the estimate does not
        depend on ``workers``.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    n = t.n
    sizes = [min(chunk, samples - s) for s in range(0, samples, chunk)]
    jobs = [(source, t.perm, seed, c, k) for c, k in enumerate(sizes)]
    results = map_ordered(_chunk_stats, jobs, workers)
    acc = [[np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(n), 0.0, 0.0] for _ in range(2)]
    for res in results:
        for side in range(2):
            for j in range(6):
                acc[side][j] = acc[side][j] + res[side][j]
    k = samples
    fields_ = {}
    for side, tag in enumerate(("state", "rx")):
        hs, hs2, zs, zs2, ts, ts2 = acc[side]
        fields_[f"h_{tag}"], fields_[f"se_h_{tag}"] = _mean_se(hs, hs2, k)
        fields_[f"z_{tag}"], fields_[f"se_z_{tag}"] = _mean_se(zs, zs2, k)
        fields_[f"se_{tag}_mean"] = float(_mean_se(ts, ts2, k)[1])
    return ReliabilityProfile(n=n, sample_count=samples, **fields_)


def write_profile_csv(path, prof: ReliabilityProfile) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "h_state", "h_rx", "z_state", "z_rx"])
        for i in range(prof.n):
            w.writerow([i, repr(float(prof.h_state[i])), repr(float(prof.h_rx[i])),
                        repr(float(prof.z_state[i])), repr(float(prof.z_rx[i]))])


def read_profile_csv(path, sample_count: int = 0) -> ReliabilityProfile:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    idx = [int(r["index"]) for r in rows]
    if idx != list(range(len(rows))):
        raise ValueError("profile indices must be 0..n-1 in order")
    col = lambda k: np.array([float(r[k]) for r in rows])  # noqa: E731
    return ReliabilityProfile(len(rows), col("h_state"), col("h_rx"), col("z_state"),
                              col("z_rx"), sample_count)


# -- code construction -----------------------------------------------------------

class InfeasibleRate(ValueError):
    """Requested more data bits than there are receiver-reliable indices."""

    def __init__(self, requested: int, maximum: int):
        self.requested = requested
        self.maximum = maximum
        super().__init__(f"requested {requested} data bits but at most {maximum} indices are eligible")


@dataclass(frozen=True)
class CodeSpec:
    """Partition of ``[0, n)`` into data, shaping and frozen indices."""

    n: int
    data_set: tuple
    shaping_set: tuple
    frozen_set: tuple
    kinds: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        d, s, f = (tuple(sorted(int(i) for i in x)) for x in (self.data_set, self.shaping_set, self.frozen_set))
        if sorted(d + s + f) != list(range(self.n)):
            raise ValueError("index sets must partition 0..n-1")
        object.__setattr__(self, "data_set", d)
        object.__setattr__(self, "shaping_set", s)
        object.__setattr__(self, "frozen_set", f)
        kinds = np.full(self.n, kernels.FROZEN, dtype=np.int8)
        kinds[list(d)] = kernels.DATA
        kinds[list(s)] = kernels.SHAPING
        kinds.setflags(write=False)
        object.__setattr__(self, "kinds", kinds)

    @property
    def rate(self) -> float:
        return len(self.data_set) / self.n

    @property
    def k(self) -> int:
        return len(self.data_set)

    def to_dict(self) -> dict:
        return {"n": self.n, "data": list(self.data_set), "shaping": list(self.shaping_set),
                "frozen": list(self.frozen_set)}

    @classmethod
    def from_dict(cls, d: dict) -> "CodeSpec":
        return cls(int(d["n"]), d["data"], d["shaping"], d["frozen"])

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "CodeSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def build_code(profile: ReliabilityProfile, target_data_bits: int, rx_cutoff: float = 0.1,
               shaping_cutoff: float = 0.0) -> CodeSpec:
    """Rank-based construction with an exact data-bit count.

    Indices with ``h_rx <= rx_cutoff`` are eligible.  The ``target_data_bits``
    eligible indices with the largest ``h_state`` carry data (ties go to the
    lower index).  Remaining eligible indices with ``h_state >= shaping_cutoff``
    are shaping bits; everything else is frozen to zero.
    """
    n = profile.n
    if not 0 <= target_data_bits <= n:
        raise ValueError(f"target must lie in [0, {n}], got {target_data_bits}")
    eligible = np.flatnonzero(profile.h_rx <= rx_cutoff)
    if target_data_bits > eligible.size:
        raise InfeasibleRate(target_data_bits, int(eligible.size))
    order = np.lexsort((eligible, -profile.h_state[eligible]))
    data = eligible[order[:target_data_bits]]
    rest = eligible[order[target_data_bits:]]
    shaping = rest[profile.h_state[rest] >= shaping_cutoff]
    frozen = np.setdiff1d(np.arange(n), np.concatenate([data, shaping]))
    return CodeSpec(n, data.tolist(), shaping.tolist(), frozen.tolist())
