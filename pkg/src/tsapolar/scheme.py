"""Time-shifted alternating (TSA) block scheduling, stream coding and the
time-sharing baseline.

Channel-use layout for ``B`` blocks of length ``n`` with offset ``n1``::

    u blocks:  [0, n)        [n, 2n)       ...  [(B-1)n, Bn)
    v blocks:      [n1, n+n1)    [n+n1, 2n+n1) ...        [(B-1)n+n1, Bn+n1)

``v`` on ``[0, n1)`` is an all-zero bootstrap segment known to everybody and
``u`` on ``[Bn, Bn+n1)`` is an all-zero tail.  The ``u`` block ``b`` knows
its first ``n1`` states (the tail of ``v`` block ``b-1``); the ``v`` block
``b`` knows its first ``n2 = n - n1`` states (the tail of ``u`` block ``b``).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .coder import (BOT, DecodeResult, EncoderState, SideInfo, encode, receiver_llrs,
                    scl_decode, side_conditional, effective_law, state_llrs, user_joint)
from .polar import PolarTransform, ReliabilityProfile, estimate_profile
from .regions import InputStructure

INTERLEAVERS = ("identity", "random")
_INTERLEAVER_TAG = 0x1E7


@dataclass(frozen=True)
class TsaSchedule:
    n: int
    n1: int
    num_blocks: int
    interleaver: str = "identity"
    interleaver_seed: int = 0

    def __post_init__(self):
        if not 0 <= self.n1 <= self.n:
            raise ValueError(f"offset n1={self.n1} must lie in [0, n={self.n}]")
        if self.num_blocks < 0:
            raise ValueError("num_blocks must be nonnegative")
        if self.interleaver not in INTERLEAVERS:
            raise ValueError(f"interleaver must be one of {INTERLEAVERS}")

    @property
    def n2(self) -> int:
        return self.n - self.n1

    @property
    def alpha(self) -> float:
        return self.n1 / self.n

    @property
    def length(self) -> int:
        """Channel uses spanned by the whole stream."""
        return self.num_blocks * self.n + self.n1


@dataclass(frozen=True)
class BlockLayout:
    """One user block: channel range ``[start, start + n)``.

    ``perm[i]`` is the channel offset of codeword position ``i`` and
    ``mask[i]`` says whether the state at codeword position ``i`` is known
    when the block is encoded.
    """

    user: int
    block: int
    start: int
    perm: np.ndarray = field(repr=False)
    mask: np.ndarray = field(repr=False)

    @property
    def positions(self) -> np.ndarray:
        return self.start + self.perm


@dataclass(frozen=True)
class FrameLayout:
    schedule: TsaSchedule
    u_blocks: tuple
    v_blocks: tuple

    def blocks(self, user: int) -> tuple:
        return self.u_blocks if user == 1 else self.v_blocks

    def known_count(self, user: int) -> int:
        return self.schedule.n1 if user == 1 else self.schedule.n2


def _interleaver(s: TsaSchedule, user: int, block: int) -> np.ndarray:
    if s.interleaver == "identity":
        return np.arange(s.n)
    ss = np.random.SeedSequence([_INTERLEAVER_TAG, s.interleaver_seed, user, block])
    return np.random.default_rng(ss).permutation(s.n)


def build_layout(s: TsaSchedule) -> FrameLayout:
    ub, vb = [], []
    for b in range(s.num_blocks):
        p = _interleaver(s, 1, b)
        ub.append(BlockLayout(1, b, b * s.n, p, p < s.n1))
        p = _interleaver(s, 2, b)
        vb.append(BlockLayout(2, b, b * s.n + s.n1, p, p < s.n2))
    return FrameLayout(s, tuple(ub), tuple(vb))


def write_layout_csv(path, layout: FrameLayout) -> None:
    """One row per (user, block, codeword position)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["user", "block", "index", "channel_pos", "state_known"])
        for user in (1, 2):
            for bl in layout.blocks(user):
                for i in range(bl.perm.size):
                    w.writerow([user, bl.block, i, int(bl.start + bl.perm[i]), int(bl.mask[i])])


# -- stream encoding ---------------------------------------------------------------

@dataclass
class StreamSignal:
    """Channel-indexed auxiliary sequences and channel input of one stream."""

    u: np.ndarray
    v: np.ndarray
    x: np.ndarray
    infeasible: int

    @property
    def infeasible_fraction(self) -> float:
        return self.infeasible / max(1, self.x.size)


def _signal(u, v, model: InputStructure) -> StreamSignal:
    x = model.symbol_map[u, v]
    infeasible = int((model.joint.table[u, v] == 0).sum())
    return StreamSignal(u, v, x.astype(np.int8), infeasible)


def encode_stream(messages, layout: FrameLayout, coders, model: InputStructure) -> StreamSignal:
    """Alternating GP encoding of a whole stream.

    ``messages = (m1, m2)`` with one row of data bits per block and
    ``coders = (state_u, state_v)``.  Block ``b`` of each user uses shaping
    stream index ``b``.
    """
    s = layout.schedule
    m1, m2 = (np.asarray(m, dtype=np.uint8).reshape(s.num_blocks, -1) for m in messages)
    st_u, st_v = coders
    for st in coders:
        if st.n != s.n:
            raise ValueError("coder block length does not match the schedule")
    if m1.shape[1] != st_u.code.k or m2.shape[1] != st_v.code.k:
        raise ValueError("message lengths do not match the data sets")
    u = np.zeros(s.length, dtype=np.int64)
    v = np.zeros(s.length, dtype=np.int64)  # [0, n1) is the bootstrap segment
    for b in range(s.num_blocks):
        bl = layout.u_blocks[b]
        pos = bl.positions
        cw, _ = encode(m1[b], SideInfo.masked(v[pos], bl.mask), st_u, b)
        u[pos] = cw
        bl = layout.v_blocks[b]
        pos = bl.positions
        cw, _ = encode(m2[b], SideInfo.masked(u[pos], bl.mask), st_v, b)
        v[pos] = cw
    return _signal(u, v, model)


@dataclass
class StreamResult:
    """Per-block decoding outcomes of one stream.

    ``errors_u[b]`` / ``errors_v[b]`` flag any data-bit error in block ``b``
    and a frame error is the OR of the two.
    """

    results_u: list
    results_v: list
    errors_u: np.ndarray
    errors_v: np.ndarray
    infeasible: int = 0
    channel_uses: int = 0

    @property
    def frames(self) -> int:
        return int(self.errors_u.size)

    @property
    def frame_errors(self) -> np.ndarray:
        return self.errors_u | self.errors_v

    @property
    def error_count(self) -> int:
        return int(self.frame_errors.sum())


def _block_errors(results, messages) -> np.ndarray:
    if messages is None:
        return np.zeros(len(results), dtype=bool)
    return np.array([not np.array_equal(r.message_bits, np.asarray(m, dtype=np.uint8))
                     for r, m in zip(results, messages)], dtype=bool)


def decode_stream(y, layout: FrameLayout, coders, decoder_laws, list_size: int = 1,
                  messages=None) -> StreamResult:
    """Decode every block of both users independently.

    ``y = (y1, y2)`` are the channel-indexed observations; ``messages``
    (optional, same shape as for :func:`encode_stream`) enables error counting.
    """
    s = layout.schedule
    out = []
    for user in (1, 2):
        yk = np.asarray(y[user - 1])
        if yk.size < s.length:
            raise ValueError(f"observation {user} is shorter than the stream")
        res = [scl_decode(yk[bl.positions], coders[user - 1], decoder_laws[user - 1], list_size)
               for bl in layout.blocks(user)]
        out.append(res)
    mu, mv = (None, None) if messages is None else messages
    return StreamResult(out[0], out[1], _block_errors(out[0], mu), _block_errors(out[1], mv),
                        channel_uses=s.length)


# -- corner points and time-sharing -------------------------------------------------

def encode_corner_block(order: int, m1, m2, coders, model: InputStructure,
                        block_ids=(0, 0)) -> StreamSignal:
    """One block of plain corner-point GP coding.

    ``order = 1`` encodes ``u`` without side information and then ``v`` with
    ``u`` fully known; ``order = 2`` swaps the roles.  ``block_ids`` are the
    shaping stream indices of the ``u`` and the ``v`` block.
    """
    st_u, st_v = coders
    n = st_u.n
    if order == 1:
        u, _ = encode(m1, SideInfo.unknown(n), st_u, block_ids[0])
        v, _ = encode(m2, SideInfo(u), st_v, block_ids[1])
    elif order == 2:
        v, _ = encode(m2, SideInfo.unknown(n), st_v, block_ids[1])
        u, _ = encode(m1, SideInfo(v), st_u, block_ids[0])
    else:
        raise ValueError("corner order must be 1 or 2")
    return _signal(u.astype(np.int64), v.astype(np.int64), model)


def corner_pattern(num_blocks: int, alpha: float) -> np.ndarray:
    """Evenly spread block orders: ``alpha * num_blocks`` blocks use order 2."""
    count = alpha * num_blocks
    c = int(round(count))
    if abs(count - c) > 1e-9:
        raise ValueError(f"alpha * num_blocks = {count} is not an integer")
    t = np.arange(num_blocks)
    second = ((t + 1) * c) // max(num_blocks, 1) - (t * c) // max(num_blocks, 1)
    return np.where(second == 1, 2, 1)


def time_sharing_stream(messages, n: int, alpha: float, corner_coders, model: InputStructure,
                        decoder_laws=None, list_size: int = 1, rng=None) -> StreamResult:
    """Alternate whole corner-1 and corner-2 blocks in proportion ``1-alpha : alpha``.

    ``messages`` is a list of ``(m1, m2)`` pairs, one per block, sized for
    the corner order the block uses; ``corner_coders = (coders_1, coders_2)``
    holds a ``(state_u, state_v)`` pair per order.  Decoding is skipped when
    ``decoder_laws`` is None.
    """
    orders = corner_pattern(len(messages), alpha)
    res_u, res_v, err_u, err_v, infeasible = [], [], [], [], 0
    for t, ((m1, m2), order) in enumerate(zip(messages, orders)):
        coders = corner_coders[order - 1]
        if coders[0].n != n:
            raise ValueError("corner coder block length differs from n")
        sig = encode_corner_block(int(order), m1, m2, coders, model, (t, t))
        infeasible += sig.infeasible
        if decoder_laws is None:
            continue
        y1, y2 = model.channel.transmit(sig.x, rng)
        ru = scl_decode(y1, coders[0], decoder_laws[0], list_size)
        rv = scl_decode(y2, coders[1], decoder_laws[1], list_size)
        res_u.append(ru)
        res_v.append(rv)
        err_u.append(not np.array_equal(ru.message_bits, np.asarray(m1, dtype=np.uint8)))
        err_v.append(not np.array_equal(rv.message_bits, np.asarray(m2, dtype=np.uint8)))
    return StreamResult(res_u, res_v, np.array(err_u, dtype=bool), np.array(err_v, dtype=bool),
                        infeasible, len(messages) * n)


def tsa_stream(messages, layout: FrameLayout, coders, model: InputStructure, decoder_laws,
               list_size: int = 1, rng=None) -> StreamResult:
    """Encode, transmit and decode one TSA stream."""
    sig = encode_stream(messages, layout, coders, model)
    y = model.channel.transmit(sig.x, rng)
    res = decode_stream(y, layout, coders, decoder_laws, list_size, messages)
    res.infeasible = sig.infeasible
    return res


# -- profiling sources ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SchemeSource:
    """Samples ``(state_llr, a^n, rx_llr)`` blocks from one user's coding law.

    ``known`` is either a boolean mask of length ``n`` (deterministic
    state-known positions) or a float ``alpha`` meaning every position is
    known independently with probability ``alpha``.  The receiver LLRs use
    the ideal (unsmoothed) effective law.
    """

    structure: InputStructure
    user: int
    n: int
    known: object

    def draw(self, rng: np.random.Generator, count: int):
        joint = user_joint(self.structure, self.user)
        na, nb = joint.sizes
        flat = rng.choice(na * nb, size=(count, self.n), p=joint.table.ravel())
        a, b = flat // nb, flat % nb
        if isinstance(self.known, (float, int)) and not isinstance(self.known, bool):
            mask = rng.random((count, self.n)) < float(self.known)
        else:
            mask = np.broadcast_to(np.asarray(self.known, dtype=bool), (count, self.n))
        side = np.where(mask, b, BOT)
        cond = side_conditional(joint)
        s_llr = state_llrs(side, cond)
        u, v = (a, b) if self.user == 1 else (b, a)
        x = self.structure.symbol_map[u, v]
        y = self.structure.channel.transmit(x, rng)[self.user - 1]
        law = effective_law(self.structure, self.user, 0.0)
        r_llr = receiver_llrs(y, law, cond.rows[-1])
        return s_llr, a.astype(np.uint8), r_llr


def known_mask(n: int, known: int) -> np.ndarray:
    m = np.zeros(n, dtype=bool)
    m[:known] = True
    return m


def profile_user(structure: InputStructure, user: int, t: PolarTransform, known: int,
                 samples: int, seed: int = 0, interleaver: str = "identity",
                 workers=None) -> ReliabilityProfile:
    """Profile a user whose first ``known`` states are known.

    With the random interleaver the known positions are modelled as i.i.d.
    ``Ber(known / n)``.
    """
    if interleaver == "identity":
        spec = known_mask(t.n, known)
    elif interleaver == "random":
        spec = known / t.n
    else:
        raise ValueError(f"interleaver must be one of {INTERLEAVERS}")
    return estimate_profile(SchemeSource(structure, user, t.n, spec), t, samples, seed, workers)


def tsa_known_counts(n: int, n1: int) -> tuple[int, int]:
    """State-known prefix lengths of the u and the v block."""
    return n1, n - n1


def corner_known_counts(n: int, order: int) -> tuple[int, int]:
    return (0, n) if order == 1 else (n, 0)
