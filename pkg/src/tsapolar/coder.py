"""Polar shaping / Gelfand-Pinsker encoder and SC / SCL decoders for one block.

A user's auxiliary sequence is written ``a^n`` (``u^n`` for receiver 1,
``v^n`` for receiver 2) and the other user's sequence ``b^n`` acts as state.
Side information lives on the augmented alphabet ``{0, .., |B|-1} + {BOT}``;
``BOT`` marks positions whose state is unknown when the block is encoded.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import kernels
from .polar import CodeSpec, PolarTransform, transform
from .prob import ConditionalPmf, JointPmf
from .regions import InputStructure

BOT = -1
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class SideInfo:
    """State string over ``B + {BOT}``; ``BOT`` (= -1) means unknown."""

    symbols: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.symbols, dtype=np.int64).copy()
        if s.ndim != 1:
            raise ValueError("side information must be one-dimensional")
        if np.any(s < BOT):
            raise ValueError("side symbols must be >= -1")
        s.setflags(write=False)
        object.__setattr__(self, "symbols", s)

    def __len__(self):
        return self.symbols.size

    @classmethod
    def unknown(cls, n: int) -> "SideInfo":
        return cls(np.full(n, BOT))

    @classmethod
    def masked(cls, values, mask) -> "SideInfo":
        """Known where ``mask`` is true, ``BOT`` elsewhere."""
        values = np.asarray(values)
        return cls(np.where(np.asarray(mask, dtype=bool), values, BOT))

    @property
    def known(self) -> np.ndarray:
        return self.symbols != BOT


def side_conditional(joint_ab: JointPmf) -> ConditionalPmf:
    """``P_{A|B'}`` with rows ``b = 0..|B|-1`` followed by the ``BOT`` row ``P_A``.

    State values of probability zero fall back to ``P_A`` as well.
    """
    t = joint_ab.table  # P(a, b)
    pa = t.sum(axis=1)
    pb = t.sum(axis=0)
    rows = []
    for b in range(t.shape[1]):
        rows.append(t[:, b] / pb[b] if pb[b] > 0 else pa)
    rows.append(pa)
    return ConditionalPmf(np.array(rows))


def user_joint(structure: InputStructure, user: int) -> JointPmf:
    """``P(a, b)`` for ``user`` 1 (``a = u``) or 2 (``a = v``)."""
    if user == 1:
        return structure.joint
    if user == 2:
        return structure.joint.swap()
    raise ValueError(f"user must be 1 or 2, got {user}")


@dataclass(frozen=True, eq=False)
class EncoderState:
    """Everything the encoder of one user needs for one block.

    ``conditional`` has ``|B| + 1`` rows; the last one is used for ``BOT``
    and must equal the marginal ``P_A``.
    """

    code: CodeSpec
    transform: PolarTransform
    conditional: ConditionalPmf
    shaping_seed: int = 0

    def __post_init__(self):
        if self.code.n != self.transform.n:
            raise ValueError("code and transform lengths differ")
        if self.conditional.output_size != 2:
            raise ValueError("the coded auxiliary must be binary")

    @classmethod
    def for_user(cls, structure: InputStructure, user: int, code: CodeSpec,
                 t: PolarTransform, shaping_seed: int = 0) -> "EncoderState":
        return cls(code, t, side_conditional(user_joint(structure, user)), shaping_seed)

    @property
    def prior(self) -> np.ndarray:
        return self.conditional.rows[-1]

    @property
    def n(self) -> int:
        return self.code.n


def _llr_from_probs(p0, p1):
    return np.log(np.maximum(p0, PROB_FLOOR)) - np.log(np.maximum(p1, PROB_FLOOR))


def state_llrs(side: SideInfo | np.ndarray, conditional: ConditionalPmf) -> np.ndarray:
    """Per-position ``ln P(a=0|b')/P(a=1|b')``; works on batches of side strings."""
    s = side.symbols if isinstance(side, SideInfo) else np.asarray(side)
    rows = conditional.rows
    nb = rows.shape[0] - 1
    if s.size and s.max() >= nb:
        raise ValueError("side symbol outside the state alphabet")
    idx = np.where(s == BOT, nb, s)
    lr = _llr_from_probs(rows[:, 0], rows[:, 1])
    return lr[idx]


def shaping_rng(seed: int, block_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(block_index)]))


def encode(msg, side: SideInfo, st: EncoderState, block_index: int = 0):
    """Encode one block.

    Data bits go to ``code.data_set`` in increasing index order, frozen bits
    are 0 and shaping bits are sampled from the SC posterior with a PRNG
    stream derived from ``(shaping_seed, block_index)``.

    Returns
    -------
    u : ndarray of uint8, the transmitted auxiliary sequence
    ubar : ndarray of uint8, its polar-domain representation
    """
    n = st.n
    msg = np.asarray(msg, dtype=np.uint8).ravel()
    if msg.size != st.code.k:
        raise ValueError(f"message has {msg.size} bits, code carries {st.code.k}")
    if len(side) != n:
        raise ValueError(f"side information has length {len(side)}, expected {n}")
    given = np.zeros(n, dtype=np.uint8)
    given[list(st.code.data_set)] = msg
    unif = shaping_rng(st.shaping_seed, block_index).random(n)
    chan = state_llrs(side, st.conditional)
    p = st.transform.perm
    ub_dec, _ = kernels.sc_encode(np.ascontiguousarray(chan[p]), np.ascontiguousarray(st.code.kinds[p]),
                                  np.ascontiguousarray(given[p]), np.ascontiguousarray(unif[p]))
    ubar = np.empty(n, dtype=np.uint8)
    ubar[p] = ub_dec
    return transform(ubar), ubar


# -- decoding --------------------------------------------------------------------

def effective_law(structure: InputStructure, user: int, smoothing: float = 0.0) -> ConditionalPmf:
    """Receiver law ``P(y_k | a)`` with the other auxiliary averaged out.

    ``P(y|a) = sum_b P(b|a) W_k(y | g(a, b))``, then mixed with the law of the
    flipped input: ``(1 - smoothing) P(y|a) + smoothing P(y|1-a)``.
    """
    if not 0.0 <= smoothing < 0.5:
        raise ValueError("smoothing must lie in [0, 0.5)")
    w = structure.receiver_rows(user)
    joint = user_joint(structure, user).table
    g = structure.symbol_map if user == 1 else structure.symbol_map.T  # g[a, b]
    pa = joint.sum(axis=1)
    rows = []
    for a in range(joint.shape[0]):
        pb = joint[a] / pa[a] if pa[a] > 0 else np.full(joint.shape[1], 1.0 / joint.shape[1])
        rows.append(pb @ w[g[a]])
    rows = np.array(rows)
    if rows.shape[0] != 2:
        raise ValueError("the coded auxiliary must be binary")
    rows = (1.0 - smoothing) * rows + smoothing * rows[::-1]
    return ConditionalPmf(rows / rows.sum(axis=1, keepdims=True))


def receiver_llrs(y, decoder_law: ConditionalPmf, prior) -> np.ndarray:
    """``ln P(a=0) W(y|0) / (P(a=1) W(y|1))`` per position (batched)."""
    y = np.asarray(y, dtype=np.int64)
    w = decoder_law.rows
    if y.size and (y.min() < 0 or y.max() >= w.shape[1]):
        raise ValueError("observation outside the output alphabet")
    lr = _llr_from_probs(prior[0] * w[0], prior[1] * w[1])
    return lr[y]


@dataclass
class DecodeResult:
    """Decoded data bits plus the winning path.

    ``path_metric`` is ``-log2 P(u_bar | y)`` under the decoder law and
    ``success_flag`` is false only when that metric is not finite.
    """

    message_bits: np.ndarray
    path_metric: float
    success_flag: bool
    ubar: np.ndarray


def _finish(ub_dec, pm, st: EncoderState) -> DecodeResult:
    ubar = np.empty(st.n, dtype=np.uint8)
    ubar[st.transform.perm] = ub_dec
    msg = ubar[list(st.code.data_set)].copy()
    return DecodeResult(msg, float(pm), bool(np.isfinite(pm)), ubar)


def _prepare(y, st: EncoderState, decoder_law: ConditionalPmf):
    y = np.asarray(y)
    if y.shape != (st.n,):
        raise ValueError(f"observation has shape {y.shape}, expected ({st.n},)")
    p = st.transform.perm
    chan = receiver_llrs(y, decoder_law, st.prior)
    return np.ascontiguousarray(chan[p]), np.ascontiguousarray(st.code.kinds[p])


def sc_decode(y, st: EncoderState, decoder_law: ConditionalPmf) -> DecodeResult:
    chan, kind = _prepare(y, st, decoder_law)
    ub, pm = kernels.sc_decode(chan, kind)
    return _finish(ub, pm, st)


def scl_decode(y, st: EncoderState, decoder_law: ConditionalPmf, list_size: int) -> DecodeResult:
    if list_size < 1:
        raise ValueError("list size must be at least 1")
    chan, kind = _prepare(y, st, decoder_law)
    ub, pm, _ = kernels.scl_decode(chan, kind, int(list_size))
    return _finish(ub, pm, st)


def path_likelihood_bits(ubar, y, st: EncoderState, decoder_law: ConditionalPmf) -> float:
    """``-log2 P(u_bar | y)`` recomputed through the codeword ``x = u_bar G``.

    The polar transform is a bijection, so the posterior of ``u_bar``
    factorises over the positions of ``x``.
    """
    x = transform(np.asarray(ubar, dtype=np.uint8)).astype(np.float64)
    llr = receiver_llrs(y, decoder_law, st.prior)
    z = -(1.0 - 2.0 * x) * llr
    return float(np.logaddexp(0.0, z).sum() / np.log(2.0))


def write_block_trace(path, y, st: EncoderState, decoder_law: ConditionalPmf, ubar=None) -> None:
    """Dump ``index, kind, p1, decision`` in decoding order.

    ``p1`` is the SC posterior of a one at each index given the decided prefix
    (the prefix of ``ubar`` if supplied, otherwise the SC decision).
    """
    if ubar is None:
        ubar = sc_decode(y, st, decoder_law).ubar
    p = st.transform.perm
    chan = receiver_llrs(y, decoder_law, st.prior)[p]
    leaf = kernels.genie_llrs(np.ascontiguousarray(chan[None, :]),
                              np.ascontiguousarray(np.asarray(ubar, dtype=np.uint8)[p][None, :]))[0]
    names = {kernels.FROZEN: "frozen", kernels.DATA: "data", kernels.SHAPING: "shaping"}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "kind", "p1", "decision"])
        for j, i in enumerate(p):
            w.writerow([int(i), names[int(st.code.kinds[i])], repr(float(1.0 / (1.0 + np.exp(leaf[j])))),
                        int(ubar[i])])
