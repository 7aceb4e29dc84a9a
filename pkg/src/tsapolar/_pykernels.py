"""Pure numpy successive-cancellation kernels.

Same contracts as the compiled ``_ckernels`` module; used when the extension
is unavailable or ``TSAPOLAR_PURE_PYTHON`` is set. Block-level routines are
slow (Python-level recursion) but the batched genie pass vectorises across
blocks and is usable for profiling.
"""

from __future__ import annotations

import math

import numpy as np

FROZEN, DATA, SHAPING = 0, 1, 2
LN2 = math.log(2.0)


def f_op(a, b):
    small = np.minimum(np.abs(a), np.abs(b)) < 1.0
    s = np.minimum(np.abs(a), np.abs(b))
    s = np.where((a < 0) != (b < 0), -s, s)
    with np.errstate(over="ignore", divide="ignore"):
        cp = np.log1p(np.exp(-np.abs(a + b)))
        cm = np.log1p(np.exp(-np.abs(a - b)))
        near = 2.0 * np.arctanh(np.tanh(0.5 * a) * np.tanh(0.5 * b))
    return np.where(small, near, s + cp - cm)


def g_op(a, b, bits):
    return np.where(bits.astype(bool), b - a, b + a)


def softplus(x: float) -> float:
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def _check_n(n: int) -> None:
    if n < 1 or n & (n - 1):
        raise ValueError(f"block length {n} is not a power of two")


def _genie_rec(llr, ubar, out):
    s = llr.shape[-1]
    if s == 1:
        out[...] = llr
        return ubar.copy()
    h = s // 2
    a, b = llr[..., :h], llr[..., h:]
    xl = _genie_rec(f_op(a, b), ubar[..., :h], out[..., :h])
    xr = _genie_rec(g_op(a, b, xl), ubar[..., h:], out[..., h:])
    return np.concatenate([xl ^ xr, xr], axis=-1)


def genie_llrs(chan, ubar):
    chan = np.ascontiguousarray(chan, dtype=np.float64)
    ubar = np.ascontiguousarray(ubar, dtype=np.uint8)
    if chan.shape != ubar.shape:
        raise ValueError("shape mismatch between llrs and bits")
    _check_n(chan.shape[-1])
    out = np.empty_like(chan)
    _genie_rec(chan, ubar, out)
    return out


def _sc_rec(llr, decide, state):
    s = llr.shape[0]
    if s == 1:
        return np.array([decide(state, float(llr[0]))], dtype=np.uint8)
    h = s // 2
    a, b = llr[:h], llr[h:]
    xl = _sc_rec(f_op(a, b), decide, state)
    xr = _sc_rec(g_op(a, b, xl), decide, state)
    return np.concatenate([xl ^ xr, xr])


def sc_encode(chan, kind, given, unif):
    chan = np.asarray(chan, dtype=np.float64)
    _check_n(chan.size)
    ubar = np.empty(chan.size, dtype=np.uint8)
    leaf = np.empty(chan.size)

    def decide(st, l):
        phi = st["phi"]
        leaf[phi] = l
        k = kind[phi]
        if k == FROZEN:
            d = 0
        elif k == DATA:
            d = int(given[phi])
        else:
            d = 1 if unif[phi] < 1.0 / (1.0 + math.exp(l)) else 0
        ubar[phi] = d
        st["phi"] = phi + 1
        return d

    _sc_rec(chan, decide, {"phi": 0})
    return ubar, leaf


def sc_decode(chan, kind):
    chan = np.asarray(chan, dtype=np.float64)
    _check_n(chan.size)
    ubar = np.empty(chan.size, dtype=np.uint8)

    def decide(st, l):
        phi = st["phi"]
        d = 0 if kind[phi] == FROZEN else (1 if l < 0 else 0)
        st["pm"] += softplus(l if d else -l)
        ubar[phi] = d
        st["phi"] = phi + 1
        return d

    st = {"phi": 0, "pm": 0.0}
    _sc_rec(chan, decide, st)
    return ubar, st["pm"] / LN2


class _Path:
    """One list entry: per-depth LLR and partial-sum arrays (copied on clone)."""

    __slots__ = ("llr", "bits", "u", "pm")

    def __init__(self, n, m):
        self.llr = [None] + [np.zeros(n >> lam) for lam in range(1, m + 1)]
        self.bits = [np.zeros(n >> lam, dtype=np.uint8) for lam in range(m + 1)]
        self.u = np.zeros(n, dtype=np.uint8)
        self.pm = 0.0

    def copy(self):
        p = _Path.__new__(_Path)
        p.llr = [None] + [a.copy() for a in self.llr[1:]]
        p.bits = [a.copy() for a in self.bits]
        p.u = self.u.copy()
        p.pm = self.pm
        return p


def _leaf_llr(path, phi, m, chan):
    lam0 = 1 if phi == 0 else m - ((phi & -phi).bit_length() - 1)
    for lam in range(lam0, m + 1):
        src = chan if lam == 1 else path.llr[lam - 1]
        s = src.size // 2
        if lam == lam0 and phi != 0:
            path.llr[lam] = g_op(src[:s], src[s:], path.bits[lam - 1][:s])
        else:
            path.llr[lam] = f_op(src[:s], src[s:])
    return float(path.llr[m][0])


def _push_bit(path, phi, m, d):
    lam = m - 1
    if phi & 1 == 0:
        path.bits[lam][0] = d
        return
    path.bits[lam][0] ^= d
    path.bits[lam][1] = d
    while lam > 0:
        node = path.bits[lam]
        s = node.size
        parent = path.bits[lam - 1]
        if (phi >> (m - lam)) & 1 == 0:
            parent[:s] = node
            return
        parent[:s] ^= node
        parent[s:] = node
        lam -= 1


def scl_decode(chan, kind, list_size):
    if list_size < 1:
        raise ValueError("list size must be at least 1")
    chan = np.asarray(chan, dtype=np.float64)
    n = chan.size
    _check_n(n)
    if n == 1:
        u, pm = sc_decode(chan, kind)
        return u, pm, np.array([pm])
    m = n.bit_length() - 1
    L = list_size
    paths: list = [None] * L
    paths[0] = _Path(n, m)
    inactive = list(range(L - 1, 0, -1))
    for phi in range(n):
        leaf = {p: _leaf_llr(paths[p], phi, m, chan) for p in range(L) if paths[p] is not None}
        if kind[phi] == FROZEN:
            for p, l in leaf.items():
                paths[p].pm += softplus(-l)
                paths[p].u[phi] = 0
                _push_bit(paths[p], phi, m, 0)
            continue
        cands = []
        for p, l in leaf.items():
            hard = 1 if l < 0 else 0
            for bit, inc in ((0, softplus(-l)), (1, softplus(l))):
                cands.append((paths[p].pm + inc, p, bit != hard, bit))
        cands.sort()
        keep = {p: [False, False] for p in leaf}
        for _, p, _, bit in cands[:L]:
            keep[p][bit] = True
        for p in sorted(leaf):
            if not any(keep[p]):
                paths[p] = None
                inactive.append(p)
        for p in sorted(leaf):
            if all(keep[p]):
                q = inactive.pop()
                paths[q] = paths[p].copy()
                paths[q].pm += softplus(leaf[p])
                paths[q].u[phi] = 1
                _push_bit(paths[q], phi, m, 1)
                paths[p].pm += softplus(-leaf[p])
                paths[p].u[phi] = 0
                _push_bit(paths[p], phi, m, 0)
            elif keep[p][0] or keep[p][1]:
                bit = 1 if keep[p][1] else 0
                paths[p].pm += softplus(leaf[p] if bit else -leaf[p])
                paths[p].u[phi] = bit
                _push_bit(paths[p], phi, m, bit)
    best = None
    for p in range(L):
        if paths[p] is not None and (best is None or paths[p].pm < paths[best].pm):
            best = p
    finals = np.array([paths[p].pm / LN2 for p in range(L) if paths[p] is not None])
    return paths[best].u.copy(), paths[best].pm / LN2, finals
