# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled successive-cancellation kernels.

All routines work in the decoding domain: the caller has already permuted
per-position inputs so that the outermost butterfly pairs ``(j, j + n/2)``.
LLRs are natural-log ratios ``log P(0) / P(1)``; path metrics are returned in
bits.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport atanh, exp, fabs, fmin, log, log1p, tanh, M_LN2
from libc.stdlib cimport calloc, free
from libc.string cimport memcpy

cnp.import_array()

cdef enum:
    FROZEN = 0
    DATA = 1
    SHAPING = 2

cdef double SAT = 37.0

cdef enum:
    MODE_GENIE = 0
    MODE_ENCODE = 1
    MODE_DECODE = 2


cdef inline double f_op(double a, double b) noexcept nogil:
    # exact boxplus: tanh form near zero (no cancellation), log form elsewhere;
    # log-form correction terms below 1e-16 are dropped
    cdef double s = fmin(fabs(a), fabs(b))
    cdef double xp, xm
    if s < 1.0:
        return 2.0 * atanh(tanh(0.5 * a) * tanh(0.5 * b))
    xp = fabs(a + b)
    xm = fabs(a - b)
    if (a < 0) != (b < 0):
        s = -s
    if xp > SAT and xm > SAT:
        return s
    if xp > SAT:
        return s - log1p(exp(-xm))
    if xm > SAT:
        return s + log1p(exp(-xp))
    return s + log((1.0 + exp(-xp)) / (1.0 + exp(-xm)))


cdef inline double softplus(double x) noexcept nogil:
    # log(1 + e^x)
    if x > 0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


cdef inline int ctz(int x) noexcept nogil:
    cdef int c = 0
    while (x & 1) == 0:
        x >>= 1
        c += 1
    return c


cdef int log2_exact(int n) except -1:
    cdef int m = 0
    if n < 1 or (n & (n - 1)) != 0:
        raise ValueError(f"block length {n} is not a power of two")
    while (1 << m) < n:
        m += 1
    return m


cdef double sc_pass(int n, int m, const double* chan, double* llr, unsigned char* bits,
                    int* off, int mode, const signed char* kind,
                    const unsigned char* given, const double* unif,
                    unsigned char* ubar, double* leaf_llr) noexcept nogil:
    """One successive-cancellation sweep; returns the path metric in nats."""
    cdef int phi, lam, lam0, s, j, half, child
    cdef double* src
    cdef double* dst
    cdef unsigned char* cb
    cdef unsigned char d
    cdef double l, pm = 0.0, p1
    cdef unsigned char* cdst
    cdef unsigned char* csrc
    for phi in range(n):
        # llr update: depth lam0 is a right child (g), deeper depths are left (f)
        if phi == 0:
            lam0 = 1
        else:
            lam0 = m - ctz(phi)
        for lam in range(lam0, m + 1):
            s = n >> lam
            if lam == 1:
                src = <double*> chan
            else:
                src = llr + off[lam - 1]
            dst = llr + off[lam]
            if lam == lam0 and phi != 0:
                cb = bits + off[lam - 1]
                for j in range(s):
                    if cb[j]:
                        dst[j] = src[j + s] - src[j]
                    else:
                        dst[j] = src[j + s] + src[j]
            else:
                for j in range(s):
                    dst[j] = f_op(src[j], src[j + s])
        l = llr[off[m]]
        leaf_llr[phi] = l
        if mode == MODE_GENIE:
            d = given[phi]
        elif mode == MODE_ENCODE:
            if kind[phi] == FROZEN:
                d = 0
            elif kind[phi] == DATA:
                d = given[phi]
            else:
                p1 = 1.0 / (1.0 + exp(l))
                d = 1 if unif[phi] < p1 else 0
        else:
            if kind[phi] == FROZEN:
                d = 0
            else:
                d = 1 if l < 0 else 0
            pm += softplus(l if d else -l)
        ubar[phi] = d
        # partial-sum propagation
        lam = m - 1
        child = phi & 1
        if child == 0:
            bits[off[lam]] = d
            continue
        cdst = bits + off[lam]
        cdst[0] ^= d
        cdst[1] = d
        while lam > 0:
            s = n >> lam
            child = (phi >> (m - lam)) & 1
            csrc = bits + off[lam]
            cdst = bits + off[lam - 1]
            if child == 0:
                memcpy(cdst, csrc, s)
                break
            for j in range(s):
                cdst[j] ^= csrc[j]
            memcpy(cdst + s, csrc, s)
            lam -= 1
    return pm


cdef void make_offsets(int n, int m, int* off) noexcept nogil:
    cdef int lam
    off[0] = 0
    for lam in range(1, m + 1):
        off[lam] = off[lam - 1] + (n >> (lam - 1))


def genie_llrs(const double[:, ::1] chan not None, const unsigned char[:, ::1] ubar not None):
    """Posterior LLR of every bit given the true prefix, for a batch of blocks."""
    cdef Py_ssize_t nb = chan.shape[0]
    cdef int n = chan.shape[1]
    cdef int m = log2_exact(n)
    if ubar.shape[0] != nb or ubar.shape[1] != n:
        raise ValueError("shape mismatch between llrs and bits")
    out = np.empty((nb, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double[::1] llr = np.empty(2 * n, dtype=np.float64)
    cdef unsigned char[::1] bits = np.zeros(2 * n, dtype=np.uint8)
    cdef unsigned char[::1] dec = np.empty(n, dtype=np.uint8)
    cdef int[::1] off = np.empty(m + 1, dtype=np.int32)
    cdef Py_ssize_t b
    make_offsets(n, m, &off[0])
    if n == 1:
        out[:, 0] = np.asarray(chan)[:, 0]
        return out
    with nogil:
        for b in range(nb):
            sc_pass(n, m, &chan[b, 0], &llr[0], &bits[0], &off[0], MODE_GENIE,
                    NULL, &ubar[b, 0], NULL, &dec[0], &o[b, 0])
    return out


def sc_encode(const double[::1] chan not None, const signed char[::1] kind not None,
              const unsigned char[::1] given not None, const double[::1] unif not None):
    """SC shaping encoder; returns (ubar, leaf_llrs)."""
    cdef int n = chan.shape[0]
    cdef int m = log2_exact(n)
    out = np.empty(n, dtype=np.uint8)
    leaf = np.empty(n, dtype=np.float64)
    cdef unsigned char[::1] o = out
    cdef double[::1] lf = leaf
    cdef double[::1] llr = np.empty(2 * n, dtype=np.float64)
    cdef unsigned char[::1] bits = np.zeros(2 * n, dtype=np.uint8)
    cdef int[::1] off = np.empty(m + 1, dtype=np.int32)
    make_offsets(n, m, &off[0])
    if n == 1:
        return _single_encode(chan[0], kind[0], given[0], unif[0])
    with nogil:
        sc_pass(n, m, &chan[0], &llr[0], &bits[0], &off[0], MODE_ENCODE,
                &kind[0], &given[0], &unif[0], &o[0], &lf[0])
    return out, leaf


def _single_encode(double l, signed char k, unsigned char g, double u):
    if k == FROZEN:
        d = 0
    elif k == DATA:
        d = g
    else:
        d = 1 if u < 1.0 / (1.0 + exp(l)) else 0
    return np.array([d], dtype=np.uint8), np.array([l])


def sc_decode(const double[::1] chan not None, const signed char[::1] kind not None):
    """Plain SC decoding; returns (ubar, path_metric_bits)."""
    cdef int n = chan.shape[0]
    cdef int m = log2_exact(n)
    out = np.empty(n, dtype=np.uint8)
    cdef unsigned char[::1] o = out
    cdef double[::1] lf = np.empty(n, dtype=np.float64)
    cdef double[::1] llr = np.empty(2 * n, dtype=np.float64)
    cdef unsigned char[::1] bits = np.zeros(2 * n, dtype=np.uint8)
    cdef int[::1] off = np.empty(m + 1, dtype=np.int32)
    cdef double pm
    make_offsets(n, m, &off[0])
    if n == 1:
        d = 0 if kind[0] == FROZEN else (1 if chan[0] < 0 else 0)
        return np.array([d], dtype=np.uint8), softplus(chan[0] if d else -chan[0]) / M_LN2
    with nogil:
        pm = sc_pass(n, m, &chan[0], &llr[0], &bits[0], &off[0], MODE_DECODE,
                     &kind[0], NULL, NULL, &o[0], &lf[0])
    return out, pm / M_LN2


cdef inline bint _cand_less(int a, int b, const double* met, const int* path,
                            const int* rank) noexcept nogil:
    # metric, then path index, then agreement with the hard decision
    if met[a] != met[b]:
        return met[a] < met[b]
    if path[a] != path[b]:
        return path[a] < path[b]
    return rank[a] < rank[b]


# ---------------------------------------------------------------------------
# list decoding with per-depth copy-on-write storage

cdef class _ListState:
    cdef int n, m, L, width
    cdef int* off          # offset of depth lam inside one slot row
    cdef double* llr       # slot rows of width 2n holding every depth
    cdef unsigned char* bits
    cdef int* lslot        # [depth * L + path] -> llr slot
    cdef int* bslot
    cdef int* lref         # [depth * L + slot] refcount
    cdef int* bref
    cdef int* lfree        # per-depth free slot stacks
    cdef int* bfree
    cdef int* nlfree
    cdef int* nbfree

    def __cinit__(self, int n, int m, int L):
        cdef int lam, s
        self.n, self.m, self.L, self.width = n, m, L, 2 * n
        self.off = <int*> calloc(m + 1, sizeof(int))
        self.llr = <double*> calloc(L * 2 * n, sizeof(double))
        self.bits = <unsigned char*> calloc(L * 2 * n, sizeof(unsigned char))
        self.lslot = <int*> calloc((m + 1) * L, sizeof(int))
        self.bslot = <int*> calloc((m + 1) * L, sizeof(int))
        self.lref = <int*> calloc((m + 1) * L, sizeof(int))
        self.bref = <int*> calloc((m + 1) * L, sizeof(int))
        self.lfree = <int*> calloc((m + 1) * L, sizeof(int))
        self.bfree = <int*> calloc((m + 1) * L, sizeof(int))
        self.nlfree = <int*> calloc(m + 1, sizeof(int))
        self.nbfree = <int*> calloc(m + 1, sizeof(int))
        if (self.off == NULL or self.llr == NULL or self.bits == NULL or self.lslot == NULL
                or self.bslot == NULL or self.lref == NULL or self.bref == NULL
                or self.lfree == NULL or self.bfree == NULL or self.nlfree == NULL
                or self.nbfree == NULL):
            raise MemoryError()
        make_offsets(n, m, self.off)
        for lam in range(m + 1):
            for s in range(L):
                self.lfree[lam * L + s] = L - 1 - s
                self.bfree[lam * L + s] = L - 1 - s
            self.nlfree[lam] = L
            self.nbfree[lam] = L

    def __dealloc__(self):
        free(self.off); free(self.llr); free(self.bits)
        free(self.lslot); free(self.bslot); free(self.lref); free(self.bref)
        free(self.lfree); free(self.bfree); free(self.nlfree); free(self.nbfree)

    cdef void assign_fresh(self, int p) noexcept nogil:
        cdef int lam, s
        cdef int L = self.L
        for lam in range(self.m + 1):
            self.nlfree[lam] -= 1
            s = self.lfree[lam * L + self.nlfree[lam]]
            self.lslot[lam * L + p] = s
            self.lref[lam * L + s] = 1
            self.nbfree[lam] -= 1
            s = self.bfree[lam * L + self.nbfree[lam]]
            self.bslot[lam * L + p] = s
            self.bref[lam * L + s] = 1

    cdef void clone(self, int src, int dst) noexcept nogil:
        cdef int lam, L = self.L
        for lam in range(self.m + 1):
            self.lslot[lam * L + dst] = self.lslot[lam * L + src]
            self.lref[lam * L + self.lslot[lam * L + src]] += 1
            self.bslot[lam * L + dst] = self.bslot[lam * L + src]
            self.bref[lam * L + self.bslot[lam * L + src]] += 1

    cdef void kill(self, int p) noexcept nogil:
        cdef int lam, s, L = self.L
        for lam in range(self.m + 1):
            s = self.lslot[lam * L + p]
            self.lref[lam * L + s] -= 1
            if self.lref[lam * L + s] == 0:
                self.lfree[lam * L + self.nlfree[lam]] = s
                self.nlfree[lam] += 1
            s = self.bslot[lam * L + p]
            self.bref[lam * L + s] -= 1
            if self.bref[lam * L + s] == 0:
                self.bfree[lam * L + self.nbfree[lam]] = s
                self.nbfree[lam] += 1

    cdef double* llr_write(self, int lam, int p) noexcept nogil:
        cdef int L = self.L
        cdef int s = self.lslot[lam * L + p]
        if self.lref[lam * L + s] > 1:
            self.lref[lam * L + s] -= 1
            self.nlfree[lam] -= 1
            s = self.lfree[lam * L + self.nlfree[lam]]
            self.lslot[lam * L + p] = s
            self.lref[lam * L + s] = 1
        return self.llr + s * self.width + self.off[lam]

    cdef double* llr_read(self, int lam, int p) noexcept nogil:
        return self.llr + self.lslot[lam * self.L + p] * self.width + self.off[lam]

    cdef unsigned char* bits_write(self, int lam, int p) noexcept nogil:
        cdef int L = self.L
        cdef int s = self.bslot[lam * L + p]
        cdef int old = s
        if self.bref[lam * L + s] > 1:
            self.bref[lam * L + s] -= 1
            self.nbfree[lam] -= 1
            s = self.bfree[lam * L + self.nbfree[lam]]
            self.bslot[lam * L + p] = s
            self.bref[lam * L + s] = 1
            memcpy(self.bits + s * self.width + self.off[lam],
                   self.bits + old * self.width + self.off[lam], self.n >> lam)
        return self.bits + s * self.width + self.off[lam]

    cdef unsigned char* bits_read(self, int lam, int p) noexcept nogil:
        return self.bits + self.bslot[lam * self.L + p] * self.width + self.off[lam]

    cdef double leaf_llr(self, int phi, int p, const double* chan) noexcept nogil:
        cdef int n = self.n, m = self.m
        cdef int lam, lam0, s, j
        cdef const double* src
        cdef double* dst
        cdef const unsigned char* cb
        lam0 = 1 if phi == 0 else m - ctz(phi)
        for lam in range(lam0, m + 1):
            s = n >> lam
            if lam == 1:
                src = chan
            else:
                src = self.llr_read(lam - 1, p)
            dst = self.llr_write(lam, p)
            if lam == lam0 and phi != 0:
                cb = self.bits_read(lam - 1, p)
                for j in range(s):
                    if cb[j]:
                        dst[j] = src[j + s] - src[j]
                    else:
                        dst[j] = src[j + s] + src[j]
            else:
                for j in range(s):
                    dst[j] = f_op(src[j], src[j + s])
        return self.llr_read(m, p)[0]

    cdef void push_bit(self, int phi, int p, unsigned char d) noexcept nogil:
        cdef int n = self.n, m = self.m
        cdef int lam = m - 1, s, j, child
        cdef unsigned char* cdst
        cdef unsigned char* csrc
        if (phi & 1) == 0:
            self.bits_write(lam, p)[0] = d
            return
        cdst = self.bits_write(lam, p)
        cdst[0] ^= d
        cdst[1] = d
        while lam > 0:
            s = n >> lam
            child = (phi >> (m - lam)) & 1
            csrc = self.bits_read(lam, p)
            cdst = self.bits_write(lam - 1, p)
            if child == 0:
                memcpy(cdst, csrc, s)
                return
            for j in range(s):
                cdst[j] ^= csrc[j]
            memcpy(cdst + s, csrc, s)
            lam -= 1


def scl_decode(const double[::1] chan not None, const signed char[::1] kind not None, int list_size):
    """SCL decoding; returns (ubar of best path, its metric in bits, all final metrics)."""
    if list_size < 1:
        raise ValueError("list size must be at least 1")
    cdef int n = chan.shape[0]
    cdef int m = log2_exact(n)
    cdef int L = list_size
    if n == 1:
        u1, pm1 = sc_decode(chan, kind)
        return u1, pm1, np.array([pm1])
    cdef _ListState st = _ListState(n, m, L)
    cdef unsigned char[:, ::1] path_u = np.zeros((L, n), dtype=np.uint8)
    cdef double[::1] pm = np.zeros(L, dtype=np.float64)
    cdef unsigned char[::1] active = np.zeros(L, dtype=np.uint8)
    cdef int[::1] inactive = np.empty(L, dtype=np.int32)
    cdef double[::1] leaf = np.zeros(L, dtype=np.float64)
    cdef double[::1] cand_m = np.empty(2 * L, dtype=np.float64)
    cdef int[::1] cand_rank = np.empty(2 * L, dtype=np.int32)
    cdef int[::1] cand_p = np.empty(2 * L, dtype=np.int32)
    cdef int[::1] cand_b = np.empty(2 * L, dtype=np.int32)
    cdef int[::1] order = np.empty(2 * L, dtype=np.int32)
    cdef unsigned char[:, ::1] keep = np.zeros((L, 2), dtype=np.uint8)
    cdef int ninactive, phi, p, c, nc, i, j, key, nkeep, q
    cdef double l
    # path 0 starts active; inactive stack pops 1, 2, ...
    ninactive = 0
    for p in range(L - 1, 0, -1):
        inactive[ninactive] = p
        ninactive += 1
    active[0] = 1
    st.assign_fresh(0)
    with nogil:
        for phi in range(n):
            for p in range(L):
                if active[p]:
                    leaf[p] = st.leaf_llr(phi, p, &chan[0])
            if kind[phi] == FROZEN:
                for p in range(L):
                    if active[p]:
                        pm[p] += softplus(-leaf[p])
                        path_u[p, phi] = 0
                        st.push_bit(phi, p, 0)
                continue
            nc = 0
            for p in range(L):
                if active[p]:
                    l = leaf[p]
                    cand_p[nc] = p; cand_b[nc] = 0
                    cand_rank[nc] = 1 if l < 0 else 0
                    cand_m[nc] = pm[p] + softplus(-l)
                    nc += 1
                    cand_p[nc] = p; cand_b[nc] = 1
                    cand_rank[nc] = 0 if l < 0 else 1
                    cand_m[nc] = pm[p] + softplus(l)
                    nc += 1
            # insertion sort by (metric, path, increment, bit)
            for i in range(nc):
                order[i] = i
            for i in range(1, nc):
                key = order[i]
                j = i - 1
                while j >= 0 and _cand_less(key, order[j], &cand_m[0], &cand_p[0],
                                            &cand_rank[0]):
                    order[j + 1] = order[j]
                    j -= 1
                order[j + 1] = key
            nkeep = nc if nc < L else L
            for p in range(L):
                keep[p, 0] = 0
                keep[p, 1] = 0
            for i in range(nkeep):
                c = order[i]
                keep[cand_p[c], cand_b[c]] = 1
            # kills first, then clones
            for p in range(L):
                if active[p] and not keep[p, 0] and not keep[p, 1]:
                    st.kill(p)
                    active[p] = 0
                    inactive[ninactive] = p
                    ninactive += 1
            for p in range(L):
                if active[p] and keep[p, 0] and keep[p, 1]:
                    ninactive -= 1
                    q = inactive[ninactive]
                    st.clone(p, q)
                    active[q] = 1
                    memcpy(&path_u[q, 0], &path_u[p, 0], phi)
                    pm[q] = pm[p] + softplus(leaf[p])
                    path_u[q, phi] = 1
                    st.push_bit(phi, q, 1)
                    pm[p] += softplus(-leaf[p])
                    path_u[p, phi] = 0
                    st.push_bit(phi, p, 0)
                    keep[p, 0] = 2  # mark done
            for p in range(L):
                if active[p] and keep[p, 0] != 2:
                    if keep[p, 0]:
                        pm[p] += softplus(-leaf[p])
                        path_u[p, phi] = 0
                        st.push_bit(phi, p, 0)
                    elif keep[p, 1]:
                        pm[p] += softplus(leaf[p])
                        path_u[p, phi] = 1
                        st.push_bit(phi, p, 1)
    best = -1
    for p in range(L):
        if active[p] and (best < 0 or pm[p] < pm[best]):
            best = p
    finals = np.array([pm[p] / M_LN2 for p in range(L) if active[p]])
    return np.array(path_u[best], dtype=np.uint8), pm[best] / M_LN2, finals
