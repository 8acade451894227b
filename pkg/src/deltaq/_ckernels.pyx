# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``.

The sampler here walks each trial separately through the postfix program;
the numpy fallback processes all trials per instruction instead. Both draw
from the same counter-based stream, so they sample identical outcomes.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log1p
from libc.stdint cimport uint64_t

cnp.import_array()

NAME = "cython"

cdef enum:
    OP_LEAF = 0
    OP_BOT = 1
    OP_SEQ = 2
    OP_ATF = 3
    OP_FTF = 4
    OP_CHOICE = 5

cdef enum:
    KIND_POINT = 0
    KIND_UNIFORM = 1
    KIND_EXP = 2
    KIND_TABLE = 3


def conv_truncated(const double[::1] a, const double[::1] b, Py_ssize_t n):
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0]
    cdef Py_ssize_t k, i, j, hi
    cdef double ai, spill = 0.0
    out = np.zeros(n + 1, dtype=np.float64)
    cdef double[::1] c = out
    tail_arr = np.zeros(nb + 1, dtype=np.float64)
    cdef double[::1] tail = tail_arr
    # scatter form: forward access vectorizes and zero masses are skipped
    for i in range(min(na, n + 1)):
        ai = a[i]
        if ai == 0.0:
            continue
        hi = n + 1 - i
        if hi > nb:
            hi = nb
        for j in range(hi):
            c[i + j] += ai * b[j]
    for k in range(nb - 1, -1, -1):
        tail[k] = tail[k + 1] + b[k]
    for i in range(na):
        k = n - i + 1
        if k < 0:
            k = 0
        if k > nb:
            k = nb
        spill += a[i] * tail[k]
    return out, spill


def max_combine(const double[::1] fa, const double[::1] fb):
    cdef Py_ssize_t n = fa.shape[0], k
    cdef double ca = 0.0, cb = 0.0, prev_a
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] m = out
    for k in range(n):
        prev_a = ca
        ca += fa[k]
        cb += fb[k]
        m[k] = fa[k] * cb + prev_a * fb[k]
    return out


def min_combine(const double[::1] fa, const double[::1] fb, double tail_a, double tail_b):
    cdef Py_ssize_t n = fa.shape[0], k
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] m = out
    sa_arr = np.empty(n, dtype=np.float64)
    sb_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] sa = sa_arr
    cdef double[::1] sb = sb_arr
    cdef double ra = 0.0, rb = 0.0
    # reverse running sums, matching the cumsum order of the numpy twin
    for k in range(n - 1, -1, -1):
        ra += fa[k]
        rb += fb[k]
        sa[k] = ra
        sb[k] = rb
    for k in range(n):
        m[k] = fa[k] * ((sb[k] - fb[k] + tail_b) + fb[k]) + (sa[k] - fa[k] + tail_a) * fb[k]
    return out


cdef inline uint64_t splitmix(uint64_t z) nogil:
    z = z + <uint64_t>0x9E3779B97F4A7C15ULL
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double draw(uint64_t key, uint64_t trial, uint64_t stream) nogil:
    cdef uint64_t h = splitmix(splitmix(key ^ trial) ^ stream)
    return <double>(h >> 11) * (1.0 / 9007199254740992.0)


def uniform_scalar(uint64_t seed, uint64_t trial, uint64_t stream):
    return draw(splitmix(seed), trial, stream)


cdef double leaf_time(int kind, double p1, double p2, double u,
                      const double[::1] tab_t, const double[::1] tab_c,
                      Py_ssize_t off, Py_ssize_t ln) nogil:
    cdef Py_ssize_t lo, hi, mid, i
    cdef double t_lo, t_hi, c_lo, c_hi, width, frac
    if kind == KIND_POINT:
        return p1
    if kind == KIND_UNIFORM:
        return p1 + u * (p2 - p1)
    if kind == KIND_EXP:
        return -log1p(-u) / p1
    # first index with tab_c > u
    lo = 0
    hi = ln
    while lo < hi:
        mid = (lo + hi) // 2
        if tab_c[off + mid] > u:
            hi = mid
        else:
            lo = mid + 1
    i = lo if lo < ln - 1 else ln - 1
    t_hi = tab_t[off + i]
    c_hi = tab_c[off + i]
    if i == 0:
        return t_hi
    t_lo = tab_t[off + i - 1]
    c_lo = tab_c[off + i - 1]
    if not t_hi > t_lo:
        return t_hi
    width = c_hi - c_lo
    frac = (u - c_lo) / width if width > 0 else 1.0
    return t_lo + frac * (t_hi - t_lo)


def run_program(const long[::1] ops, const long[::1] args, const double[::1] weights,
                const long[::1] leaf_kind, const double[::1] leaf_p1,
                const double[::1] leaf_p2, const double[::1] leaf_ok,
                const long[::1] leaf_off, const long[::1] leaf_len,
                const double[::1] tab_t, const double[::1] tab_c,
                uint64_t seed, Py_ssize_t trials):
    cdef Py_ssize_t nops = ops.shape[0]
    times_arr = np.zeros(trials, dtype=np.float64)
    failed_arr = np.zeros(trials, dtype=np.bool_)
    cdef double[::1] times = times_arr
    cdef cnp.npy_bool[::1] failed = failed_arr
    st_arr = np.empty(nops + 1, dtype=np.float64)
    sf_arr = np.empty(nops + 1, dtype=np.int8)
    cdef double[::1] st = st_arr
    cdef signed char[::1] sf = sf_arr
    cdef uint64_t key = splitmix(seed)
    cdef Py_ssize_t trial, pc, sp, site
    cdef long op
    cdef double u0, u1, tl, tr
    cdef signed char fl, fr
    with nogil:
        for trial in range(trials):
            sp = 0
            for pc in range(nops):
                op = ops[pc]
                site = args[pc]
                if op == OP_LEAF:
                    u0 = draw(key, <uint64_t>trial, <uint64_t>(2 * site))
                    u1 = draw(key, <uint64_t>trial, <uint64_t>(2 * site + 1))
                    st[sp] = leaf_time(<int>leaf_kind[site], leaf_p1[site],
                                       leaf_p2[site], u1, tab_t, tab_c,
                                       leaf_off[site], leaf_len[site])
                    sf[sp] = 1 if u0 >= leaf_ok[site] else 0
                    sp += 1
                elif op == OP_BOT:
                    st[sp] = 0.0
                    sf[sp] = 1
                    sp += 1
                else:
                    sp -= 1
                    tr = st[sp]
                    fr = sf[sp]
                    tl = st[sp - 1]
                    fl = sf[sp - 1]
                    if op == OP_SEQ:
                        st[sp - 1] = tl + tr
                        sf[sp - 1] = fl | fr
                    elif op == OP_ATF:
                        st[sp - 1] = tl if tl > tr else tr
                        sf[sp - 1] = fl | fr
                    elif op == OP_FTF:
                        if fl:
                            st[sp - 1] = tr
                        elif fr:
                            st[sp - 1] = tl
                        else:
                            st[sp - 1] = tl if tl < tr else tr
                        sf[sp - 1] = fl & fr
                    else:
                        if not (draw(key, <uint64_t>trial, <uint64_t>(2 * site)) < weights[site]):
                            st[sp - 1] = tr
                            sf[sp - 1] = fr
            failed[trial] = sf[0]
            times[trial] = 0.0 if sf[0] else st[0]
    return times_arr, failed_arr
