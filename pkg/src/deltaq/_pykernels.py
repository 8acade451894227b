"""Pure numpy kernels; the fallback when the compiled extension is absent.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
"""

import math

import numpy as np

NAME = "python"

# splitmix64 constants
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

OP_LEAF, OP_BOT, OP_SEQ, OP_ATF, OP_FTF, OP_CHOICE = range(6)
KIND_POINT, KIND_UNIFORM, KIND_EXP, KIND_TABLE = range(4)


def conv_truncated(a, b, n):
    """Lattice convolution kept to indices ``0..n``.

    Returns ``(mass, spill)`` where ``spill`` is the product mass landing past
    index ``n``, computed from suffix sums rather than by subtraction.
    """
    full = np.convolve(a, b)
    mass = full[: n + 1].copy()
    # sum_{i+j>n} a_i b_j = sum_i a_i * (sum_{j>n-i} b_j)
    tail_b = np.concatenate((np.cumsum(b[::-1])[::-1], [0.0]))
    idx = np.clip(n - np.arange(len(a)) + 1, 0, len(b))
    spill = float(np.dot(a, tail_b[idx]))
    return mass, spill


def max_combine(fa, fb):
    """Lattice mass of the maximum of two independent delays."""
    ca = np.cumsum(fa)
    cb = np.cumsum(fb)
    prev_a = np.concatenate(([0.0], ca[:-1]))
    return fa * cb + prev_a * fb


def min_combine(fa, fb, tail_a, tail_b):
    """Lattice mass of the minimum of two independent delays.

    ``tail_*`` is the probability of finishing after the grid or never.
    """
    sa = np.cumsum(fa[::-1])[::-1] - fa + tail_a  # P(T_a > k)
    sb = np.cumsum(fb[::-1])[::-1] - fb + tail_b
    sb_prev = sb + fb  # P(T_b >= k)
    return fa * sb_prev + sa * fb


def _splitmix(z):
    z = z + _GAMMA
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


def uniforms(seed, trials, stream):
    """Counter-based uniforms in [0, 1) for every trial at one stream index."""
    with np.errstate(over="ignore"):
        key = _splitmix(np.uint64(seed))
        h = _splitmix(key ^ trials)
        h = _splitmix(h ^ np.uint64(stream))
    return (h >> _S11).astype(np.float64) * _INV53


def uniform_scalar(seed, trial, stream):
    return float(uniforms(seed, np.array([trial], dtype=np.uint64), stream)[0])


_log1p = np.frompyfunc(math.log1p, 1, 1)


def _leaf_times(kind, p1, p2, u, tab_t, tab_c):
    if kind == KIND_POINT:
        return np.full(u.shape, p1)
    if kind == KIND_UNIFORM:
        return p1 + u * (p2 - p1)
    if kind == KIND_EXP:
        # libm's log1p, as the compiled twin uses, so draws match bit for bit
        return -_log1p(-u).astype(np.float64) / p1
    i = np.searchsorted(tab_c, u, side="right")
    i = np.minimum(i, len(tab_c) - 1)
    t_hi, c_hi = tab_t[i], tab_c[i]
    lo = np.maximum(i - 1, 0)
    t_lo = np.where(i > 0, tab_t[lo], t_hi)
    c_lo = np.where(i > 0, tab_c[lo], 0.0)
    width = c_hi - c_lo
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(width > 0, (u - c_lo) / width, 1.0)
    return np.where((i > 0) & (t_hi > t_lo), t_lo + frac * (t_hi - t_lo), t_hi)


def run_program(ops, args, weights, leaf_kind, leaf_p1, leaf_p2, leaf_ok,
                leaf_off, leaf_len, tab_t, tab_c, seed, trials):
    """Vectorized postfix interpreter over all trials at once.

    Returns ``(times, failed)``; ``times`` is meaningful only where not failed.
    """
    idx = np.arange(trials, dtype=np.uint64)
    stack = []
    for pc in range(len(ops)):
        op = ops[pc]
        site = args[pc]
        if op == OP_LEAF:
            u0 = uniforms(seed, idx, 2 * site)
            u1 = uniforms(seed, idx, 2 * site + 1)
            off, ln = leaf_off[site], leaf_len[site]
            t = _leaf_times(leaf_kind[site], leaf_p1[site], leaf_p2[site], u1,
                            tab_t[off:off + ln], tab_c[off:off + ln])
            stack.append((t, u0 >= leaf_ok[site]))
        elif op == OP_BOT:
            stack.append((np.zeros(trials), np.ones(trials, dtype=bool)))
        else:
            tr, fr = stack.pop()
            tl, fl = stack.pop()
            if op == OP_SEQ:
                stack.append((tl + tr, fl | fr))
            elif op == OP_ATF:
                stack.append((np.maximum(tl, tr), fl | fr))
            elif op == OP_FTF:
                t = np.where(fl, tr, np.where(fr, tl, np.minimum(tl, tr)))
                stack.append((t, fl & fr))
            else:
                pick_left = uniforms(seed, idx, 2 * site) < weights[site]
                stack.append((np.where(pick_left, tl, tr), np.where(pick_left, fl, fr)))
    times, failed = stack.pop()
    times = np.where(failed, 0.0, times)
    return times, failed
