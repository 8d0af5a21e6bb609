"""Directed rounding for float64 without touching the FPU rounding mode.

Every kernel computes the round-to-nearest result and an error-free
transformation (TwoSum, Dekker's TwoProduct) to learn which side of the
exact value it landed on.  The endpoint is moved one float outward only
when the exact value lies beyond it, so exact operations stay exact and
inexact ones are enclosed by the tightest pair of floats.  Where the
error-free transformation is not valid (near underflow or overflow) the
endpoint is moved one step outward unconditionally.

Kernels return ``inf`` on overflow; callers check finiteness and raise.
"""

import llvmlite.ir as ir
import numpy as np
from numba import njit, types
from numba.extending import intrinsic

_SPLITTER = 134217729.0  # 2**27 + 1
_SPLIT_MAX = 2.0 ** 995
_TINY = 2.0 ** -968
_HUGE = 2.0 ** 1000
_INF = np.inf


_FAST_LO = 2.0 ** -480
_FAST_HI = 2.0 ** 480
_MIN_SUB = 5e-324


@intrinsic
def _f2i(typingctx, x):
    def codegen(context, builder, sig, args):
        return builder.bitcast(args[0], ir.IntType(64))
    return types.int64(types.float64), codegen


@intrinsic
def _i2f(typingctx, x):
    def codegen(context, builder, sig, args):
        return builder.bitcast(args[0], ir.DoubleType())
    return types.float64(types.int64), codegen


@njit(cache=True, inline="always")
def next_up(x):
    if x == 0.0:
        return _MIN_SUB
    if x != x or x == _INF:
        return x
    if x == -_INF:
        return -1.7976931348623157e308
    i = _f2i(x)
    return _i2f(i + 1) if x > 0.0 else _i2f(i - 1)


@njit(cache=True, inline="always")
def next_down(x):
    if x == 0.0:
        return -_MIN_SUB
    if x != x or x == -_INF:
        return x
    if x == _INF:
        return 1.7976931348623157e308
    i = _f2i(x)
    return _i2f(i - 1) if x > 0.0 else _i2f(i + 1)


@njit(cache=True, inline="always")
def _two_sum_err(a, b, s):
    bb = s - a
    return (a - (s - bb)) + (b - bb)


@njit(cache=True, inline="always")
def _two_prod_err(a, b, p):
    c = _SPLITTER * a
    ah = c - (c - a)
    al = a - ah
    c = _SPLITTER * b
    bh = c - (c - b)
    bl = b - bh
    return ((ah * bh - p) + ah * bl + al * bh) + al * bl


@njit(cache=True, inline="always")
def _prod_err_sign(a, b, p):
    # sign of (a*b - p); 2 means "unknown, widen both ways"
    if a == 0.0 or b == 0.0:
        return 0
    ap = abs(p)
    if ap < _TINY or ap > _HUGE or abs(a) > _SPLIT_MAX or abs(b) > _SPLIT_MAX:
        return 2
    e = _two_prod_err(a, b, p)
    if e > 0.0:
        return 1
    if e < 0.0:
        return -1
    return 0


@njit(cache=True, inline="always")
def add_rd(a, b):
    s = a + b
    if not np.isfinite(s):
        return s
    e = _two_sum_err(a, b, s)
    if e < 0.0 or e != e:
        return next_down(s)
    return s


@njit(cache=True, inline="always")
def add_ru(a, b):
    s = a + b
    if not np.isfinite(s):
        return s
    e = _two_sum_err(a, b, s)
    if e > 0.0 or e != e:
        return next_up(s)
    return s


@njit(cache=True, inline="always")
def sub_rd(a, b):
    return add_rd(a, -b)


@njit(cache=True, inline="always")
def sub_ru(a, b):
    return add_ru(a, -b)


@njit(cache=True, inline="always")
def mul_rd(a, b):
    p = a * b
    if not np.isfinite(p):
        return p
    sg = _prod_err_sign(a, b, p)
    if sg == 0:
        return p + 0.0
    if sg == 1:
        return p
    return next_down(p)


@njit(cache=True, inline="always")
def mul_ru(a, b):
    p = a * b
    if not np.isfinite(p):
        return p
    sg = _prod_err_sign(a, b, p)
    if sg == 0:
        return p + 0.0
    if sg == -1:
        return p
    return next_up(p)


@njit(cache=True, inline="always")
def _div_err_sign(a, b, q):
    # sign of (a/b - q)
    if a == 0.0:
        return 0
    aq = abs(q)
    if (aq < _TINY or aq > _HUGE or abs(a) < _TINY or abs(a) > _HUGE
            or abs(b) > _SPLIT_MAX or abs(b) < _TINY):
        return 2
    p = q * b
    e = _two_prod_err(q, b, p)
    r = (a - p) - e  # exact residual a - q*b
    if r == 0.0:
        return 0
    if (r > 0.0) == (b > 0.0):
        return 1
    return -1


@njit(cache=True, inline="always")
def div_rd(a, b):
    q = a / b
    if not np.isfinite(q):
        return q
    sg = _div_err_sign(a, b, q)
    if sg == 0:
        return q + 0.0
    if sg == 1:
        return q
    return next_down(q)


@njit(cache=True, inline="always")
def div_ru(a, b):
    q = a / b
    if not np.isfinite(q):
        return q
    sg = _div_err_sign(a, b, q)
    if sg == 0:
        return q + 0.0
    if sg == -1:
        return q
    return next_up(q)


@njit(cache=True, inline="always")
def sqrt_rd(x):
    s = np.sqrt(x)
    if s == 0.0 or not np.isfinite(s):
        return s
    if mul_ru(s, s) <= x:
        return s
    return next_down(s)


@njit(cache=True, inline="always")
def sqrt_ru(x):
    s = np.sqrt(x)
    if s == 0.0 or not np.isfinite(s):
        return s
    if mul_rd(s, s) >= x:
        return s
    return next_up(s)


@njit(cache=True, inline="always")
def imul(alo, ahi, blo, bhi):
    """Tightest outward-rounded product of [alo, ahi] and [blo, bhi]."""
    if alo >= 0.0:
        if blo >= 0.0:
            return mul_rd(alo, blo), mul_ru(ahi, bhi)
        if bhi <= 0.0:
            return mul_rd(ahi, blo), mul_ru(alo, bhi)
        return mul_rd(ahi, blo), mul_ru(ahi, bhi)
    if ahi <= 0.0:
        if blo >= 0.0:
            return mul_rd(alo, bhi), mul_ru(ahi, blo)
        if bhi <= 0.0:
            return mul_rd(ahi, bhi), mul_ru(alo, blo)
        return mul_rd(alo, bhi), mul_ru(alo, blo)
    if blo >= 0.0:
        return mul_rd(alo, bhi), mul_ru(ahi, bhi)
    if bhi <= 0.0:
        return mul_rd(ahi, blo), mul_ru(alo, blo)
    lo = min(mul_rd(alo, bhi), mul_rd(ahi, blo))
    hi = max(mul_ru(alo, blo), mul_ru(ahi, bhi))
    return lo, hi


@njit(cache=True, inline="always")
def idiv(alo, ahi, blo, bhi):
    """Outward-rounded quotient; the caller guarantees 0 is not in b."""
    if blo > 0.0:
        if alo >= 0.0:
            return div_rd(alo, bhi), div_ru(ahi, blo)
        if ahi <= 0.0:
            return div_rd(alo, blo), div_ru(ahi, bhi)
        return div_rd(alo, blo), div_ru(ahi, blo)
    if alo >= 0.0:
        return div_rd(ahi, bhi), div_ru(alo, blo)
    if ahi <= 0.0:
        return div_rd(ahi, blo), div_ru(alo, bhi)
    return div_rd(ahi, bhi), div_ru(alo, bhi)


@njit(cache=True, inline="always")
def isqr(lo, hi):
    if lo >= 0.0:
        return mul_rd(lo, lo), mul_ru(hi, hi)
    if hi <= 0.0:
        return mul_rd(hi, hi), mul_ru(lo, lo)
    m = max(-lo, hi)
    return 0.0, mul_ru(m, m)


# -- elementwise kernels over flat arrays ---------------------------------

@njit(cache=True)
def k_add(alo, ahi, blo, bhi):
    n = alo.size
    lo = np.empty(n)
    hi = np.empty(n)
    for i in range(n):
        lo[i] = add_rd(alo[i], blo[i])
        hi[i] = add_ru(ahi[i], bhi[i])
    return lo, hi


@njit(cache=True)
def k_sub(alo, ahi, blo, bhi):
    n = alo.size
    lo = np.empty(n)
    hi = np.empty(n)
    for i in range(n):
        lo[i] = sub_rd(alo[i], bhi[i])
        hi[i] = sub_ru(ahi[i], blo[i])
    return lo, hi


@njit(cache=True)
def k_mul(alo, ahi, blo, bhi):
    n = alo.size
    lo = np.empty(n)
    hi = np.empty(n)
    for i in range(n):
        lo[i], hi[i] = imul(alo[i], ahi[i], blo[i], bhi[i])
    return lo, hi


@njit(cache=True)
def k_div(alo, ahi, blo, bhi):
    n = alo.size
    lo = np.empty(n)
    hi = np.empty(n)
    for i in range(n):
        lo[i], hi[i] = idiv(alo[i], ahi[i], blo[i], bhi[i])
    return lo, hi


@njit(cache=True)
def k_sqr(alo, ahi):
    n = alo.size
    lo = np.empty(n)
    hi = np.empty(n)
    for i in range(n):
        lo[i], hi[i] = isqr(alo[i], ahi[i])
    return lo, hi


@njit(cache=True)
def k_sqrt(alo, ahi):
    n = alo.size
    lo = np.empty(n)
    hi = np.empty(n)
    for i in range(n):
        lo[i] = sqrt_rd(alo[i])
        hi[i] = sqrt_ru(ahi[i])
    return lo, hi


@njit(cache=True)
def k_outward(lo, hi, steps):
    out_lo = lo.copy()
    out_hi = hi.copy()
    for _ in range(steps):
        for i in range(lo.size):
            out_lo[i] = next_down(out_lo[i])
            out_hi[i] = next_up(out_hi[i])
    return out_lo, out_hi


@njit(cache=True)
def k_sum_rows(alo, ahi):
    """Left-to-right sum over axis 0 of 2-D arrays."""
    m, p = alo.shape
    lo = np.zeros(p)
    hi = np.zeros(p)
    for i in range(m):
        for j in range(p):
            lo[j] = add_rd(lo[j], alo[i, j])
            hi[j] = add_ru(hi[j], ahi[i, j])
    return lo, hi


@njit(cache=True, inline="always")
def _imul_fast(a1, a2, b1, b2):
    # valid only when every nonzero operand lies in [_FAST_LO, _FAST_HI]
    p1 = a1 * b1
    p2 = a1 * b2
    p3 = a2 * b1
    p4 = a2 * b2
    lo = min(min(p1, p2), min(p3, p4))
    hi = max(max(p1, p2), max(p3, p4))
    e1 = _two_prod_err(a1, b1, p1)
    e2 = _two_prod_err(a1, b2, p2)
    e3 = _two_prod_err(a2, b1, p3)
    e4 = _two_prod_err(a2, b2, p4)
    # rd(min exact) is pred(lo) iff some product rounded to lo from below
    dn = ((p1 == lo and e1 < 0.0) or (p2 == lo and e2 < 0.0)
          or (p3 == lo and e3 < 0.0) or (p4 == lo and e4 < 0.0))
    up = ((p1 == hi and e1 > 0.0) or (p2 == hi and e2 > 0.0)
          or (p3 == hi and e3 > 0.0) or (p4 == hi and e4 > 0.0))
    return (next_down(lo) if dn else lo), (next_up(hi) if up else hi)


@njit(cache=True, inline="always")
def _add_rd_fast(a, b):
    s = a + b
    return next_down(s) if _two_sum_err(a, b, s) < 0.0 else s


@njit(cache=True, inline="always")
def _add_ru_fast(a, b):
    s = a + b
    return next_up(s) if _two_sum_err(a, b, s) > 0.0 else s


@njit(cache=True)
def _in_fast_range(x):
    for v in x.ravel():
        a = abs(v)
        if a != 0.0 and (a < _FAST_LO or a > _FAST_HI):
            return False
    return True


@njit(cache=True)
def _matmul_fast(alo, ahi, blo, bhi, lo, hi):
    m, k = alo.shape
    p = blo.shape[1]
    for i in range(m):
        rlo = lo[i]
        rhi = hi[i]
        for t in range(k):
            a1 = alo[i, t]
            a2 = ahi[i, t]
            b1r = blo[t]
            b2r = bhi[t]
            for j in range(p):
                plo, phi = _imul_fast(a1, a2, b1r[j], b2r[j])
                rlo[j] = _add_rd_fast(rlo[j], plo)
                rhi[j] = _add_ru_fast(rhi[j], phi)


@njit(cache=True)
def _matmul_general(alo, ahi, blo, bhi, lo, hi):
    m, k = alo.shape
    p = blo.shape[1]
    for i in range(m):
        for t in range(k):
            a1 = alo[i, t]
            a2 = ahi[i, t]
            for j in range(p):
                plo, phi = imul(a1, a2, blo[t, j], bhi[t, j])
                lo[i, j] = add_rd(lo[i, j], plo)
                hi[i, j] = add_ru(hi[i, j], phi)


@njit(cache=True)
def k_matmul(alo, ahi, blo, bhi):
    """Entrywise-sharp interval matrix product ``a @ b``.

    Each output entry is accumulated left to right over the inner index;
    the loop order (row, inner, column) only interleaves independent
    accumulators, so results are bit-identical to the naive triple loop.
    """
    m = alo.shape[0]
    p = blo.shape[1]
    lo = np.zeros((m, p))
    hi = np.zeros((m, p))
    if (_in_fast_range(alo) and _in_fast_range(ahi)
            and _in_fast_range(blo) and _in_fast_range(bhi)):
        _matmul_fast(alo, ahi, blo, bhi, lo, hi)
    else:
        _matmul_general(alo, ahi, blo, bhi, lo, hi)
    return lo, hi


@njit(cache=True)
def k_sum_up(x):
    """Upward-rounded left-to-right sum of a 1-D array."""
    s = 0.0
    for v in x:
        s = add_ru(s, v)
    return s
