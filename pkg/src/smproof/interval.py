"""Outward-rounded interval arithmetic on numpy arrays.

An :class:`Interval` holds two float64 arrays ``lo`` and ``hi`` of a common
shape.  A 0-d interval is a scalar enclosure, shape ``(3,)`` plays the role of
a vector enclosure and shape ``(3, 3)`` of an interval matrix; nothing in the
kernel is tied to dimension three.

Rounding contract
-----------------
All rigor lives in the ``_k*`` kernel functions of this module.  Each one
takes endpoint arrays, computes the floating-point result with the default
round-to-nearest mode, and then moves every endpoint one ulp outward with
``np.nextafter`` (lower endpoints towards -inf, upper towards +inf).  Because
an IEEE-754 operation in round-to-nearest is off by at most half an ulp, the
widened endpoints bound the exact real result.  Two refinements keep exact
results exact, which matters for equilibria that must stay at zero:

* additions use the error-free TwoSum transform and products Dekker's
  TwoProduct, so an endpoint is only moved when the rounding error is actually
  nonzero and points in the wrong direction;
* products and quotients with a degenerate ``[0, 0]`` operand return exact zero.

Sums of many terms (dot products, matrix products, Cauchy products in the
Taylor code) go through :func:`_ksum`, which uses numpy's summation and adds
the classical a-priori bound ``gamma_{n-1} * sum |x_i|`` on the accumulated
rounding error.  That bound holds for any order of summation, so it covers
numpy's pairwise scheme.

No process-global rounding state is touched, hence every function is pure and
thread-safe.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath
import numpy as np

__all__ = [
    "DivisionByZeroInterval",
    "EmptyIntervalError",
    "Interval",
    "IVec",
    "IMat",
    "arith",
    "as_interval",
    "decimal_interval",
    "eye",
    "hull",
    "matmul",
    "euclid_norm_sup",
    "log_norm_upper",
    "m_l_lower",
    "m_lower",
    "op_norm_upper",
    "spectral_bounds",
    "exp_scalar",
]

_INF = np.inf
_U = 2.0**-53  # unit roundoff of binary64
_TINY = 5e-324  # smallest subnormal


class DivisionByZeroInterval(ZeroDivisionError):
    """Raised when the divisor interval contains zero."""


class EmptyIntervalError(ValueError):
    """Raised when an interval would be constructed with lo > hi (or NaN)."""


# ---------------------------------------------------------------------------
# kernel: endpoint arithmetic with outward rounding
# ---------------------------------------------------------------------------


def _down(x: np.ndarray) -> np.ndarray:
    return np.nextafter(x, -_INF)


def _up(x: np.ndarray) -> np.ndarray:
    return np.nextafter(x, _INF)


def _two_sum_err(a, b, s):
    """Exact error ``(a + b) - s`` of ``s = fl(a + b)`` (NaN on overflow)."""
    bb = s - a
    return (a - (s - bb)) + (b - bb)


def _round_sum_lo(a, b):
    s = a + b
    with np.errstate(invalid="ignore"):
        e = _two_sum_err(a, b, s)
    # e < 0: true sum below s, step down.  Non-finite: be conservative.
    bad = ~(e >= 0)
    if np.ndim(s) == 0:
        return _down(s) if bad else s
    if bad.any():
        s = np.where(bad, _down(s), s)
    return s


def _round_sum_hi(a, b):
    s = a + b
    with np.errstate(invalid="ignore"):
        e = _two_sum_err(a, b, s)
    bad = ~(e <= 0)
    if np.ndim(s) == 0:
        return _up(s) if bad else s
    if bad.any():
        s = np.where(bad, _up(s), s)
    return s


def _kadd(alo, ahi, blo, bhi):
    return _round_sum_lo(alo, blo), _round_sum_hi(ahi, bhi)


def _ksub(alo, ahi, blo, bhi):
    return _round_sum_lo(alo, -bhi), _round_sum_hi(ahi, -blo)


def _widen_product(lo, hi, zero):
    """Outward widening of product/quotient endpoints.

    ``zero`` marks entries where one operand is exactly ``[0, 0]``; those are
    exact zeros.  A computed ``+0.0`` lower endpoint is a valid lower bound
    (the exact value is >= 0 even under underflow), likewise ``-0.0`` for an
    upper endpoint.
    """
    lo_w = np.where((lo == 0) & ~np.signbit(lo), 0.0, _down(lo))
    hi_w = np.where((hi == 0) & np.signbit(hi), 0.0, _up(hi))
    if zero is not None:
        lo_w = np.where(zero, 0.0, lo_w)
        hi_w = np.where(zero, 0.0, hi_w)
    return lo_w, hi_w


_SPLIT = 134217729.0  # 2^27 + 1, Veltkamp splitting constant
_TINY_PRODUCT = 2.0**-960  # below this the product error may not be representable


def _product_error(a, b, p):
    """Exact error ``a*b - p`` of ``p = fl(a*b)`` (Dekker), NaN where unreliable.

    The transform needs the splitting not to overflow and the error not to
    underflow; outside that range (and for non-finite inputs) NaN is returned
    so callers fall back to widening.
    """
    with np.errstate(invalid="ignore", over="ignore"):
        ca = _SPLIT * a
        ah = ca - (ca - a)
        al = a - ah
        cb = _SPLIT * b
        bh = cb - (cb - b)
        bl = b - bh
        e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    exact_zero = (a == 0) | (b == 0)
    ok = np.isfinite(e) & ((np.abs(p) >= _TINY_PRODUCT) | exact_zero)
    return np.where(exact_zero, 0.0, np.where(ok, e, np.nan))


def _select_round(lo, hi, products, errors):
    """Round ``lo``/``hi`` outward only if a product attaining them was inexact
    in the unsafe direction.  Products strictly above ``lo`` stay above it after
    their rounding error (at most half an ulp), likewise below ``hi``.
    """
    lo_bad = np.zeros(np.shape(lo), dtype=bool)
    hi_bad = np.zeros(np.shape(hi), dtype=bool)
    for p, e in zip(products, errors):
        lo_bad |= (p == lo) & ~(e >= 0)
        hi_bad |= (p == hi) & ~(e <= 0)
    lo = np.where(lo_bad, _down(lo), lo)
    hi = np.where(hi_bad, _up(hi), hi)
    return lo, hi


def _kmul_scalar(alo: float, ahi: float, blo: float, bhi: float):
    """0-d product of finite endpoints; exactness decided with fractions."""
    if (alo == 0 and ahi == 0) or (blo == 0 and bhi == 0):
        return np.float64(0.0), np.float64(0.0)
    pairs = ((alo, blo), (alo, bhi), (ahi, blo), (ahi, bhi))
    prods = [a * b for a, b in pairs]
    lo, hi = min(prods), max(prods)
    lo_bad = hi_bad = False
    for (a, b), p in zip(pairs, prods):
        if p != lo and p != hi:
            continue
        exact = Fraction(a) * Fraction(b) if math.isfinite(p) else None
        if p == lo and (exact is None or exact < Fraction(p)):
            lo_bad = True
        if p == hi and (exact is None or exact > Fraction(p)):
            hi_bad = True
    lo = np.float64(lo)
    hi = np.float64(hi)
    return (_down(lo) if lo_bad else lo), (_up(hi) if hi_bad else hi)


def _kmul(alo, ahi, blo, bhi):
    if (np.ndim(alo) == 0 and np.ndim(ahi) == 0 and np.ndim(blo) == 0 and np.ndim(bhi) == 0
            and math.isfinite(alo) and math.isfinite(ahi) and math.isfinite(blo) and math.isfinite(bhi)):
        return _kmul_scalar(float(alo), float(ahi), float(blo), float(bhi))
    with np.errstate(invalid="ignore", over="ignore"):
        p1 = alo * blo
        p2 = alo * bhi
        p3 = ahi * blo
        p4 = ahi * bhi
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    if np.isnan(lo).any() or np.isnan(hi).any():
        # 0 * inf: the interval convention is 0 for the product of zero with
        # an unbounded factor; fall back to an unbounded result to stay safe.
        lo = np.where(np.isnan(lo), -_INF, lo)
        hi = np.where(np.isnan(hi), _INF, hi)
    errs = (_product_error(alo, blo, p1), _product_error(alo, bhi, p2),
            _product_error(ahi, blo, p3), _product_error(ahi, bhi, p4))
    lo, hi = _select_round(lo, hi, (p1, p2, p3, p4), errs)
    zero = ((alo == 0) & (ahi == 0)) | ((blo == 0) & (bhi == 0))
    return np.where(zero, 0.0, lo), np.where(zero, 0.0, hi)


def _kmul_point(a, blo, bhi):
    """Product of a point array ``a`` with an interval."""
    if (np.ndim(a) == 0 and np.ndim(blo) == 0 and np.ndim(bhi) == 0
            and math.isfinite(a) and math.isfinite(blo) and math.isfinite(bhi)):
        return _kmul_scalar(float(a), float(a), float(blo), float(bhi))
    with np.errstate(invalid="ignore", over="ignore"):
        p1 = a * blo
        p2 = a * bhi
    lo = np.minimum(p1, p2)
    hi = np.maximum(p1, p2)
    lo, hi = _select_round(lo, hi, (p1, p2), (_product_error(a, blo, p1), _product_error(a, bhi, p2)))
    zero = (a == 0) | ((blo == 0) & (bhi == 0))
    return np.where(zero, 0.0, lo), np.where(zero, 0.0, hi)


def _ksqr(alo, ahi):
    """Square with the dependency handled (result is >= 0)."""
    l2 = alo * alo
    h2 = ahi * ahi
    mx = np.maximum(l2, h2)
    mn = np.minimum(l2, h2)
    straddle = (alo <= 0) & (ahi >= 0)
    lo = np.where(straddle, 0.0, mn)
    lo_w = np.where(lo == 0, 0.0, _down(lo))
    hi_w = np.where(mx == 0, 0.0, _up(mx))
    # underflow of a nonzero square: +0.0 computed, true value tiny positive
    hi_w = np.where((mx == 0) & ((alo != 0) | (ahi != 0)), _TINY, hi_w)
    return np.maximum(lo_w, 0.0), hi_w


def _kdiv(alo, ahi, blo, bhi):
    if np.any((blo <= 0) & (bhi >= 0)):
        raise DivisionByZeroInterval("divisor interval contains zero")
    with np.errstate(invalid="ignore", over="ignore"):
        q1 = alo / blo
        q2 = alo / bhi
        q3 = ahi / blo
        q4 = ahi / bhi
    lo = np.minimum(np.minimum(q1, q2), np.minimum(q3, q4))
    hi = np.maximum(np.maximum(q1, q2), np.maximum(q3, q4))
    zero = (alo == 0) & (ahi == 0)
    return _widen_product(lo, hi, zero)


def _ksqrt(alo, ahi):
    if np.any(alo < 0):
        raise ValueError("sqrt of an interval with negative part")
    lo = np.sqrt(alo)
    hi = np.sqrt(ahi)
    lo_w = np.where(lo == 0, 0.0, _down(lo))
    hi_w = np.where(hi == 0, 0.0, _up(hi))
    hi_w = np.where((hi == 0) & (ahi > 0), _TINY, hi_w)
    return np.maximum(lo_w, 0.0), hi_w


def _sum_error(abs_sum, n):
    """Upper bound on the rounding error of a float sum of ``n`` nonzero terms.

    ``n`` may be an array (one count per reduced slot).  Adding exact zeros is
    exact, so only nonzero terms count.  The factor 1.01 * (n-1) * u exceeds
    gamma_{n-1} * (1 + gamma_{n-1}), which also absorbs the rounding in the
    computed ``abs_sum``.
    """
    fac = np.maximum(n - 1, 0) * (_U * 1.01)
    err = _up(abs_sum * fac)
    return np.where((abs_sum == 0) | (fac == 0), 0.0, err)


def _ksum(lo, hi, axis):
    """Rigorous enclosure of the sum along ``axis`` of an interval array."""
    slo = np.sum(lo, axis=axis)
    shi = np.sum(hi, axis=axis)
    elo = _sum_error(np.sum(np.abs(lo), axis=axis), np.count_nonzero(lo, axis=axis))
    ehi = _sum_error(np.sum(np.abs(hi), axis=axis), np.count_nonzero(hi, axis=axis))
    out_lo = np.where(elo == 0, slo, _down(slo - elo))
    out_hi = np.where(ehi == 0, shi, _up(shi + ehi))
    return out_lo, out_hi


def _kmatmul(alo, ahi, blo, bhi):
    """Interval matrix product over the last two axes (batched)."""
    plo, phi = _kmul(alo[..., :, :, None], ahi[..., :, :, None],
                     blo[..., None, :, :], bhi[..., None, :, :])
    return _ksum(plo, phi, axis=-2)


def _kmatmul_point_left(a, blo, bhi):
    """``a @ [b]`` where ``a`` is a float matrix."""
    plo, phi = _kmul_point(a[..., :, :, None], blo[..., None, :, :], bhi[..., None, :, :])
    return _ksum(plo, phi, axis=-2)


def _kmatmul_point_right(alo, ahi, b):
    """``[a] @ b`` where ``b`` is a float matrix."""
    plo, phi = _kmul_point(b[..., None, :, :], alo[..., :, :, None], ahi[..., :, :, None])
    return _ksum(plo, phi, axis=-2)


# ---------------------------------------------------------------------------
# kernel: midpoint-radius (ball) arithmetic for bulk Taylor recursions
#
# A ball (m, r) stands for [m - r, m + r].  Midpoints are computed in plain
# round-to-nearest; radii are computed so that they bound (i) the exact
# spread of the operation over the input balls, (ii) the rounding error of
# the midpoint, and (iii) the rounding error of the radius formula itself.
# (iii) is handled by multiplying with a factor 1 + c*u whose c dominates the
# number of roundings, then stepping one ulp up.  Underflow is covered by an
# additive ``_ETA`` per product whose factors are both nonzero, so exact zeros
# stay exact.
# ---------------------------------------------------------------------------

_ETA = 4 * _TINY


def _ball_from_interval(lo, hi):
    m = 0.5 * lo + 0.5 * hi
    d = np.maximum(hi - m, m - lo)
    # a float difference is zero only for equal operands, so exact points stay exact
    return m, np.where(d == 0, 0.0, _up(d))


def _ball_to_interval(m, r):
    lo = np.where(r == 0, m, _down(m - r))
    hi = np.where(r == 0, m, _up(m + r))
    return lo, hi


def _bdot(m1, r1, m2, r2, axis):
    """Ball enclosure of sum over ``axis`` of products of balls (broadcasting)."""
    t = m1 * m2
    n = t.shape[axis]
    m = np.sum(t, axis=axis)
    am1 = np.abs(m1)
    spread = np.sum(am1 * r2 + r1 * (np.abs(m2) + r2), axis=axis)
    absum = np.sum(np.abs(t), axis=axis)
    nz = np.sum(((am1 + r1) > 0) & ((np.abs(m2) + r2) > 0), axis=axis)
    r = spread * (1.0 + (3 * n + 8) * _U) + absum * ((n + 2) * 1.02 * _U) + nz * _ETA
    r = np.where(r == 0, 0.0, _up(r * (1.0 + 8 * _U)))
    return m, r


def _badd(m1, r1, m2, r2):
    m = m1 + m2
    r = (r1 + r2) + np.abs(m) * _U
    r = np.where(r == 0, 0.0, _up(r * (1.0 + 4 * _U)))
    return m, r


def _bdiv_int(m1, r1, k: int):
    """Divide a ball by a positive integer ``k``."""
    m = m1 / k
    r = r1 / k + np.abs(m) * _U
    r = _up(r * (1.0 + 4 * _U)) + _ETA
    return m, np.where((m1 == 0) & (r1 == 0), 0.0, r)


# ---------------------------------------------------------------------------
# rigorous exp
# ---------------------------------------------------------------------------

_EXP_MAX_ARG = 700.0
_IVX = mpmath.ctx_iv.MPIntervalContext()
_IVX.prec = 80


def _exp_bounds_point(x: float) -> tuple[float, float]:
    """Rigorous lower/upper bounds on e^x for a float x with |x| <= 700.

    mpmath's interval exp at 80 bits, rounded outward to doubles.
    """
    if x == 0.0:
        return 1.0, 1.0
    if not math.isfinite(x) or abs(x) > _EXP_MAX_ARG:
        raise ValueError(f"exp argument {x!r} outside supported range")
    v = _IVX.exp(_IVX.mpf(x))
    lo, hi = float(v.a), float(v.b)
    if lo > v.a:
        lo = float(np.nextafter(lo, -np.inf))
    if hi < v.b:
        hi = float(np.nextafter(hi, np.inf))
    return max(lo, 0.0), hi


def exp_scalar(x: float) -> "Interval":
    """Enclosure of e^x for a single float ``x``."""
    lo, hi = _exp_bounds_point(float(x))
    return Interval(lo, hi)


# ---------------------------------------------------------------------------
# the Interval type
# ---------------------------------------------------------------------------


def _raw(lo, hi) -> "Interval":
    obj = object.__new__(Interval)
    obj.lo = lo
    obj.hi = hi
    return obj


class Interval:
    """Array of closed intervals ``[lo, hi]`` with outward-rounded arithmetic.

    ``Interval(lo, hi)`` validates ``lo <= hi`` elementwise (and rejects NaN);
    ``Interval(x)`` is the degenerate enclosure of the float(s) ``x``.
    Arithmetic with plain numbers or numpy arrays treats them as exact points.
    """

    __slots__ = ("lo", "hi")
    __array_priority__ = 1000

    def __init__(self, lo, hi=None):
        lo_a = np.array(lo, dtype=np.float64)
        hi_a = lo_a.copy() if hi is None else np.array(hi, dtype=np.float64)
        lo_a, hi_a = np.broadcast_arrays(lo_a, hi_a)
        lo_a = np.array(lo_a)
        hi_a = np.array(hi_a)
        if np.isnan(lo_a).any() or np.isnan(hi_a).any():
            raise EmptyIntervalError("NaN endpoint")
        if np.any(lo_a > hi_a):
            raise EmptyIntervalError("interval with lo > hi")
        self.lo = lo_a
        self.hi = hi_a

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_mid_rad(cls, mid, rad) -> "Interval":
        """Enclosure of ``[mid - rad, mid + rad]`` (computed outward)."""
        mid = np.asarray(mid, dtype=float)
        rad = np.asarray(rad, dtype=float)
        if np.any(rad < 0):
            raise EmptyIntervalError("negative radius")
        lo, _ = _ksub(mid, mid, rad, rad)
        _, hi = _kadd(mid, mid, rad, rad)
        return _raw(lo, hi)

    @classmethod
    def stack(cls, items: Sequence["Interval"], axis: int = 0) -> "Interval":
        items = [as_interval(i) for i in items]
        return _raw(np.stack([i.lo for i in items], axis=axis),
                    np.stack([i.hi for i in items], axis=axis))

    @classmethod
    def concatenate(cls, items: Sequence["Interval"], axis: int = 0) -> "Interval":
        items = [as_interval(i) for i in items]
        return _raw(np.concatenate([i.lo for i in items], axis=axis),
                    np.concatenate([i.hi for i in items], axis=axis))

    @classmethod
    def zeros(cls, shape) -> "Interval":
        return _raw(np.zeros(shape), np.zeros(shape))

    # -- array-like protocol ---------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.lo.shape

    @property
    def ndim(self) -> int:
        return self.lo.ndim

    def __len__(self) -> int:
        return len(self.lo)

    def __getitem__(self, idx) -> "Interval":
        return _raw(self.lo[idx], self.hi[idx])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def reshape(self, *shape) -> "Interval":
        return _raw(self.lo.reshape(*shape), self.hi.reshape(*shape))

    @property
    def T(self) -> "Interval":
        return _raw(self.lo.T, self.hi.T)

    def transpose(self, *axes) -> "Interval":
        return _raw(self.lo.transpose(*axes), self.hi.transpose(*axes))

    def copy(self) -> "Interval":
        return _raw(self.lo.copy(), self.hi.copy())

    def with_item(self, idx, value) -> "Interval":
        """Functional update: a copy with ``self[idx] = value``."""
        v = as_interval(value)
        lo = self.lo.copy()
        hi = self.hi.copy()
        lo[idx] = v.lo
        hi[idx] = v.hi
        return _raw(lo, hi)

    # -- metrics -----------------------------------------------------------------

    def mid(self) -> np.ndarray:
        m = 0.5 * self.lo + 0.5 * self.hi
        return np.where(np.isfinite(m), m, 0.5 * (self.lo + self.hi))

    def rad(self) -> np.ndarray:
        """Upper bound on the radius about :meth:`mid`."""
        m = self.mid()
        return _up(np.maximum(self.hi - m, m - self.lo))

    def width(self) -> np.ndarray:
        return _up(self.hi - self.lo)

    def mag(self) -> np.ndarray:
        """max |x| over the interval."""
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def mig(self) -> np.ndarray:
        """min |x| over the interval (0 if it contains 0)."""
        m = np.minimum(np.abs(self.lo), np.abs(self.hi))
        return np.where((self.lo <= 0) & (self.hi >= 0), 0.0, m)

    def abs(self) -> "Interval":
        return _raw(self.mig(), self.mag())

    # -- set relations -------------------------------------------------------------

    def contains(self, x) -> np.ndarray | bool:
        """Elementwise: is the point/interval ``x`` inside ``self``?"""
        if isinstance(x, Interval):
            r = (self.lo <= x.lo) & (x.hi <= self.hi)
        else:
            x = np.asarray(x, dtype=float)
            r = (self.lo <= x) & (x <= self.hi)
        return r

    def subset(self, other: "Interval") -> bool:
        """All elements of ``self`` inside ``other``."""
        other = as_interval(other)
        return bool(np.all((other.lo <= self.lo) & (self.hi <= other.hi)))

    def interior_subset(self, other: "Interval") -> bool:
        other = as_interval(other)
        return bool(np.all((other.lo < self.lo) & (self.hi < other.hi)))

    def overlaps(self, other: "Interval") -> bool:
        other = as_interval(other)
        return bool(np.all((self.lo <= other.hi) & (other.lo <= self.hi)))

    def hull(self, other) -> "Interval":
        other = as_interval(other)
        return _raw(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def intersect(self, other) -> "Interval":
        other = as_interval(other)
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(lo > hi):
            raise EmptyIntervalError("empty intersection")
        return _raw(lo, hi)

    def is_point(self) -> bool:
        return bool(np.all(self.lo == self.hi))

    def __eq__(self, other) -> bool:  # structural equality
        if not isinstance(other, Interval):
            return NotImplemented
        return bool(self.lo.shape == other.lo.shape
                    and np.array_equal(self.lo, other.lo)
                    and np.array_equal(self.hi, other.hi))

    __hash__ = None  # type: ignore[assignment]

    # -- arithmetic -----------------------------------------------------------------

    def __neg__(self) -> "Interval":
        return _raw(-self.hi, -self.lo)

    def __pos__(self) -> "Interval":
        return self

    def __add__(self, other) -> "Interval":
        o = as_interval(other)
        return _raw(*_kadd(self.lo, self.hi, o.lo, o.hi))

    __radd__ = __add__

    def __sub__(self, other) -> "Interval":
        o = as_interval(other)
        return _raw(*_ksub(self.lo, self.hi, o.lo, o.hi))

    def __rsub__(self, other) -> "Interval":
        return as_interval(other) - self

    def __mul__(self, other) -> "Interval":
        if isinstance(other, Interval):
            return _raw(*_kmul(self.lo, self.hi, other.lo, other.hi))
        a = np.asarray(other, dtype=float)
        return _raw(*_kmul_point(a, self.lo, self.hi))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Interval":
        o = as_interval(other)
        return _raw(*_kdiv(self.lo, self.hi, o.lo, o.hi))

    def __rtruediv__(self, other) -> "Interval":
        return as_interval(other) / self

    def __pow__(self, n: int) -> "Interval":
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise ValueError("only non-negative integer powers are supported")
        return _ipow(self, int(n))

    def sqr(self) -> "Interval":
        return _raw(*_ksqr(self.lo, self.hi))

    def sqrt(self) -> "Interval":
        return _raw(*_ksqrt(self.lo, self.hi))

    def exp(self) -> "Interval":
        lo = np.empty(self.shape)
        hi = np.empty(self.shape)
        for idx in np.ndindex(self.shape):
            lo[idx] = _exp_bounds_point(float(self.lo[idx]))[0]
            hi[idx] = _exp_bounds_point(float(self.hi[idx]))[1]
        return _raw(lo, hi)

    def __matmul__(self, other) -> "Interval":
        return matmul(self, other)

    def __rmatmul__(self, other) -> "Interval":
        return matmul(other, self)

    def sum(self, axis=None) -> "Interval":
        if axis is None:
            return _raw(*_ksum(self.lo.reshape(-1), self.hi.reshape(-1), axis=0))
        return _raw(*_ksum(self.lo, self.hi, axis=axis))

    # -- display ---------------------------------------------------------------------

    def __repr__(self) -> str:
        if self.ndim == 0:
            return f"Interval([{float(self.lo)!r}, {float(self.hi)!r}])"
        return f"Interval(lo={self.lo!r}, hi={self.hi!r})"

    def __float__(self) -> float:
        if self.ndim != 0 or self.lo != self.hi:
            raise TypeError("only degenerate scalar intervals convert to float")
        return float(self.lo)


IVec = Interval
IMat = Interval


def _ipow(x: Interval, n: int) -> Interval:
    if n == 0:
        return _raw(np.ones(x.shape), np.ones(x.shape))
    if n == 1:
        return x
    half = _ipow(x, n // 2).sqr()
    return half if n % 2 == 0 else half * x


def as_interval(x) -> Interval:
    """Coerce numbers/arrays to a degenerate interval; intervals pass through."""
    if isinstance(x, Interval):
        return x
    a = np.asarray(x, dtype=np.float64)
    return _raw(a, a)


def hull(items: Iterable[Interval]) -> Interval:
    it = iter(items)
    out = as_interval(next(it))
    for x in it:
        out = out.hull(x)
    return out


def eye(n: int) -> Interval:
    return as_interval(np.eye(n))


def arith(op: str, a, b) -> Interval:
    """Apply ``op`` in {'+', '-', '*', '/'} (or the unicode forms) to ``a`` and ``b``."""
    a = as_interval(a)
    b = as_interval(b)
    if op == "+":
        return a + b
    if op in ("-", "−"):
        return a - b
    if op in ("*", "×"):
        return a * b
    if op in ("/", "÷"):
        return a / b
    raise ValueError(f"unknown operation {op!r}")


def matmul(a, b) -> Interval:
    """Interval matrix (or matrix-vector) product with rigorous summation."""
    a_iv = isinstance(a, Interval)
    b_iv = isinstance(b, Interval)
    A = a if a_iv else np.asarray(a, dtype=float)
    B = b if b_iv else np.asarray(b, dtype=float)
    vec = (B.ndim == 1)
    if vec:
        B = B.reshape(-1, 1) if not b_iv else B.reshape(-1, 1)
    if a_iv and b_iv:
        lo, hi = _kmatmul(A.lo, A.hi, B.lo, B.hi)
    elif a_iv:
        lo, hi = _kmatmul_point_right(A.lo, A.hi, B)
    elif b_iv:
        lo, hi = _kmatmul_point_left(A, B.lo, B.hi)
    else:
        lo, hi = _kmatmul_point_left(A, B, B)
    out = _raw(lo, hi)
    if vec:
        out = out.reshape(out.shape[:-1])
    return out


def _fraction_to_interval(q: Fraction) -> tuple[float, float]:
    f = float(q)  # correctly rounded
    fq = Fraction(f)
    if fq == q:
        return f, f
    if fq < q:
        return f, float(np.nextafter(f, _INF))
    return float(np.nextafter(f, -_INF)), f


def decimal_interval(text: str | Fraction | int) -> Interval:
    """Tightest binary64 enclosure of an exact decimal (or rational) value.

    ``decimal_interval("0.1")`` is the one-ulp interval straddling 1/10 and
    ``decimal_interval("0.5")`` is the point 0.5.
    """
    q = text if isinstance(text, Fraction) else Fraction(str(text).strip())
    lo, hi = _fraction_to_interval(q)
    return Interval(lo, hi)


# ---------------------------------------------------------------------------
# norms and spectral bounds (Euclidean)
# ---------------------------------------------------------------------------


def euclid_norm_sup(v: Interval) -> Interval:
    """Enclosure ``[inf ||x||, sup ||x||]`` of the Euclidean norm over ``v``.

    The last axis is the vector axis; leading axes are batched.
    """
    v = as_interval(v)
    mag = v.mag()
    mig = v.mig()
    slo, shi = _ksqr(mig, mig)
    _, top = _ksum(*_ksqr(mag, mag), axis=-1)
    bot, _ = _ksum(slo, shi, axis=-1)
    lo, _ = _ksqrt(np.maximum(bot, 0.0), np.maximum(bot, 0.0))
    _, hi = _ksqrt(top, top)
    return _raw(lo, hi)


def _inverse_enclosure_orthogonal(V: np.ndarray) -> Interval:
    """Rigorous enclosure of V^{-1} for a numerically orthogonal float V."""
    n = V.shape[0]
    M = V.T
    E = eye(n) - matmul(M, V)  # V^{-1} = (I - E)^{-1} M
    delta = float(np.max(np.sum(E.mag(), axis=1)))
    if not delta < 0.5:
        raise ArithmeticError("matrix is not close enough to orthogonal")
    tail = float(_up(np.float64(delta * delta / (1.0 - delta)) * (1 + 1e-10)))
    corr = eye(n) + E + Interval(np.full((n, n), -tail), np.full((n, n), tail))
    return matmul(corr, as_interval(M))


def spectral_bounds(S: Interval, precondition: bool = False) -> tuple[float, float]:
    """Gershgorin bounds ``(lam_min_lower, lam_max_upper)`` valid for every
    symmetric matrix in the interval hull ``S``.

    With ``precondition=True`` the discs are taken after an approximate
    orthogonal diagonalisation ``V^{-1} S V`` of the midpoint, where ``V^{-1}``
    is enclosed rigorously; this leaves the spectrum unchanged and shrinks
    the discs to the width of ``S`` for nearly point matrices.
    """
    S = as_interval(S)
    n = S.shape[-1]
    if precondition and n > 1:
        Sm = S.mid()
        Sm = 0.5 * (Sm + Sm.T)
        _, V = np.linalg.eigh(Sm)
        G = matmul(matmul(_inverse_enclosure_orthogonal(V), S), V)
    else:
        G = S
    off = G.mag().copy()
    np.fill_diagonal(off, 0.0)
    # radius_i = sum_j |G_ij| rounded up (nonnegative terms)
    rad = _ksum(off, off, axis=1)[1]
    diag_lo = np.diag(G.lo)
    diag_hi = np.diag(G.hi)
    upper = np.max(_round_sum_hi(diag_hi, rad))
    lower = np.min(_round_sum_lo(diag_lo, -rad))
    return float(lower), float(upper)


def _sym_part(A: Interval) -> Interval:
    A = as_interval(A)
    s = A + A.T
    return _raw(s.lo * 0.5, s.hi * 0.5)  # halving is exact barring underflow


def log_norm_upper(A, precondition: bool = False) -> Interval:
    """Enclosure of the Euclidean logarithmic norm l(M) over the hull ``A``.

    ``hi`` is the largest Gershgorin bound for the symmetric part; ``lo`` is
    the largest lower endpoint of its diagonal (a Rayleigh quotient bound).
    """
    A = as_interval(A)
    S = _sym_part(A)
    _, upper = spectral_bounds(S, precondition=precondition)
    lower = float(np.max(np.diag(S.lo)))
    return Interval(min(lower, upper), upper)


def m_l_lower(A, precondition: bool = False) -> Interval:
    """Enclosure of m_l(M) = -l(-M) over the hull ``A``; ``lo`` is rigorous."""
    r = log_norm_upper(-as_interval(A), precondition=precondition)
    return -r


def _gram(A: Interval) -> Interval:
    A = as_interval(A)
    return matmul(A.T, A)


def op_norm_upper(A) -> Interval:
    """Enclosure of the Euclidean operator norm over the hull ``A``.

    ``hi`` comes from a preconditioned Gershgorin bound on A^T A, ``lo`` from
    the smallest possible column length.
    """
    A = as_interval(A)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    G = _gram(A)
    _, top = spectral_bounds(G, precondition=True)
    top = max(top, 0.0)
    hi = float(_ksqrt(np.float64(top), np.float64(top))[1])
    col = euclid_norm_sup(A.T)
    lo = float(np.max(col.lo))
    return Interval(min(lo, hi), hi)


def m_lower(A) -> Interval:
    """Enclosure of m(M) (smallest singular value, clamped at 0) over ``A``."""
    A = as_interval(A)
    G = _gram(A)
    bot, _ = spectral_bounds(G, precondition=True)
    bot = max(bot, 0.0)
    lo = float(_ksqrt(np.float64(bot), np.float64(bot))[0])
    col = euclid_norm_sup(A.T)
    hi = float(np.min(col.hi))
    return Interval(lo, max(lo, hi))
