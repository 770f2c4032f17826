"""Taylor coefficients of polynomial ODE solutions by recursive differentiation.

For ``x' = f(x)`` with polynomial ``f`` the normalised coefficients
``x_k = x^{(k)}(0) / k!`` satisfy ``x_{k+1} = f_k / (k + 1)`` where ``f_k`` is
the k-th coefficient of ``f(x(t))``.  Every monomial of ``f`` is built from a
smaller monomial times one variable, so its coefficients follow from a Cauchy
product over already known coefficients.  Nodes are grouped by degree and
each group is processed with one vectorised ball-arithmetic Cauchy product.

Optionally every coefficient also carries its gradient with respect to the
initial condition (a first-order jet on top of the Taylor jet).  The gradient
part of coefficient k is the k-th Taylor coefficient of the variational
solution, which the Lohner step needs for the Jacobian of the Taylor map.
"""

from __future__ import annotations

import mpmath
import numpy as np

from .interval import (
    Interval,
    _badd,
    _ball_from_interval,
    _ball_to_interval,
    _bdiv_int,
    _bdot,
    _raw,
    as_interval,
)
from .system import PolyField


class TaylorEngine:
    """Precompiled recursion for one PolyField (parameters are constant states)."""

    def __init__(self, field: PolyField):
        self.field = field
        self.d = field.dimension
        self.n = field.n_vars
        exps = [tuple(int(v) for v in e) for e in field.rhs.exponents]
        n = self.n
        node_of: dict[tuple[int, ...], int] = {}
        for j in range(n):
            e = [0] * n
            e[j] = 1
            node_of[tuple(e)] = j
        const = tuple([0] * n)
        node_of[const] = n
        parents: dict[int, tuple[int, int]] = {}
        degree: dict[int, int] = {}

        def ensure(e: tuple[int, ...]) -> int:
            if e in node_of:
                return node_of[e]
            j = next(i for i, v in enumerate(e) if v > 0)
            pe = list(e)
            pe[j] -= 1
            pid = ensure(tuple(pe))
            idx = len(node_of)
            node_of[e] = idx
            parents[idx] = (pid, j)
            degree[idx] = sum(e)
            return idx

        self.mono_nodes = np.array([ensure(e) for e in exps], dtype=int)
        self.n_nodes = len(node_of)
        self.const = n
        levels = []
        for deg in sorted(set(degree.values())):
            ids = [q for q, dg in degree.items() if dg == deg]
            levels.append((np.array(ids), np.array([parents[q][0] for q in ids]),
                           np.array([parents[q][1] for q in ids])))
        self.levels = levels
        cm, cr = _ball_from_interval(field.rhs.coeffs.lo, field.rhs.coeffs.hi)
        self.cm = cm
        self.cr = cr

    def _init(self, x: Interval, order: int, jet: bool):
        shape = (self.n_nodes, order + 1) + ((1 + self.n,) if jet else ())
        ms = np.zeros(shape)
        rs = np.zeros(shape)
        xm, xr = _ball_from_interval(x.lo, x.hi)
        if jet:
            ms[: self.n, 0, 0] = xm
            rs[: self.n, 0, 0] = xr
            ms[np.arange(self.n), 0, 1 + np.arange(self.n)] = 1.0
            ms[self.const, 0, 0] = 1.0
        else:
            ms[: self.n, 0] = xm
            rs[: self.n, 0] = xr
            ms[self.const, 0] = 1.0
        return ms, rs

    def coefficients(self, x, order: int) -> Interval:
        """Enclosures of x_0..x_order (shape (n, order+1)) over the box ``x``."""
        x = as_interval(x)
        ms, rs = self._init(x, order, jet=False)
        d = self.d
        for k in range(order):
            for ids, par, var in self.levels:
                m, r = _bdot(ms[par, : k + 1], rs[par, : k + 1],
                             ms[var, k::-1], rs[var, k::-1], axis=1)
                ms[ids, k] = m
                rs[ids, k] = r
            mm = ms[self.mono_nodes, k]
            mr = rs[self.mono_nodes, k]
            fm, fr = _bdot(self.cm, self.cr, mm[None, :], mr[None, :], axis=1)
            ms[:d, k + 1], rs[:d, k + 1] = _bdiv_int(fm, fr, k + 1)
        lo, hi = _ball_to_interval(ms[: self.n], rs[: self.n])
        # x_0 is the box itself; skip the midpoint-radius round trip
        lo[:, 0], hi[:, 0] = x.lo, x.hi
        return _raw(lo, hi)

    def coefficients_with_jacobian(self, x, order: int) -> tuple[Interval, Interval]:
        """Coefficients (n, order+1) and their gradients (n, n, order+1)."""
        x = as_interval(x)
        ms, rs = self._init(x, order, jet=True)
        d = self.d
        for k in range(order):
            for ids, par, var in self.levels:
                pm, pr = ms[par, : k + 1], rs[par, : k + 1]
                vm, vr = ms[var, k::-1], rs[var, k::-1]
                am, ar = _bdot(pm[:, :, :1], pr[:, :, :1], vm, vr, axis=1)
                bm, br = _bdot(pm[:, :, 1:], pr[:, :, 1:], vm[:, :, :1], vr[:, :, :1], axis=1)
                gm, gr = _badd(am[:, 1:], ar[:, 1:], bm, br)
                ms[ids, k, 0] = am[:, 0]
                rs[ids, k, 0] = ar[:, 0]
                ms[ids, k, 1:] = gm
                rs[ids, k, 1:] = gr
            mm = ms[self.mono_nodes, k]
            mr = rs[self.mono_nodes, k]
            fm, fr = _bdot(self.cm[:, :, None], self.cr[:, :, None], mm[None], mr[None], axis=1)
            ms[:d, k + 1], rs[:d, k + 1] = _bdiv_int(fm, fr, k + 1)
        lo, hi = _ball_to_interval(ms[: self.n], rs[: self.n])
        lo[:, 0, 0], hi[:, 0, 0] = x.lo, x.hi
        vals = _raw(lo[:, :, 0], hi[:, :, 0])
        # gradient layout (component, coefficient, variable) -> (component, variable, coefficient)
        jac = _raw(np.ascontiguousarray(lo[:, :, 1:].transpose(0, 2, 1)),
                   np.ascontiguousarray(hi[:, :, 1:].transpose(0, 2, 1)))
        return vals, jac


_IV = mpmath.ctx_iv.MPIntervalContext()
_IV.prec = 113


def _iv_to_interval(values) -> Interval:
    """Round a list of mpmath intervals outward to a float Interval."""
    lo = np.empty(len(values))
    hi = np.empty(len(values))
    for i, v in enumerate(values):
        a, b = v.a, v.b
        fa, fb = float(a), float(b)
        if fa > a:
            fa = np.nextafter(fa, -np.inf)
        if fb < b:
            fb = np.nextafter(fb, np.inf)
        lo[i], hi[i] = fa, fb
    return _raw(lo, hi)


class PointJet:
    """Taylor coefficients at a float point, enclosed in 113-bit interval arithmetic.

    The double-precision ball recursion loses tens of ulps per coefficient,
    which dominates the error of a long integration started near a
    hyperbolic equilibrium.  Evaluating the jet and its Taylor polynomial at
    the (point) expansion center in extended precision confines the rounding
    error of the propagated center to the final rounding back to doubles.
    """

    def __init__(self, engine: "TaylorEngine", x: np.ndarray, order: int):
        iv = _IV
        n, d = engine.n, engine.d
        coeffs = engine.field.rhs.coeffs
        cf = [[iv.mpf([float(coeffs.lo[i, m]), float(coeffs.hi[i, m])]) if coeffs.hi[i, m] != 0
               or coeffs.lo[i, m] != 0 else None for m in range(coeffs.shape[1])] for i in range(d)]
        nodes = [[iv.mpf(float(v))] for v in x]
        nodes += [[iv.one]] + [[] for _ in range(engine.n_nodes - n - 1)]
        flat = [(int(q), int(p), int(v)) for ids, par, var in engine.levels
                for q, p, v in zip(ids, par, var)]
        zero = iv.zero
        for j in range(d, n):
            nodes[j].extend([zero] * order)
        nodes[n].extend([zero] * order)
        for k in range(order):
            for q, p, v in flat:
                cp, cv = nodes[p], nodes[v]
                nodes[q].append(iv.fsum(cp[j] * cv[k - j] for j in range(k + 1)))
            for i in range(d):
                fk = iv.fsum(c * nodes[engine.mono_nodes[m]][k] for m, c in enumerate(cf[i]) if c is not None)
                nodes[i].append(fk / (k + 1))
        self.n = n
        self.order = order
        self._coeffs = [nodes[i][: order + 1] for i in range(n)]

    def mid(self) -> np.ndarray:
        """Float midpoints, shape (n, order+1)."""
        return np.array([[float(c.mid) for c in row] for row in self._coeffs])

    def interval(self) -> Interval:
        """Outward-rounded float enclosures of the coefficients, shape (n, order+1)."""
        rows = [_iv_to_interval(row) for row in self._coeffs]
        return _raw(np.stack([r.lo for r in rows]), np.stack([r.hi for r in rows]))

    def evaluate(self, h: float) -> Interval:
        """Enclosure of sum_k x_k h^k (Horner in extended precision)."""
        hv = _IV.mpf(float(h))
        out = []
        for row in self._coeffs:
            acc = row[-1]
            for c in reversed(row[:-1]):
                acc = acc * hv + c
            out.append(acc)
        return _iv_to_interval(out)
