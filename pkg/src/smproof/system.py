"""Polynomial vector fields used by the proof, their coordinate frames and eigendata.

Fields are stored symbolically as sparse polynomials with interval
coefficients.  Parameters (``a``, and for the separatrix system also
``k = (a+1)/(a+2)``) are extra variables with a box attached; integrators
adjoin them as constant states.  Jacobian polynomials are derived once, by
exact differentiation of the monomials, so that Jacobian hulls over boxes are
plain interval evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .interval import (
    Interval,
    _kmul,
    _ksqr,
    _ksum,
    _raw,
    as_interval,
    decimal_interval,
    matmul,
)

__all__ = [
    "C_ENTRY",
    "EigenData",
    "Frame",
    "PolyField",
    "PolyMap",
    "SingularFrame",
    "extended_sep_field",
    "frame_entry",
    "limit_eigendata",
    "local_frame_C",
    "origin_eigendata",
    "param_convert",
    "reversed_field",
    "sep_frame_P",
    "shimizu_field",
]

# off-diagonal entry of the local coordinate matrix C (its nearest double is used)
C_ENTRY = -0.36706363121968


class SingularFrame(ArithmeticError):
    """The determinant enclosure of a frame matrix contains zero."""


# ---------------------------------------------------------------------------
# sparse polynomials with interval coefficients
# ---------------------------------------------------------------------------

Poly = dict  # exponent tuple -> Interval (0-d)


def _padd(p: Poly, q: Poly) -> Poly:
    out = dict(p)
    for e, c in q.items():
        out[e] = out[e] + c if e in out else c
    return out


def _pscale(p: Poly, c) -> Poly:
    c = as_interval(c)
    if c.lo == 0 and c.hi == 0:
        return {}
    return {e: v * c for e, v in p.items()}


def _pmul(p: Poly, q: Poly) -> Poly:
    out: Poly = {}
    for e1, c1 in p.items():
        for e2, c2 in q.items():
            e = tuple(a + b for a, b in zip(e1, e2))
            v = c1 * c2
            out[e] = out[e] + v if e in out else v
    return out


def _prune(p: Poly) -> Poly:
    return {e: c for e, c in p.items() if not (c.lo == 0 and c.hi == 0)}


def _parse_monomial(term: str, names: Sequence[str]) -> tuple[int, ...]:
    exps = [0] * len(names)
    if term.strip() == "1":
        return tuple(exps)
    for factor in term.split("*"):
        factor = factor.strip()
        if "^" in factor:
            name, power = factor.split("^")
            exps[names.index(name.strip())] += int(power)
        else:
            exps[names.index(factor)] += 1
    return tuple(exps)


def _poly_from_terms(terms: Mapping[str, object], names: Sequence[str]) -> Poly:
    out: Poly = {}
    for term, coef in terms.items():
        e = _parse_monomial(term, names)
        c = coef if isinstance(coef, Interval) else as_interval(float(coef))
        out[e] = out[e] + c if e in out else c
    return _prune(out)


@dataclass(frozen=True)
class PolyMap:
    """A vector of polynomials in ``n_vars`` variables.

    ``exponents`` has shape (M, n_vars); ``coeffs`` is an Interval of shape
    (K, M) holding the coefficient of monomial m in component k.
    """

    n_vars: int
    exponents: np.ndarray
    coeffs: Interval

    @classmethod
    def from_polys(cls, polys: Sequence[Poly], n_vars: int) -> "PolyMap":
        monos = sorted({e for p in polys for e in p})
        if not monos:
            monos = [tuple([0] * n_vars)]
        index = {e: i for i, e in enumerate(monos)}
        lo = np.zeros((len(polys), len(monos)))
        hi = np.zeros((len(polys), len(monos)))
        for k, p in enumerate(polys):
            for e, c in p.items():
                lo[k, index[e]] = float(c.lo)
                hi[k, index[e]] = float(c.hi)
        return cls(n_vars, np.array(monos, dtype=int).reshape(len(monos), n_vars), _raw(lo, hi))

    @property
    def n_out(self) -> int:
        return self.coeffs.shape[0]

    def polys(self) -> list[Poly]:
        out = []
        for k in range(self.n_out):
            p: Poly = {}
            for m, e in enumerate(self.exponents):
                c = self.coeffs[k, m]
                if not (c.lo == 0 and c.hi == 0):
                    p[tuple(int(v) for v in e)] = c
            out.append(p)
        return out

    def monomials(self, x: Interval) -> Interval:
        """Interval values of all monomials at ``x`` (shape (..., n_vars) -> (..., M))."""
        x = as_interval(x)
        batch = x.shape[:-1]
        M = self.exponents.shape[0]
        lo = np.ones(batch + (M,))
        hi = np.ones(batch + (M,))
        for j in range(self.n_vars):
            ej = self.exponents[:, j]
            if not ej.any():
                continue
            xl = x.lo[..., j]
            xh = x.hi[..., j]
            # power table up to the max exponent used for variable j
            pmax = int(ej.max())
            plo = [np.ones(batch), xl]
            phi = [np.ones(batch), xh]
            for p in range(2, pmax + 1):
                if p % 2 == 0:
                    l2, h2 = _ksqr(plo[p // 2], phi[p // 2])
                else:
                    l2, h2 = _kmul(plo[p - 1], phi[p - 1], xl, xh)
                plo.append(l2)
                phi.append(h2)
            tl = np.stack(plo, axis=-1)[..., ej]
            th = np.stack(phi, axis=-1)[..., ej]
            # multiplying by an exact 1 must not widen: only touch used columns
            used = ej > 0
            nl, nh = _kmul(lo[..., used], hi[..., used], tl[..., used], th[..., used])
            lo[..., used] = nl
            hi[..., used] = nh
        return _raw(lo, hi)

    def __call__(self, x) -> Interval:
        mono = self.monomials(as_interval(x))
        plo, phi = _kmul(self.coeffs.lo, self.coeffs.hi, mono.lo[..., None, :], mono.hi[..., None, :])
        return _raw(*_ksum(plo, phi, axis=-1))

    def eval_float(self, x: np.ndarray) -> np.ndarray:
        """Non-rigorous float evaluation (midpoint coefficients), batched."""
        x = np.asarray(x, dtype=float)
        mono = np.prod(x[..., None, :] ** self.exponents, axis=-1)
        return mono @ self.coeffs.mid().T

    def derivative(self) -> "PolyMap":
        """Jacobian as a PolyMap with ``n_out * n_vars`` components (row-major)."""
        polys = self.polys()
        out = []
        for p in polys:
            for j in range(self.n_vars):
                d: Poly = {}
                for e, c in p.items():
                    if e[j] == 0:
                        continue
                    e2 = list(e)
                    e2[j] -= 1
                    e2 = tuple(e2)
                    v = c * float(e[j])
                    d[e2] = d[e2] + v if e2 in d else v
                out.append(d)
        return PolyMap.from_polys(out, self.n_vars)

    def negated(self) -> "PolyMap":
        return PolyMap(self.n_vars, self.exponents, -self.coeffs)


@dataclass(frozen=True)
class PolyField:
    """Parameterised polynomial vector field ``x' = f(x, params)``.

    ``rhs`` is a PolyMap over ``dimension + len(param_names)`` variables,
    state first, parameters last.
    """

    name: str
    dimension: int
    state_names: tuple[str, ...]
    param_names: tuple[str, ...]
    parameter_box: Interval
    rhs: PolyMap
    jac: PolyMap = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "jac", self.rhs.derivative())
        if self.rhs.n_out != self.dimension:
            raise ValueError("rhs components must match the dimension")

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    @property
    def n_vars(self) -> int:
        return self.dimension + self.n_params

    def _full(self, x, params) -> Interval:
        x = as_interval(x)
        p = self.parameter_box if params is None else as_interval(params)
        if p.ndim == 0:
            p = p.reshape(1)
        p = _raw(np.broadcast_to(p.lo, x.shape[:-1] + p.shape[-1:]),
                 np.broadcast_to(p.hi, x.shape[:-1] + p.shape[-1:]))
        return Interval.concatenate([x, p], axis=-1)

    def evaluate(self, x, params=None) -> Interval:
        """Enclosure of f over the box ``x`` for all parameters in ``params``."""
        return self.rhs(self._full(x, params))

    def jacobian(self, x, params=None) -> Interval:
        """Interval hull of the state Jacobian over the box ``x``."""
        full = self.jac(self._full(x, params))
        shp = full.shape[:-1] + (self.dimension, self.n_vars)
        return full.reshape(shp)[..., :, : self.dimension]

    def with_parameters(self, params) -> "PolyField":
        p = as_interval(params)
        return PolyField(self.name, self.dimension, self.state_names, self.param_names,
                         p.reshape(self.n_params), self.rhs)

    def conjugate(self, frame: "Frame", name: str | None = None) -> "PolyField":
        """Field ``g(p) = M^{-1} f(M p)`` in the coordinates of ``frame``."""
        d, n = self.dimension, self.n_vars
        M = frame.matrix
        if not M.is_point():
            raise ValueError("conjugation needs a point frame matrix")
        Mf = M.lo
        # linear forms for the original state variables, parameters unchanged
        subs: list[Poly] = []
        for i in range(d):
            form: Poly = {}
            for l in range(d):
                if Mf[i, l] != 0:
                    e = [0] * n
                    e[l] = 1
                    form[tuple(e)] = as_interval(Mf[i, l])
            subs.append(form)
        for j in range(d, n):
            e = [0] * n
            e[j] = 1
            subs.append({tuple(e): as_interval(1.0)})
        one = {tuple([0] * n): as_interval(1.0)}
        powers: dict[tuple[int, int], Poly] = {}

        def power(j: int, k: int) -> Poly:
            if k == 0:
                return one
            if (j, k) not in powers:
                powers[(j, k)] = _pmul(power(j, k - 1), subs[j])
            return powers[(j, k)]

        images: list[Poly] = []
        for p in self.rhs.polys():
            acc: Poly = {}
            for e, c in p.items():
                term: Poly = {tuple([0] * n): c}
                for j, k in enumerate(e):
                    if k:
                        term = _pmul(term, power(j, k))
                acc = _padd(acc, term)
            images.append(acc)
        Minv = frame.inverse
        out: list[Poly] = []
        for i in range(d):
            acc = {}
            for j in range(d):
                acc = _padd(acc, _pscale(images[j], Minv[i, j]))
            out.append(_prune(acc))
        rhs = PolyMap.from_polys(out, n)
        return PolyField(name or f"{self.name}@local", d, self.state_names,
                         self.param_names, self.parameter_box, rhs)


def reversed_field(f: PolyField) -> PolyField:
    """The time-reversed field ``p' = -f(p)``."""
    suffix = "[reversed]"
    name = f.name[: -len(suffix)] if f.name.endswith(suffix) else f.name + suffix
    return PolyField(name, f.dimension, f.state_names, f.param_names, f.parameter_box,
                     f.rhs.negated())


# ---------------------------------------------------------------------------
# concrete fields
# ---------------------------------------------------------------------------

_SM_NAMES = ("X", "Y", "Z")


def shimizu_field(a) -> PolyField:
    """X' = Y,  Y' = (a+1)(1-Z)X - aY,  Z' = -Z + X^2 with a in the box ``a``."""
    a = as_interval(a).reshape(())
    if not a.lo > 0:
        raise ValueError("the parameter a must be positive")
    names = _SM_NAMES + ("a",)
    polys = [
        _poly_from_terms({"Y": 1}, names),
        _poly_from_terms({"a*X": 1, "X": 1, "a*Z*X": -1, "Z*X": -1, "a*Y": -1}, names),
        _poly_from_terms({"Z": -1, "X^2": 1}, names),
    ]
    return PolyField("shimizu-morioka", 3, _SM_NAMES, ("a",), a.reshape(1),
                     PolyMap.from_polys(polys, 4))


_SEP_NAMES = ("X", "Y", "Z", "g1", "g2", "g3")


def sep_parameter_box(a0) -> Interval:
    """Box for the parameters (a, k) with k = (a+1)/(a+2) enclosed over a0."""
    a0 = as_interval(a0).reshape(())
    k = (a0 + 1.0) / (a0 + 2.0)
    # (a+1)/(a+2) is increasing in a, so evaluating at the endpoints is tighter
    klo = (as_interval(a0.lo) + 1.0) / (as_interval(a0.lo) + 2.0)
    khi = (as_interval(a0.hi) + 1.0) / (as_interval(a0.hi) + 2.0)
    k = Interval(klo.lo, khi.hi).intersect(k)
    return Interval.stack([a0, k])


def extended_sep_field(a0) -> PolyField:
    """Base Shimizu-Morioka state coupled with the linearised area dynamics.

    State (X, Y, Z, g1, g2, g3) with g' = (A + B(X, Z)) g, where
    A = diag(0, -(a+2), -a) and, writing k = (a+1)/(a+2),

        B = [[-kZ, kZ, -2(1-k)X],
             [-kZ, kZ, -2(1-k)X],
             [-(a+1)X, (a+1)X, 0]].

    ``k`` is an independent parameter whose box encloses (a+1)/(a+2) over a0;
    this keeps the field polynomial.
    """
    pbox = sep_parameter_box(a0)
    if not pbox[0].lo > 0:
        raise ValueError("the parameter a must be positive")
    names = _SEP_NAMES + ("a", "k")
    cross = {"k*Z*g1": -1, "k*Z*g2": 1, "X*g3": -2, "k*X*g3": 2}
    polys = [
        _poly_from_terms({"Y": 1}, names),
        _poly_from_terms({"a*X": 1, "X": 1, "a*Z*X": -1, "Z*X": -1, "a*Y": -1}, names),
        _poly_from_terms({"Z": -1, "X^2": 1}, names),
        _poly_from_terms(cross, names),
        _poly_from_terms({**cross, "a*g2": -1, "g2": -2}, names),
        _poly_from_terms({"a*g3": -1, "a*X*g1": -1, "X*g1": -1, "a*X*g2": 1, "X*g2": 1}, names),
    ]
    return PolyField("separatrix-extended", 6, _SEP_NAMES, ("a", "k"), pbox,
                     PolyMap.from_polys(polys, 8))


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Frame:
    """A 3x3 change of coordinates (X, Y, Z) = M p with an enclosed inverse."""

    matrix: Interval
    inverse: Interval

    @classmethod
    def from_matrix(cls, M) -> "Frame":
        return cls(as_interval(M), adjugate_inverse(as_interval(M)))

    def residual(self) -> Interval:
        return matmul(self.matrix, self.inverse)


def adjugate_inverse(M: Interval) -> Interval:
    """Inverse of a 3x3 interval matrix by cofactors over the determinant."""
    m = [[M[i, j] for j in range(3)] for i in range(3)]

    def cof(i, j):
        r = [x for x in range(3) if x != i]
        c = [x for x in range(3) if x != j]
        minor = m[r[0]][c[0]] * m[r[1]][c[1]] - m[r[0]][c[1]] * m[r[1]][c[0]]
        return minor if (i + j) % 2 == 0 else -minor

    cofs = [[cof(i, j) for j in range(3)] for i in range(3)]
    det = m[0][0] * cofs[0][0] + m[0][1] * cofs[0][1] + m[0][2] * cofs[0][2]
    if det.lo <= 0 <= det.hi:
        raise SingularFrame("determinant interval contains zero")
    rows = [Interval.stack([cofs[j][i] / det for j in range(3)]) for i in range(3)]
    return Interval.stack(rows)


def frame_entry(a) -> float:
    """Off-diagonal entry -1/(1+a) of C at the midpoint of ``a``, to 14 digits.

    For the homoclinic bracket this is exactly :data:`C_ENTRY`; other
    parameter ranges need their own eigenvector approximation, otherwise the
    rate conditions of the block fail for reasons unrelated to the dynamics.
    """
    m = float(as_interval(a).reshape(-1).mid()[0])
    return float(f"{-1.0 / (1.0 + m):.14g}")


def local_frame_C(entry: float = C_ENTRY) -> Frame:
    """Frame whose columns are approximate eigenvectors of the saddle.

    Coordinates (x, y1, y2): x unstable (eigenvalue 1), y1 strongly stable
    (-(1+a)), y2 weakly stable (-1).  ``entry`` is the (1, 2) element.
    """
    C = np.array([[1.0, float(entry), 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    return Frame.from_matrix(C)


def sep_frame_P(a0) -> Frame:
    """P = [[1, a0+1, 0], [-1, 1, 0], [0, 0, 1]]: eigenvectors of the limit system."""
    a0 = as_interval(a0).reshape(())
    one = as_interval(1.0)
    zero = as_interval(0.0)
    P = Interval.stack([
        Interval.stack([one, a0 + 1.0, zero]),
        Interval.stack([-one, one, zero]),
        Interval.stack([zero, zero, one]),
    ])
    return Frame.from_matrix(P)


# ---------------------------------------------------------------------------
# eigendata and parameter conversion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EigenData:
    matrix: Interval
    eigenvalues: Interval  # shape (3,)
    eigenvectors: Interval  # shape (3, 3), columns are eigenvectors

    def residuals(self) -> list[Interval]:
        out = []
        for i in range(3):
            v = self.eigenvectors[:, i]
            out.append(matmul(self.matrix, v) - self.eigenvalues[i] * v)
        return out


def origin_eigendata(a) -> EigenData:
    """Linearisation of the Shimizu-Morioka field at the origin."""
    a = as_interval(a).reshape(())
    zero, one = as_interval(0.0), as_interval(1.0)
    a1 = a + 1.0
    M = Interval.stack([
        Interval.stack([zero, one, zero]),
        Interval.stack([a1, -a, zero]),
        Interval.stack([zero, zero, -one]),
    ])
    vals = Interval.stack([-one, one, -a1])
    vecs = Interval.stack([
        Interval.stack([zero, one, -(one / a1)]),
        Interval.stack([zero, one, one]),
        Interval.stack([one, zero, zero]),
    ])
    return EigenData(M, vals, vecs)


def limit_matrix(a0) -> Interval:
    """Matrix of the linearised area system along the equilibrium (B = 0)."""
    a0 = as_interval(a0).reshape(())
    zero = as_interval(0.0)
    a1 = a0 + 1.0
    return Interval.stack([
        Interval.stack([-a1, -a1, zero]),
        Interval.stack([-as_interval(1.0), -as_interval(1.0), zero]),
        Interval.stack([zero, zero, -a0]),
    ])


def limit_eigendata(a0) -> EigenData:
    """Eigendata 0, -(a0+2), -a0 with v0 = (1,-1,0), (1+a0, 1, 0), (0, 0, 1)."""
    a0 = as_interval(a0).reshape(())
    zero, one = as_interval(0.0), as_interval(1.0)
    vals = Interval.stack([zero, -(a0 + 2.0), -a0])
    vecs = Interval.stack([
        Interval.stack([one, a0 + 1.0, zero]),
        Interval.stack([-one, one, zero]),
        Interval.stack([zero, zero, one]),
    ])
    return EigenData(limit_matrix(a0), vals, vecs)


def param_convert(a) -> tuple[Interval, Interval]:
    """alpha = 1/sqrt(a+1) and lambda = alpha * a for the rescaled family."""
    a = as_interval(a)
    if np.any(a.lo < 0):
        raise ValueError("a must be non-negative")
    alpha = 1.0 / (a + 1.0).sqrt()
    lam = alpha * a
    return alpha, lam


def parse_parameter(text: str) -> Interval:
    """Exact decimal to enclosure; convenience re-export for configs."""
    return decimal_interval(text)
