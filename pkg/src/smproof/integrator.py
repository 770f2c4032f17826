"""Validated integration of polynomial ODEs (Taylor method, Lohner QR form).

The set of states is carried as ``center + basis @ radius`` with a float
center, a float (nearly orthogonal) basis and an interval vector ``radius``.
One step of size ``h``:

1. a rough enclosure ``Z`` with ``sum_k [0,h]^k x_k(X) + [0,h^{p+1}] x_{p+1}(Z) ⊆ Z``
   is found and checked, so every solution starting in the current hull ``X``
   stays in ``Z`` on ``[0, h]`` (this box is recorded as the tube segment);
2. the Taylor polynomial of order ``p`` is evaluated at the center, the
   Lagrange remainder ``h^{p+1} x_{p+1}(Z)`` is added;
3. the Jacobian of the Taylor map over ``X`` carries the parallelepiped,
   and a QR factorisation of its midpoint gives the new basis.

With ``phi(x) = T(x) + rem`` and ``x = c + B r`` the mean value theorem gives
``phi(x) ∈ T(c) + rem + J(X) B r``; writing ``y = T(c) + rem = c' + z`` and
``A = J(X) B ≈ Q R`` the new radius is ``Q^{-1} A r + Q^{-1} z``.

Parameters are adjoined as constant states, so the enclosure is valid for
every parameter in the field's parameter box simultaneously.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .interval import (
    Interval,
    _ball_from_interval,
    _ball_to_interval,
    _raw,
    _down,
    _up,
    _U,
    _inverse_enclosure_orthogonal,
    as_interval,
    matmul,
)
from .system import PolyField
from .taylor import PointJet, TaylorEngine

__all__ = [
    "EnclosureFailure",
    "FlowEnclosure",
    "IntegratorSettings",
    "LohnerSet",
    "StepLimitExceeded",
    "TubeSegment",
    "integrate",
    "rough_enclosure",
    "step",
    "write_tube_csv",
]


class EnclosureFailure(RuntimeError):
    """No verified enclosure could be produced (step too large or blow-up)."""

    def __init__(self, message: str, t_reached: float | None = None):
        super().__init__(message if t_reached is None else f"{message} (t = {t_reached!r})")
        self.t_reached = t_reached


class StepLimitExceeded(EnclosureFailure):
    """More than ``max_steps`` steps would be needed."""


@dataclass(frozen=True)
class IntegratorSettings:
    taylor_order: int = 24
    step_min: float = 2.0**-20
    step_max: float = 0.5
    tube_record: bool = True
    max_steps: int = 100_000
    # target for the size of the last Taylor term, relative to the state size
    tolerance: float = 1e-22
    # steps are rounded down to multiples of this dyadic so times add exactly
    time_grid: float = 2.0**-30
    # enclosure widths above this abort the integration
    max_width: float = 1e3
    # evaluate the jet at the expansion point in 113-bit interval arithmetic
    extended_center: bool = True

    def __post_init__(self):
        if not (2 <= self.taylor_order <= 30):
            raise ValueError("taylor_order must lie in [2, 30]")
        if not (0 < self.step_min <= self.step_max):
            raise ValueError("need 0 < step_min <= step_max")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass(frozen=True)
class LohnerSet:
    """The set ``center + basis @ radius`` (all state and parameter coordinates)."""

    center: np.ndarray
    basis: np.ndarray
    radius: Interval

    @classmethod
    def from_box(cls, box) -> "LohnerSet":
        box = as_interval(box)
        c = box.mid()
        return cls(c, np.eye(len(c)), box - c)

    @classmethod
    def parallelepiped(cls, center, basis, radius) -> "LohnerSet":
        return cls(np.asarray(center, dtype=float), np.asarray(basis, dtype=float),
                   as_interval(radius))

    def hull(self) -> Interval:
        return matmul(self.basis, self.radius) + self.center

    def image(self, M) -> Interval:
        """Enclosure of ``M @ x`` over the set, for an interval or float matrix M."""
        return matmul(M, self.center) + matmul(matmul(M, self.basis), self.radius)

    @property
    def dim(self) -> int:
        return len(self.center)


@dataclass(frozen=True)
class TubeSegment:
    t_lo: float
    t_hi: float
    box: Interval


@dataclass(frozen=True)
class FlowEnclosure:
    t_final: float
    final_box: Interval
    final_set: LohnerSet
    tube: tuple[TubeSegment, ...]
    steps: tuple[float, ...]

    @property
    def final_full_box(self) -> Interval:
        return self.final_set.hull()


# ---------------------------------------------------------------------------


_ENGINES: dict[int, TaylorEngine] = {}


def _engine(f: PolyField) -> TaylorEngine:
    key = id(f)
    eng = _ENGINES.get(key)
    if eng is None or eng.field is not f:
        eng = TaylorEngine(f)
        _ENGINES[key] = eng
    return eng


def _full_box(f: PolyField, box, params=None) -> Interval:
    box = as_interval(box)
    if box.shape[-1] == f.n_vars:
        return box
    p = f.parameter_box if params is None else as_interval(params).reshape(f.n_params)
    return Interval.concatenate([box, p])


def _extended_rhs(f: PolyField, full: Interval) -> Interval:
    v = f.rhs(full)
    if f.n_params:
        v = Interval.concatenate([v, Interval.zeros(f.n_params)])
    return v


def _pow_table(h: float, n: int) -> Interval:
    """Enclosures of h^0 .. h^n."""
    out = [Interval(1.0)]
    hh = Interval(h)
    for _ in range(n):
        out.append(out[-1] * hh)
    return Interval.stack(out)


def _range_over_step(coeffs: Interval, powers: Interval) -> Interval:
    """Enclosure of sum_k c_k t^k for all t in [0, h] (``powers`` holds h^k)."""
    terms = coeffs * powers[: coeffs.shape[-1]]
    lo = terms.lo.copy()
    hi = terms.hi.copy()
    lo[..., 1:] = np.minimum(lo[..., 1:], 0.0)
    hi[..., 1:] = np.maximum(hi[..., 1:], 0.0)
    return _raw(lo, hi).sum(axis=-1)


def _rough(eng: TaylorEngine, X: Interval, h: float, order: int,
           coeffs_X: Interval | None = None, attempts: int = 6, try_unpadded: bool = False):
    """High-order a priori enclosure on [0, h].

    With ``E = sum_{k<=p} [0,h]^k x_k(X)`` a box ``Z`` satisfying
    ``E + [0, h^{p+1}] x_{p+1}(Z) ⊆ Z`` contains every solution starting in
    ``X`` for t in [0, h].  Returns ``(Z, x_{p+1}(Z))``; the second item bounds
    the Lagrange remainder of the order-p Taylor polynomial.
    """
    if coeffs_X is None:
        coeffs_X = eng.coefficients(X, order)
    powers = _pow_table(h, order + 1)
    E = _range_over_step(coeffs_X, powers)
    hp = _raw(np.zeros(1), powers.hi[order + 1 : order + 2])[0]
    Z = E
    if try_unpadded:
        C = eng.coefficients(E, order + 1)[:, order + 1]
        if (E + hp * C).subset(E):
            return E, C
    grow = 0.1
    for _ in range(attempts):
        wide = Z.hi > Z.lo
        r = np.where(wide, Z.rad(), 0.0)
        pad = np.where(wide, r * grow + 1e-15 * (np.abs(Z.mid()) + r) + 1e-300, 0.0)
        Zt = _raw(np.where(pad > 0, _down(Z.lo - pad), Z.lo),
                  np.where(pad > 0, _up(Z.hi + pad), Z.hi))
        C = eng.coefficients(Zt, order + 1)[:, order + 1]
        Zn = E + hp * C
        if Zn.subset(Zt):
            return Zt, C
        Z = Zn.hull(Zt)
        grow *= 2.0
    raise EnclosureFailure(f"rough enclosure not found for step {h!r}")


def rough_enclosure(f: PolyField, box, h: float, params=None, order: int = 20) -> Interval:
    """A box Z (state coordinates) containing every solution from ``box`` on [0, h].

    ``order = 0`` gives the classical first-order test ``box + [0, h] f(Z) ⊆ Z``.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    X = _full_box(f, box, params)
    Z, _ = _rough(_engine(f), X, h, order, try_unpadded=True)
    return Z[: f.dimension] if as_interval(box).shape[-1] == f.dimension else Z


def _horner_ball(cm: np.ndarray, cr: np.ndarray, h: float):
    """Ball value of sum_k c_k h^k along the last axis, h >= 0 exact."""
    p = cm.shape[-1] - 1
    m = cm[..., p].copy()
    r = cr[..., p].copy()
    for k in range(p - 1, -1, -1):
        t = m * h
        m = t + cm[..., k]
        r = r * h + cr[..., k] + (np.abs(t) + np.abs(m)) * _U
        # 1e-323 per step covers a possible underflow of t
        r = np.where(r == 0, 0.0, r * (1.0 + 6 * _U)) + np.where(t != 0, 1e-323, 0.0)
    r = np.where(r == 0, 0.0, _up(r))
    return m, r


def _poly_eval(coeffs: Interval, h: float) -> Interval:
    cm, cr = _ball_from_interval(coeffs.lo, coeffs.hi)
    m, r = _horner_ball(cm, cr, h)
    return _raw(*_ball_to_interval(m, r))


def _point_jet(eng: TaylorEngine, c0: np.ndarray, order: int, extended: bool):
    if extended:
        return PointJet(eng, c0, order)
    return eng.coefficients(Interval(c0), order)


def _point_eval(point_coeffs, h: float) -> Interval:
    if isinstance(point_coeffs, PointJet):
        return point_coeffs.evaluate(h)
    return _poly_eval(point_coeffs, h)


def _pow_h(h: float, k: int) -> Interval:
    out = Interval(1.0)
    hh = Interval(h)
    for _ in range(k):
        out = out * hh
    return out


def _choose_step(coef_mid: np.ndarray, center: np.ndarray, d: int, s: IntegratorSettings) -> float:
    p = coef_mid.shape[1] - 1
    scale = max(float(np.max(np.abs(center[:d]))), 1e-300)
    h = s.step_max
    for k in (p - 1, p):
        nk = float(np.max(np.abs(coef_mid[:d, k])))
        if nk > 0:
            h = min(h, (s.tolerance * scale / nk) ** (1.0 / k))
    return h


def _quantize(h: float, grid: float) -> float:
    if h >= grid:
        return math.floor(h / grid) * grid
    return 2.0 ** math.floor(math.log2(h))


def _offset(S: LohnerSet, d: int | None = None) -> np.ndarray:
    """Midpoint of the radius; parameter entries are zeroed for structured bases."""
    m = S.radius.mid()
    if d is not None and _parameter_block_ok(S.basis, d):
        m = np.where(np.arange(m.shape[0]) < d, m, 0.0)
    return m


def _expansion_point(S: LohnerSet, d: int | None = None) -> np.ndarray:
    """Float point near the middle of the set, used as Taylor expansion point."""
    m = _offset(S, d)
    if not np.any(m):
        return S.center
    return S.center + S.basis @ m


def _parameter_block_ok(B: np.ndarray, d: int) -> bool:
    """True if the parameter rows of the basis are exactly ``[0 | I]``."""
    n = B.shape[0]
    if n == d:
        return False
    return bool(np.array_equal(B[d:, :d], np.zeros((n - d, d)))
                and np.array_equal(B[d:, d:], np.eye(n - d)))


def _structured_update(S: LohnerSet, y: Interval, J: Interval, radius: Interval, d: int) -> LohnerSet:
    """Lohner update that keeps parameters out of the QR factorisation.

    The basis stays ``[[Q, P], [0, I]]``: Q is orthogonal on the state
    coordinates, P is a float sensitivity matrix for the parameters, and the
    parameter part of both center and radius is carried over unchanged (the
    parameters are constant, so no error ever enters those coordinates).
    Without this split the QR step rotates rounding errors into the
    parameter direction, which the flow then amplifies.
    """
    B = S.basis
    Jx, Jp = J[:d, :d], J[:d, d:]
    A_s = matmul(Jx, Interval(B[:d, :d]))
    A_p = matmul(Jx, Interval(B[:d, d:])) + Jp
    r_s, r_p = radius[:d], radius[d:]
    P = A_p.mid()
    y_s = y[:d]
    c_s = y_s.mid()
    z = (y_s - c_s) + matmul(A_p - P, r_p)
    Am = A_s.mid()
    weights = np.linalg.norm(Am, axis=0) * np.maximum(r_s.rad(), 0.0)
    perm = np.argsort(-weights, kind="stable")
    Q, _ = np.linalg.qr(Am[:, perm])
    Qinv = _inverse_enclosure_orthogonal(Q)
    r_new = matmul(matmul(Qinv, A_s), r_s) + matmul(Qinv, z)
    n = B.shape[0]
    basis = np.zeros((n, n))
    basis[:d, :d] = Q
    basis[:d, d:] = P
    basis[d:, d:] = np.eye(n - d)
    center = np.concatenate([c_s, S.center[d:]])
    return LohnerSet(center, basis, Interval.concatenate([r_new, r_p]))


def _lohner_step(f: PolyField, S: LohnerSet, h: float, point_coeffs: Interval, order: int,
                 c0: np.ndarray | None = None):
    """One step; ``point_coeffs`` are the Taylor coefficients at ``c0``.

    The radius is first recentred: with m = mid(r), x = c0 + e + B (r - m)
    where e = c + B m - c0 is a rounding-size interval.  The mean value
    theorem then gives phi(x) ∈ phi(c0) + J(X) e + J(X) B (r - m), with X
    containing the set and c0.
    """
    eng = _engine(f)
    c0 = S.center if c0 is None else c0
    X = S.hull()
    radius = S.radius
    shifted = not np.array_equal(c0, S.center)
    if shifted:
        X = X.hull(Interval(c0))
        m = _offset(S, f.dimension)
        e = matmul(S.basis, Interval(m)) + S.center - c0
        radius = radius - m
    vals, jac = eng.coefficients_with_jacobian(X, order)
    Z, rem_coef = _rough(eng, X, h, order, vals)
    rem = rem_coef * _pow_h(h, order + 1)
    y = _point_eval(point_coeffs, h) + rem
    J = _poly_eval(jac, h)
    if shifted:
        y = y + matmul(J, e)
    d = f.dimension
    if _parameter_block_ok(S.basis, d):
        return _structured_update(S, y, J, radius, d), Z
    A = matmul(J, S.basis)
    c_new = y.mid()
    z = y - c_new
    Am = A.mid()
    weights = np.linalg.norm(Am, axis=0) * np.maximum(radius.rad(), 0.0)
    perm = np.argsort(-weights, kind="stable")
    Q, _ = np.linalg.qr(Am[:, perm])
    Qinv = _inverse_enclosure_orthogonal(Q)
    r_new = matmul(matmul(Qinv, A), radius) + matmul(Qinv, z)
    return LohnerSet(c_new, Q, r_new), Z


def step(f: PolyField, rep: LohnerSet, h: float, settings: IntegratorSettings | None = None) -> LohnerSet:
    """One validated step of size ``h``; the hull of the result encloses Φ_h(rep)."""
    s = settings or IntegratorSettings()
    eng = _engine(f)
    c0 = _expansion_point(rep, f.dimension)
    pc = _point_jet(eng, c0, s.taylor_order, s.extended_center)
    new, _ = _lohner_step(f, rep, h, pc, s.taylor_order, c0)
    return new


def _as_set(f: PolyField, initial, params) -> LohnerSet:
    if isinstance(initial, LohnerSet):
        if initial.dim != f.n_vars:
            raise ValueError("Lohner set dimension must include the parameters")
        return initial
    return LohnerSet.from_box(_full_box(f, initial, params))


def integrate(
    f: PolyField,
    initial,
    T: float,
    settings: IntegratorSettings | None = None,
    params=None,
    step_sequence: Sequence[float] | None = None,
) -> FlowEnclosure:
    """Enclose Φ_T(initial) for all parameters in ``params`` (default: f's box).

    ``initial`` is a box in state coordinates, a box including parameter
    coordinates, or a :class:`LohnerSet` over all coordinates.  With
    ``step_sequence`` the given steps are used verbatim (they must add up to T).
    """
    s = settings or IntegratorSettings()
    if not T > 0:
        raise ValueError("T must be positive")
    S = _as_set(f, initial, params)
    eng = _engine(f)
    d = f.dimension
    order = s.taylor_order
    t = 0.0
    tube: list[TubeSegment] = []
    steps: list[float] = []
    forced = list(step_sequence) if step_sequence is not None else None
    Tq = Fraction(T)
    while Fraction(t) < Tq:
        if len(steps) >= s.max_steps:
            raise StepLimitExceeded(f"step limit {s.max_steps} reached", t)
        c0 = _expansion_point(S, d)
        pc = _point_jet(eng, c0, order, s.extended_center)
        remaining = Tq - Fraction(t)
        if forced is not None:
            if not forced:
                raise ValueError("step_sequence ends before T")
            h = float(forced.pop(0))
            candidates = [h]
        else:
            h = _choose_step(pc.mid(), c0, d, s)
            h = min(max(_quantize(h, s.time_grid), s.step_min), s.step_max)
            candidates = []
            while h >= s.step_min:
                candidates.append(h)
                h = _quantize(h / 2, s.time_grid)
        result = None
        for h in candidates:
            if Fraction(h) >= remaining:
                h = float(remaining)
                if Fraction(h) != remaining:
                    raise ValueError("final time is not reachable exactly in binary64")
            try:
                result = _lohner_step(f, S, h, pc, order, c0)
                break
            except EnclosureFailure:
                continue
        if result is None:
            raise EnclosureFailure("step size fell below step_min", t)
        S_new, Z = result
        t_new = float(Fraction(t) + Fraction(h))
        if Fraction(t_new) != Fraction(t) + Fraction(h):
            raise ValueError("time grid lost exactness")
        width = float(np.max(S_new.radius.width()))
        if not math.isfinite(width) or width > s.max_width:
            raise EnclosureFailure("enclosure width blow-up", t_new)
        if s.tube_record:
            tube.append(TubeSegment(t, t_new, Z[:d]))
        steps.append(h)
        S = S_new
        t = t_new
    final = S.hull()
    return FlowEnclosure(t, final[:d], S, tuple(tube), tuple(steps))


def write_tube_csv(path, tube: Iterable[TubeSegment], names: Sequence[str] | None = None) -> None:
    """CSV with columns t_lo, t_hi, then <name>_lo, <name>_hi per dimension."""
    tube = list(tube)
    dim = tube[0].box.shape[0] if tube else (len(names) if names else 0)
    names = list(names) if names else [f"x{i}" for i in range(dim)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["t_lo", "t_hi"]
        for nm in names:
            header += [f"{nm}_lo", f"{nm}_hi"]
        w.writerow(header)
        for seg in tube:
            row = ["%.17g" % seg.t_lo, "%.17g" % seg.t_hi]
            for i in range(dim):
                row += ["%.17g" % float(seg.box.lo[i]), "%.17g" % float(seg.box.hi[i])]
            w.writerow(row)


def read_tube_csv(path) -> list[TubeSegment]:
    out = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        dim = (len(header) - 2) // 2
        for row in r:
            vals = [float(v) for v in row]
            lo = np.array(vals[2::2][:dim])
            hi = np.array(vals[3::2][:dim])
            out.append(TubeSegment(vals[0], vals[1], Interval(lo, hi)))
    return out
