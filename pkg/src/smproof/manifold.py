"""Certified local stable and unstable manifolds of the origin.

A block ``D = B_u(R) x B_s(R)`` in local coordinates (u coordinates first)
is an isolating block when the field points strictly out of D through
``∂B_u(R) x B_s(R)`` and strictly in through ``B_u(R) x ∂B_s(R)``.  Together
with the rate conditions

    mu = sup_D { l(f_ss) + ||f_su|| / L } < 0 < xi = m_l(f_uu(D)) - L ||f_us(D)||

(subscripts are Jacobian blocks) this makes the set of points whose backward
orbit stays in D the graph of an L-Lipschitz map ``w: B_u(R) -> B_s(R)``.
Since the origin is an equilibrium in D, ``w(0) = 0`` and so
``||w(x)|| <= L ||x||``; that cone is the whole enclosure the pipeline uses.

The stable manifold is the unstable manifold of the reversed field with the
roles of the coordinate groups swapped.

Sign conditions are checked on the symbolic polynomials ``(π_u q | π_u f(q))``
and ``(π_s q | π_s f(q))`` over a covering of the boundary pieces by boxes,
refined adaptively where a box fails.  Boxes only need to cover the boundary
(a superset is harmless), so balls are covered by their bounding boxes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .interval import (
    Interval,
    _raw,
    as_interval,
    euclid_norm_sup,
    log_norm_upper,
    m_l_lower,
    op_norm_upper,
)
from .system import Frame, PolyField, PolyMap, _padd, _pmul, _prune, reversed_field

__all__ = [
    "BlockCheck",
    "BlockSpec",
    "CertificateRefused",
    "ManifoldCertificate",
    "RatePiece",
    "certify_stable",
    "certify_unstable",
    "check_isolating_block",
    "decay_product",
    "graph_bound",
    "rate_constants",
]

# the graph tube is inflated by this factor in the slope direction, so that it
# also covers a neighbourhood of the graph (see rate_constants)
TUBE_INFLATION = 1.1


class CertificateRefused(RuntimeError):
    """A manifold certificate could not be issued; ``condition`` names why."""

    def __init__(self, condition: str, detail: str = ""):
        super().__init__(f"{condition}: {detail}" if detail else condition)
        self.condition = condition
        self.detail = detail


@dataclass(frozen=True)
class BlockSpec:
    """Geometry of the block: frame, half-width R, cone slope L and the split.

    The expanding group is the first ``u_dim`` local coordinates, or the last
    ones when ``u_first`` is false (the stable certificate of the reversed
    field uses the swapped spec).
    """

    frame: Frame
    R: float
    L: float
    u_dim: int = 1
    s_dim: int = 2
    depth: int = 6
    initial_cells: int = 8
    rate_cells: int = 1
    # False when the expanding group is the last u_dim coordinates
    u_first: bool = True

    def __post_init__(self):
        if not (self.R > 0 and self.L > 0):
            raise ValueError("R and L must be positive")
        if self.u_dim < 1 or self.s_dim < 1 or self.u_dim + self.s_dim != 3:
            raise ValueError("need u_dim + s_dim = 3 with both positive")
        if self.depth < 0 or self.initial_cells < 1 or self.rate_cells < 1:
            raise ValueError("subdivision parameters must be positive")

    @property
    def u_coords(self) -> tuple[int, ...]:
        return tuple(range(self.u_dim)) if self.u_first else tuple(range(3 - self.u_dim, 3))

    @property
    def s_coords(self) -> tuple[int, ...]:
        return tuple(i for i in range(3) if i not in self.u_coords)

    def swapped(self) -> "BlockSpec":
        """Same block with the groups exchanged: used for the reversed field."""
        return replace(self, u_dim=self.s_dim, s_dim=self.u_dim, u_first=not self.u_first)

    def block_box(self) -> Interval:
        return Interval(np.full(3, -self.R), np.full(3, self.R))


@dataclass(frozen=True)
class BlockCheck:
    """Outcome of the isolating-block test; ``witness`` is a failing box."""

    ok: bool
    boundary: str | None = None
    witness: Interval | None = None
    value: Interval | None = None
    cells: int = 0

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class RatePiece:
    params: Interval
    mu_arrow: Interval
    xi_arrow: Interval
    xi_graph: Interval


@dataclass(frozen=True)
class ManifoldCertificate:
    """Verified block, rates and Lipschitz cone for one manifold.

    ``xi_arrow`` is the rate over the whole block D; ``xi_graph`` is the same
    rate functional over the cone tube that contains the manifold and is the
    contraction rate along the manifold.  ``endpoint_enclosure`` is, for the
    unstable side, the box ``{branch*R} x [-LR, LR]^2`` containing
    ``p^u = (branch*R, w(branch*R))``; for the stable side it is the tube.
    """

    spec: BlockSpec
    side: str
    params: Interval
    mu_arrow: Interval
    xi_arrow: Interval
    xi_graph: Interval
    c: Interval
    endpoint_enclosure: Interval
    branch: int = 1
    pieces: tuple[RatePiece, ...] = field(default=(), repr=False)

    def reverify(self) -> list[str]:
        """Names of stored inequalities that do not hold (empty when sound)."""
        bad = []
        R, L = as_interval(self.spec.R), as_interval(self.spec.L)
        if not self.mu_arrow.hi < 0:
            bad.append("mu_arrow < 0")
        if not self.xi_arrow.lo > 0:
            bad.append("xi_arrow > 0")
        if not self.xi_graph.lo >= self.xi_arrow.lo:
            bad.append("xi_graph >= xi_arrow")
        for p in self.pieces:
            if not (p.mu_arrow.hi <= self.mu_arrow.hi and p.xi_arrow.lo >= self.xi_arrow.lo
                    and p.xi_graph.lo >= self.xi_graph.lo):
                bad.append("piece rates")
                break
        if not _c_constant(self.spec.L).subset(self.c):
            bad.append("c = 2 sqrt(1 + L^2)")
        if self.side == "unstable":
            e = self.endpoint_enclosure
            ys = e[list(self.spec.s_coords)]
            if not np.all(ys.mag() <= float((L * R).hi)):
                bad.append("endpoint slope")
            if not e[0].contains(self.branch * self.spec.R):
                bad.append("endpoint x")
        return bad


# ---------------------------------------------------------------------------
# polynomials of the sign conditions
# ---------------------------------------------------------------------------


def _inner_poly(f: PolyField, coords: Sequence[int]) -> PolyMap:
    """The polynomial sum_{i in coords} q_i f_i(q) (one component)."""
    n = f.n_vars
    polys = f.rhs.polys()
    acc: dict = {}
    for i in coords:
        e = [0] * n
        e[i] = 1
        acc = _padd(acc, _pmul({tuple(e): as_interval(1.0)}, polys[i]))
    return PolyMap.from_polys([_prune(acc)], n)


def _with_params(box: Interval, params: Interval) -> Interval:
    return Interval.concatenate([box, params.reshape(-1)])


# ---------------------------------------------------------------------------
# boundary coverings
# ---------------------------------------------------------------------------


def _grid(R: float, n: int) -> np.ndarray:
    g = np.linspace(-R, R, n + 1)
    g[0], g[-1] = -R, R
    return g


def _norm2(box_lo, box_hi) -> Interval:
    sq = Interval(box_lo, box_hi).sqr()
    return sq.sum()


def _touches_sphere(lo, hi, R2: Interval) -> bool:
    s = _norm2(lo, hi)
    return bool(s.lo <= R2.hi and s.hi >= R2.lo)


def _touches_ball(lo, hi, R2: Interval) -> bool:
    return bool(_norm2(lo, hi).lo <= R2.hi)


def _factor_cells(R: float, dim: int, kind: str, n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Boxes covering either the sphere or the ball of radius R in ``dim`` dims."""
    if kind == "sphere" and dim == 1:
        return [(np.array([-R]), np.array([-R])), (np.array([R]), np.array([R]))]
    if kind == "ball":
        return [(np.full(dim, -R), np.full(dim, R))]
    g = _grid(R, n)
    R2 = as_interval(R).sqr()
    out = []
    for idx in itertools.product(range(n), repeat=dim):
        lo = np.array([g[i] for i in idx])
        hi = np.array([g[i + 1] for i in idx])
        if _touches_sphere(lo, hi, R2):
            out.append((lo, hi))
    return out


def _assemble(u_coords, s_coords, ucell, scell) -> tuple[np.ndarray, np.ndarray]:
    lo = np.zeros(3)
    hi = np.zeros(3)
    lo[list(u_coords)], hi[list(u_coords)] = ucell
    lo[list(s_coords)], hi[list(s_coords)] = scell
    return lo, hi


def _split(lo: np.ndarray, hi: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    axes = [i for i in range(len(lo)) if hi[i] > lo[i]]
    out = []
    for choice in itertools.product((0, 1), repeat=len(axes)):
        clo, chi = lo.copy(), hi.copy()
        for ax, c in zip(axes, choice):
            mid = 0.5 * (lo[ax] + hi[ax])
            if c == 0:
                chi[ax] = mid
            else:
                clo[ax] = mid
        out.append((clo, chi))
    return out


def _check_boundary(poly: PolyMap, params: Interval, spec: BlockSpec, sphere_coords, ball_coords,
                    sign: int, name: str) -> BlockCheck:
    R2 = as_interval(spec.R).sqr()
    n_sphere, n_ball = len(sphere_coords), len(ball_coords)
    cells = [
        (_assemble(sphere_coords, ball_coords, a, b), 0)
        for a in _factor_cells(spec.R, n_sphere, "sphere", spec.initial_cells)
        for b in _factor_cells(spec.R, n_ball, "ball", spec.initial_cells)
    ]
    checked = 0
    while cells:
        (lo, hi), depth = cells.pop()
        box = _raw(lo, hi)
        val = poly(_with_params(box, params))[0]
        checked += 1
        good = val.lo > 0 if sign > 0 else val.hi < 0
        if good:
            continue
        # a box where the condition fails everywhere cannot be rescued by refining
        hopeless = val.hi <= 0 if sign > 0 else val.lo >= 0
        if hopeless or depth >= spec.depth:
            return BlockCheck(False, name, box, val, checked)
        for clo, chi in _split(lo, hi):
            sp = list(sphere_coords)
            bl = list(ball_coords)
            if n_sphere > 1 and not _touches_sphere(clo[sp], chi[sp], R2):
                continue
            if not _touches_ball(clo[bl], chi[bl], R2):
                continue
            cells.append(((clo, chi), depth + 1))
    return BlockCheck(True, None, None, None, checked)


def check_isolating_block(f: PolyField, spec: BlockSpec, params=None) -> BlockCheck:
    """Verify the exit and entry sign conditions of D for the local field ``f``.

    Returns a truthy :class:`BlockCheck`, or a falsy one whose ``witness`` is
    the failing boundary box and ``boundary`` is "exit" or "entry".
    """
    params = f.parameter_box if params is None else as_interval(params).reshape(f.n_params)
    u, s = spec.u_coords, spec.s_coords
    exit_ = _check_boundary(_inner_poly(f, u), params, spec, u, s, +1, "exit")
    if not exit_:
        return exit_
    entry = _check_boundary(_inner_poly(f, s), params, spec, s, u, -1, "entry")
    if not entry:
        return entry
    return BlockCheck(True, None, None, None, exit_.cells + entry.cells)


# ---------------------------------------------------------------------------
# rate constants
# ---------------------------------------------------------------------------


def _sub(J: Interval, rows, cols) -> Interval:
    ix = np.ix_(list(rows), list(cols))
    return _raw(J.lo[ix], J.hi[ix])


def _cells_of(box: Interval, n: int) -> list[Interval]:
    if n == 1:
        return [box]
    grids = [_grid_between(float(box.lo[i]), float(box.hi[i]), n) for i in range(box.shape[0])]
    out = []
    for idx in itertools.product(range(n), repeat=box.shape[0]):
        lo = np.array([grids[k][i] for k, i in enumerate(idx)])
        hi = np.array([grids[k][i + 1] for k, i in enumerate(idx)])
        out.append(_raw(lo, hi))
    return out


def _grid_between(a: float, b: float, n: int) -> np.ndarray:
    g = np.linspace(a, b, n + 1)
    g[0], g[-1] = a, b
    return g


def _rates_over(f: PolyField, spec: BlockSpec, box: Interval, params: Interval):
    """(mu upper, xi lower) of the rate functionals over ``box`` (cellwise)."""
    u, s = spec.u_coords, spec.s_coords
    L = spec.L
    mu_hi = -math.inf
    ml_lo = math.inf
    nus_hi = 0.0
    for cell in _cells_of(box, spec.rate_cells):
        J = f.jacobian(cell, params)
        ss, su = _sub(J, s, s), _sub(J, s, u)
        uu, us = _sub(J, u, u), _sub(J, u, s)
        mu_cell = as_interval(log_norm_upper(ss).hi) + as_interval(op_norm_upper(su).hi) / L
        mu_hi = max(mu_hi, float(mu_cell.hi))
        ml_lo = min(ml_lo, float(m_l_lower(uu).lo))
        nus_hi = max(nus_hi, float(op_norm_upper(us).hi))
    xi = as_interval(ml_lo) - as_interval(nus_hi) * L
    return float(mu_hi), float(xi.lo)


def _graph_tube(spec: BlockSpec) -> Interval:
    """Box containing the cone ``||w(x)|| <= L ||x||`` over B_u(R), inflated."""
    R = spec.R
    slope = float((as_interval(spec.L) * R * TUBE_INFLATION).hi)
    lo = np.empty(3)
    hi = np.empty(3)
    for i in spec.u_coords:
        lo[i], hi[i] = -R, R
    for i in spec.s_coords:
        lo[i], hi[i] = -slope, slope
    return _raw(lo, hi)


def rate_constants(f: PolyField, spec: BlockSpec, params=None) -> tuple[Interval, Interval]:
    """Rigorous upper bound of mu_arrow and lower bound of xi_arrow over D.

    Each bound is returned as a point interval holding the bound itself.
    """
    params = f.parameter_box if params is None else as_interval(params).reshape(f.n_params)
    mu, xi = _rates_over(f, spec, spec.block_box(), params)
    return Interval(mu), Interval(xi)


def graph_rate(f: PolyField, spec: BlockSpec, params=None) -> Interval:
    """Lower bound of the xi functional over the (inflated) cone tube.

    The manifold lies in the cone ``||π_s q|| <= L ||π_u q||`` inside D, whose
    bounding box is convex, so the contraction estimate along the manifold
    only needs the Jacobian over that box.
    """
    params = f.parameter_box if params is None else as_interval(params).reshape(f.n_params)
    _, xi = _rates_over(f, spec, _graph_tube(spec), params)
    return Interval(xi)


def _c_constant(L: float) -> Interval:
    L = as_interval(L)
    return (L.sqr() + 1.0).sqrt() * 2.0


def decay_product(c: Interval, frame: Frame) -> Interval:
    """Enclosure of c ||C|| ||C^{-1}|| (upper end rigorous)."""
    nC = op_norm_upper(frame.matrix)
    nCi = op_norm_upper(frame.inverse)
    return as_interval(c) * Interval(nC.lo, nC.hi) * Interval(nCi.lo, nCi.hi)


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------


def _param_pieces(params: Interval, n: int) -> list[Interval]:
    params = params.reshape(-1)
    if n <= 1:
        return [params]
    if params.shape[0] != 1:
        raise ValueError("subdivision is supported for a single parameter")
    g = _grid_between(float(params.lo[0]), float(params.hi[0]), n)
    return [Interval(g[i : i + 1], g[i + 1 : i + 2]) for i in range(n)]


def _certify(local: PolyField, spec: BlockSpec, side: str, params: Interval,
             n_pieces: int, branch: int) -> ManifoldCertificate:
    pieces = []
    for p in _param_pieces(params, n_pieces):
        chk = check_isolating_block(local, spec, p)
        if not chk:
            raise CertificateRefused(
                "isolating-block", f"{chk.boundary} boundary fails on {chk.witness} (value {chk.value})")
        mu, xi = _rates_over(local, spec, spec.block_box(), p)
        if not mu < 0:
            raise CertificateRefused("rate-mu", f"mu_arrow bound {mu!r} is not negative")
        if not xi > 0:
            raise CertificateRefused("rate-xi", f"xi_arrow bound {xi!r} is not positive")
        _, xg = _rates_over(local, spec, _graph_tube(spec), p)
        # the tube lies inside D, so the better of the two bounds is valid on it
        pieces.append(RatePiece(p, Interval(mu), Interval(xi), Interval(max(xg, xi))))
    mu = max(float(q.mu_arrow.hi) for q in pieces)
    xi = min(float(q.xi_arrow.lo) for q in pieces)
    xg = min(float(q.xi_graph.lo) for q in pieces)
    R, L = spec.R, spec.L
    slope = float((as_interval(L) * R).hi)
    if side == "unstable":
        lo = np.array([branch * R, -slope, -slope])
        hi = np.array([branch * R, slope, slope])
        endpoint = _raw(lo, hi)
    else:
        endpoint = _graph_tube(spec)
    return ManifoldCertificate(spec, side, params.reshape(-1), Interval(mu), Interval(xi),
                               Interval(xg), _c_constant(L), endpoint, branch, tuple(pieces))


def certify_unstable(f: PolyField, spec: BlockSpec, params=None, n_pieces: int = 1,
                     branch: int = 1) -> ManifoldCertificate:
    """Certify W^u of the origin for ``f`` (original coordinates) in ``spec``'s frame.

    ``branch`` selects the endpoint ``p^u = (branch*R, w(branch*R))``.
    """
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    if spec.u_dim != 1:
        raise ValueError("the unstable certificate expects a one dimensional W^u")
    params = f.parameter_box if params is None else as_interval(params).reshape(f.n_params)
    local = f.conjugate(spec.frame)
    return _certify(local, spec, "unstable", params, n_pieces, branch)


def certify_stable(f: PolyField, spec: BlockSpec, params=None, n_pieces: int = 1) -> ManifoldCertificate:
    """Certify W^s of the origin: W^u of the reversed field with swapped roles."""
    params = f.parameter_box if params is None else as_interval(params).reshape(f.n_params)
    local = reversed_field(f.conjugate(spec.frame))
    return _certify(local, spec.swapped(), "stable", params, n_pieces, 1)


def graph_bound(cert: ManifoldCertificate, v) -> Interval:
    """Enclosure of the graph value ``w(v)`` for every v in the box ``v``.

    ``v`` lives in the certificate's expanding group (x for W^u, y for W^s);
    the result has one component per coordinate of the other group, each
    with half-width ``L * sup ||v||``.
    """
    v = as_interval(v)
    spec = cert.spec
    n_out = len(spec.s_coords)
    r = float((euclid_norm_sup(v) * as_interval(spec.L)).hi)
    return Interval(np.full(n_out, -r), np.full(n_out, r))
