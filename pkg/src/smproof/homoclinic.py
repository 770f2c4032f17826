"""Shooting function, Bolzano bracket and the homoclinic certificate.

With ``p^u_a = (branch*R, w^u_a(branch*R))`` the endpoint of the local
unstable manifold and Φ_T the flow, the shooting function is

    h(a) = π_x q - w^s_a(π_y q),     q = C^{-1} Φ_T(C p^u_a, a),

provided q lies in the block D.  The stable certificate gives
``w^s(y) ∈ [-L||y||, L||y||]``.  Opposite, sign-definite enclosures of h at
the two ends of a parameter interval bracket a parameter with a homoclinic
orbit, as long as Φ_T(C p^u_a, a) ∈ D for every a in between.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .integrator import FlowEnclosure, IntegratorSettings, LohnerSet, TubeSegment, integrate
from .interval import Interval, as_interval, euclid_norm_sup, hull
from .manifold import (
    BlockSpec,
    ManifoldCertificate,
    certify_stable,
    certify_unstable,
    decay_product,
    graph_bound,
)
from .system import Frame, PolyField, frame_entry, local_frame_C, shimizu_field

__all__ = [
    "DecayCheckFailed",
    "HomoclinicCertificate",
    "HomoclinicSettings",
    "ImageEscapedBlock",
    "NoSignChange",
    "ShotResult",
    "SignNotResolved",
    "decay_bounds",
    "h_eval",
    "prove_homoclinic",
    "shoot",
]

XI_TARGET = 1.0 - 1e-4
C_TARGET = 3.5


class SignNotResolved(RuntimeError):
    """An endpoint enclosure of h contains zero, or the signs do not bracket."""


class NoSignChange(SignNotResolved):
    """Both endpoint enclosures are sign-definite with the same sign."""


class ImageEscapedBlock(RuntimeError):
    """The enclosure of Φ_T(C p^u_a, a) is not contained in the block D."""


class DecayCheckFailed(RuntimeError):
    """c ||C|| ||C^{-1}|| < 3.5 or xi >= 1 - 1e-4 could not be verified."""


@dataclass(frozen=True)
class HomoclinicSettings:
    R: float = 1e-5
    L: float = 4e-5
    T: float = 26.0
    branch: int = -1
    membership_pieces: int = 8
    stable_pieces: int = 4
    block_depth: int = 6
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)
    threads: int | None = None

    def block(self, frame: Frame | None = None) -> BlockSpec:
        return BlockSpec(frame or local_frame_C(), self.R, self.L, depth=self.block_depth)


@dataclass(frozen=True)
class ShotResult:
    """One propagation of the unstable endpoint over a parameter box."""

    params: Interval
    initial_original: Interval  # C p^u in (X, Y, Z)
    final_original: Interval  # Φ_T(C p^u) in (X, Y, Z)
    final_local: Interval  # C^{-1} Φ_T(...)
    flow: FlowEnclosure


@dataclass(frozen=True)
class HomoclinicCertificate:
    a_bracket: Interval
    h_left: Interval
    h_right: Interval
    T: float
    decay_c: Interval
    decay_xi: Interval
    endpoint_enclosures: tuple[Interval, Interval]
    orientation: str  # "left-positive" or "left-negative"
    settings: HomoclinicSettings
    cert_u: ManifoldCertificate
    cert_s: ManifoldCertificate
    membership: tuple[tuple[Interval, Interval], ...] = ()  # (a piece, local image box)
    endpoint_images: tuple[Interval, Interval] | None = None  # local q at a_l and at a_r
    tube: tuple[TubeSegment, ...] = field(default=(), repr=False)

    @property
    def a_left(self) -> Interval:
        return Interval(self.a_bracket.lo)

    @property
    def a_right(self) -> Interval:
        return Interval(self.a_bracket.hi)


# ---------------------------------------------------------------------------


def _initial_set(cert_u: ManifoldCertificate, frame: Frame, params: Interval) -> LohnerSet:
    """C (endpoint box) with the parameter box adjoined, as a Lohner set.

    The center is the equilibrium (exactly representable) and the radius is
    the endpoint box itself, so no rounding enters the initial set.
    """
    C = frame.matrix
    if not C.is_point():
        raise ValueError("the frame matrix must be a point matrix")
    p = params.reshape(-1)
    B = np.eye(3 + p.shape[0])
    B[:3, :3] = C.lo
    pm = p.mid()
    center = np.concatenate([np.zeros(3), pm])
    radius = Interval.concatenate([cert_u.endpoint_enclosure, p - pm])
    return LohnerSet(center, B, radius)


def _to_local_matrix(frame: Frame, n_params: int) -> Interval:
    Ci = frame.inverse
    z = Interval(np.zeros((3, n_params)))
    return Interval.concatenate([Ci, z], axis=1)


def in_block(q: Interval, spec: BlockSpec) -> bool:
    """Rigorous test q ⊂ D = B_u(R) x B_s(R) (Euclidean balls)."""
    R = as_interval(spec.R)
    u, s = list(spec.u_coords), list(spec.s_coords)
    return bool(euclid_norm_sup(q[u]).hi <= R.lo and euclid_norm_sup(q[s]).hi <= R.lo)


def shoot(f: PolyField, cert_u: ManifoldCertificate, params, T: float,
          settings: IntegratorSettings | None = None) -> ShotResult:
    """Propagate C p^u over the parameter box ``params`` for time T."""
    params = as_interval(params).reshape(f.n_params)
    if not params.subset(cert_u.params):
        raise ValueError("the unstable certificate does not cover these parameters")
    frame = cert_u.spec.frame
    S = _initial_set(cert_u, frame, params)
    flow = integrate(f, S, T, settings)
    q = flow.final_set.image(_to_local_matrix(frame, f.n_params))
    init = S.hull()[:3]
    return ShotResult(params, init, flow.final_box, q, flow)


def h_from_local(q: Interval, cert_s: ManifoldCertificate) -> Interval:
    """h = π_x q - w^s(π_y q) with w^s enclosed by the Lipschitz cone."""
    spec = cert_s.spec  # swapped: expanding group is y
    y = q[list(spec.u_coords)]
    x = q[list(spec.s_coords)]
    w = graph_bound(cert_s, y)
    return (x - w)[0]


def h_eval(a, cert_u: ManifoldCertificate, cert_s: ManifoldCertificate, T: float,
           settings: IntegratorSettings | None = None, field_: PolyField | None = None,
           return_shot: bool = False):
    """Enclosure of h over the parameter box ``a``.

    Raises :class:`ImageEscapedBlock` if Φ_T(C p^u_a, a) is not inside D.
    """
    a = as_interval(a).reshape(1)
    if not a.subset(cert_s.params):
        raise ValueError("the stable certificate does not cover these parameters")
    f = field_ if field_ is not None else shimizu_field(a)
    shot = shoot(f, cert_u, a, T, settings)
    if not in_block(shot.final_local, cert_u.spec):
        raise ImageEscapedBlock(f"Φ_T image {shot.final_local} is not inside D for a = {a}")
    h = h_from_local(shot.final_local, cert_s)
    return (h, shot) if return_shot else h


def decay_bounds(cert_u: ManifoldCertificate, cert_s: ManifoldCertificate,
                 xi_target: float = XI_TARGET, c_target: float = C_TARGET) -> tuple[Interval, Interval]:
    """c = 2 sqrt(1+L^2) ||C|| ||C^{-1}|| (checked < 3.5) and xi = min of the graph rates."""
    frame = cert_u.spec.frame
    c = decay_product(cert_u.c, frame)
    xi = Interval(min(float(cert_u.xi_graph.lo), float(cert_s.xi_graph.lo)))
    if not c.hi < c_target:
        raise DecayCheckFailed(f"c ||C|| ||C^-1|| = {c} is not below {c_target}")
    if not xi.lo >= xi_target:
        raise DecayCheckFailed(f"xi = {xi} is below {xi_target}")
    return c, xi


def _threads(settings: HomoclinicSettings) -> int:
    if settings.threads is not None:
        return max(1, int(settings.threads))
    try:
        return max(1, int(os.environ.get("SMPROOF_THREADS", "1")))
    except ValueError:
        return 1


def _pieces(A: Interval, n: int) -> list[Interval]:
    g = np.linspace(float(A.lo), float(A.hi), n + 1)
    g[0], g[-1] = float(A.lo), float(A.hi)
    return [Interval(g[i], g[i + 1]) for i in range(n)]


def prove_homoclinic(A, settings: HomoclinicSettings | None = None) -> HomoclinicCertificate:
    """Run the bracket proof over ``A = [a_l, a_r]`` and issue the certificate."""
    s = settings or HomoclinicSettings()
    A = as_interval(A).reshape(())
    if not A.lo < A.hi:
        raise SignNotResolved("the bracket needs two distinct endpoints a_l < a_r")
    f = shimizu_field(A)
    spec = s.block(local_frame_C(frame_entry(A)))
    cert_u = certify_unstable(f, spec, branch=s.branch)
    cert_s = certify_stable(f, spec, n_pieces=s.stable_pieces)
    c, xi = decay_bounds(cert_u, cert_s)

    jobs = [Interval(A.lo), Interval(A.hi)] + _pieces(A, s.membership_pieces)

    def run(job: tuple[int, Interval]):
        i, a = job
        try:
            return h_eval(a, cert_u, cert_s, s.T, s.integrator, field_=f, return_shot=True)
        except ImageEscapedBlock as exc:
            if i < 2:
                # h is only defined on images inside D, so no sign exists at this endpoint
                side = "a_l" if i == 0 else "a_r"
                raise SignNotResolved(f"h({side}) is undefined: {exc}") from exc
            raise

    n_threads = _threads(s)
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as ex:
            results = list(ex.map(run, enumerate(jobs)))
    else:
        results = [run(job) for job in enumerate(jobs)]
    (h_l, shot_l), (h_r, shot_r) = results[0], results[1]
    shots = [shot for _, shot in results[2:]]

    if h_l.contains(0.0) or h_r.contains(0.0):
        raise SignNotResolved(f"h(a_l) = {h_l}, h(a_r) = {h_r}: an enclosure contains 0")
    if (h_l.lo > 0) == (h_r.lo > 0):
        raise NoSignChange(f"h(a_l) = {h_l}, h(a_r) = {h_r} have the same sign")
    orientation = "left-positive" if h_l.lo > 0 else "left-negative"

    initial = hull(sh.initial_original for sh in shots)
    final = hull(sh.final_original for sh in shots)
    tube = tuple(seg for sh in shots for seg in sh.flow.tube)
    membership = tuple((sh.params.reshape(()), sh.final_local) for sh in shots)
    return HomoclinicCertificate(
        a_bracket=A,
        h_left=h_l,
        h_right=h_r,
        T=s.T,
        decay_c=c,
        decay_xi=xi,
        endpoint_enclosures=(initial, final),
        orientation=orientation,
        settings=s,
        cert_u=cert_u,
        cert_s=cert_s,
        membership=membership,
        endpoint_images=(shot_l.final_local, shot_r.final_local),
        tube=tube,
    )


def endpoint_norms(cert: HomoclinicCertificate) -> tuple[Interval, Interval]:
    """sup-norm enclosures of ||(X0, Y0, Z0)|| at t = 0 and t = T."""
    init, final = cert.endpoint_enclosures
    return euclid_norm_sup(init), euclid_norm_sup(final)
