"""Separatrix value of the homoclinic loop.

In the eigenbasis ``eta = P gamma`` of the limit area system, the area
equation along the loop becomes ``gamma' = (A + B(t)) gamma`` with
``A = diag(0, -(a0+2), -a0)`` and ``|b_ij(t)| <= c_b exp(-lambda |t|)``.  The
x-axis is a line of equilibria for ``B = 0`` and stays normally attracting
for large ``|t|``.  Two Lyapunov functions turn this into checkable
inequalities:

* cone:  ``6 c_b e^{-lambda|t|} < min(a22, a33)`` makes ``||y||^2 - x^2``
  decrease on ``{||y||^2 >= x^2}``;
* strip: ``2 c_b e^{-lambda|t|} (1 + (x0 + 2 rho)/r) < min(a22, a33)`` makes
  ``||y||^2`` decrease on ``[x0 - 2rho, x0 + 2rho] x {||y|| >= r}``.

Together with an integral bound on the drift of ``x`` they pin the backward
limit of the distinguished solution to ``[x* - rho, x* + rho]`` and every
forward limit from a set ``U_{x**, 0}`` to ``[x** - rho, x** + rho]``.  The
solution is carried from ``t = 0`` to ``t = T`` by integrating the base loop
and ``gamma`` together as one polynomial system.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .homoclinic import C_TARGET, HomoclinicCertificate, endpoint_norms, in_block
from .integrator import FlowEnclosure, IntegratorSettings, LohnerSet, TubeSegment, integrate
from .interval import Interval, as_interval, euclid_norm_sup, matmul
from .system import extended_sep_field, limit_eigendata, sep_frame_P, sep_parameter_box

__all__ = [
    "AdmissibilityFailed",
    "Admissibility",
    "SepConfig",
    "SepSettings",
    "SeparatrixCertificate",
    "c_b_bound",
    "check_backward",
    "check_cone_condition",
    "check_forward",
    "check_strip_condition",
    "compute_separatrix",
]

RATIO_BOUND = 2.0


class AdmissibilityFailed(RuntimeError):
    """One of the inequalities behind the limit bounds could not be verified."""

    def __init__(self, condition: str, detail: str = ""):
        super().__init__(f"{condition}: {detail}" if detail else condition)
        self.condition = condition
        self.detail = detail


def _imin(a: Interval, b: Interval) -> Interval:
    return Interval(min(float(a.lo), float(b.lo)), min(float(a.hi), float(b.hi)))


def _same(a: Interval, b: Interval) -> bool:
    a, b = as_interval(a), as_interval(b)
    return a.shape == b.shape and bool(np.array_equal(a.lo, b.lo) and np.array_equal(a.hi, b.hi))


def _lt(a, b) -> bool:
    """Rigorous a < b for scalar intervals (every element of a below every element of b)."""
    return bool(as_interval(a).hi < as_interval(b).lo)


@dataclass(frozen=True)
class SepConfig:
    """Constants of one application of the limit lemmas.

    ``x_star`` may be an interval: the forward lemma is then applied at every
    anchor in it, and all inequalities are checked for the whole range.
    """

    x_star: Interval
    rho: float
    r: float
    c_b: Interval
    lambda_decay: Interval
    a22: Interval
    a33: Interval
    t_star: float = 0.0
    t_star_star: float = 0.0
    T_flight: float = 26.0

    def __post_init__(self):
        if not (self.rho > 0 and self.r > 0):
            raise ValueError("rho and r must be positive")
        if not self.c_b.lo >= 0:
            raise ValueError("c_b must be non-negative")
        lam = self.lambda_decay
        if not (lam.lo > 0 and lam.hi <= 1):
            raise ValueError("lambda must lie in (0, 1]")

    @property
    def a_min(self) -> Interval:
        return _imin(as_interval(self.a22), as_interval(self.a33))

    def decay(self, t) -> Interval:
        """c_b exp(-lambda |t|) as an interval over the time interval ``t``."""
        t = as_interval(t)
        tmin = 0.0 if t.lo <= 0 <= t.hi else min(abs(float(t.lo)), abs(float(t.hi)))
        return self.c_b * (-(self.lambda_decay * tmin)).exp()


@dataclass(frozen=True)
class Admissibility:
    """Outcome of a lemma check; ``failed`` names the violated inequalities."""

    ok: bool
    route: str
    failed: tuple[str, ...] = ()
    margins: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.ok

    @property
    def witness(self) -> str | None:
        return self.failed[0] if self.failed else None


def check_cone_condition(cfg: SepConfig, t=0.0) -> bool:
    """6 c_b e^{-lambda|t|} < min(a22, a33) for every t in ``t``."""
    return _lt(6.0 * cfg.decay(t), cfg.a_min)


def check_strip_condition(cfg: SepConfig, x0, t=0.0) -> bool:
    """2 c_b e^{-lambda|t|} (1 + (x0 + 2 rho)/r) < min(a22, a33)."""
    x0 = as_interval(x0)
    strip = 1.0 + (x0 + 2.0 * cfg.rho) / cfg.r
    return _lt(2.0 * cfg.decay(t) * strip, cfg.a_min)


def _result(route: str, checks: dict[str, tuple[bool, Interval]]) -> Admissibility:
    failed = tuple(name for name, (ok, _) in checks.items() if not ok)
    return Admissibility(not failed, route, failed, {k: v for k, (_, v) in checks.items()})


def check_backward(cfg: SepConfig) -> Admissibility:
    """Assumptions of the backward limit lemma at anchor x*, time t* <= 0.

    With t* = 0, x* = 1 and r = rho the three simplified inequalities
    ``lambda - 4c_b > 0``, ``min(a22, a33) - 6c_b > 0`` and
    ``r > max(c_b/(lambda - 4c_b), 2c_b/(min - 6c_b))`` are checked;
    otherwise the cone, strip and drift conditions are checked directly.
    """
    if cfg.t_star > 0:
        raise ValueError("the backward anchor time must satisfy t* <= 0")
    c, lam, amin = cfg.c_b, cfg.lambda_decay, cfg.a_min
    x = as_interval(cfg.x_star)
    corollary = cfg.t_star == 0 and x.is_point() and float(x.lo) == 1.0 and cfg.r == cfg.rho
    if corollary:
        m_lam = lam - 4.0 * c
        m_cone = amin - 6.0 * c
        checks = {"lambda-margin": (_lt(0.0, m_lam), m_lam), "cone-margin": (_lt(0.0, m_cone), m_cone)}
        if checks["lambda-margin"][0] and checks["cone-margin"][0]:
            th1 = c / m_lam
            th2 = 2.0 * c / m_cone
            thr = Interval(max(float(th1.lo), float(th2.lo)), max(float(th1.hi), float(th2.hi)))
            checks["r-threshold"] = (_lt(thr, cfg.r), thr)
        else:
            checks["r-threshold"] = (False, Interval(np.inf))
        return _result("corollary", checks)
    drift = cfg.decay(cfg.t_star) / lam * (x + 2.0 * cfg.rho + 2.0 * cfg.r)
    checks = {
        "cone": (check_cone_condition(cfg, cfg.t_star), 6.0 * cfg.decay(cfg.t_star)),
        "strip": (check_strip_condition(cfg, x, cfg.t_star), x),
        "rho-t-r-link": (_lt(drift, cfg.rho), drift),
    }
    return _result("lemma", checks)


def check_forward(cfg: SepConfig, x_ss=None) -> Admissibility:
    """Assumptions of the forward limit lemma for every anchor x** in ``x_ss``.

    With t** = 0 the simplified inequalities are ``min - 6c_b > 0``,
    ``lambda - 2c_b > 0`` and
    ``c_b (x** + 2r)/(lambda - 2c_b) < rho < (r (min/(2c_b) - 1) - x**)/2``.
    """
    x = as_interval(cfg.x_star if x_ss is None else x_ss)
    c, lam, amin = cfg.c_b, cfg.lambda_decay, cfg.a_min
    if cfg.t_star_star < 0:
        raise ValueError("the forward anchor time must satisfy t** >= 0")
    if cfg.t_star_star == 0:
        m_cone = amin - 6.0 * c
        m_lam = lam - 2.0 * c
        checks = {"cone-margin": (_lt(0.0, m_cone), m_cone), "lambda-margin": (_lt(0.0, m_lam), m_lam)}
        if float(c.hi) == 0.0:
            upper = Interval(np.inf)
        else:
            upper = 0.5 * (cfg.r * (amin / (2.0 * c) - 1.0) - x)
        checks["upper-bound"] = (_lt(cfg.rho, upper), upper)
        if checks["lambda-margin"][0]:
            lower = c * (x + 2.0 * cfg.r) / m_lam
            checks["lower-bound"] = (_lt(lower, cfg.rho), lower)
        else:
            checks["lower-bound"] = (False, Interval(np.inf))
        return _result("corollary", checks)
    drift = cfg.decay(cfg.t_star_star) / lam * (x + 2.0 * cfg.rho + 2.0 * cfg.r)
    checks = {
        "cone": (check_cone_condition(cfg, cfg.t_star_star), 6.0 * cfg.decay(cfg.t_star_star)),
        "strip": (check_strip_condition(cfg, x, cfg.t_star_star), x),
        "rho-t-r-link": (_lt(drift, cfg.rho), drift),
    }
    return _result("lemma", checks)


# ---------------------------------------------------------------------------
# c_b from the homoclinic certificate
# ---------------------------------------------------------------------------


def b_entry_multipliers(a0) -> Interval:
    """m_ij with |b_ij(t)| <= m_ij max(|X0(t)|, |Z0(t)|), read off the B matrix.

    With k = (a0+1)/(a0+2) the entries are k Z0 (columns 1, 2 of rows 1, 2),
    2 X0/(a0+2) = 2(1-k) X0 (column 3 of rows 1, 2) and (a0+1) X0 (row 3).
    """
    a0 = as_interval(a0).reshape(())
    k = sep_parameter_box(a0)[1]
    one_k = 1.0 / (a0 + 2.0)
    zero = as_interval(0.0)
    row12 = Interval.stack([k, k, 2.0 * one_k])
    row3 = Interval.stack([a0 + 1.0, a0 + 1.0, zero])
    return Interval.stack([row12, row12, row3])


def c_b_from_norm(a0, decay_c: Interval, norm: Interval) -> Interval:
    """c_b = max_ij m_ij * 3.5 * ||p|| as a point upper bound.

    Every condition gets harder as c_b grows, so the upper bound is used.
    The largest multiplier is that of the (a0+1) X0 entries of the last row.
    """
    if not decay_c.hi < C_TARGET:
        raise AdmissibilityFailed("decay-constant", f"c ||C|| ||C^-1|| = {decay_c}")
    m_max = float(np.max(b_entry_multipliers(a0).hi))
    return Interval(float((as_interval(m_max) * C_TARGET * float(as_interval(norm).hi)).hi))


def c_b_bound(hom: HomoclinicCertificate, side: str) -> tuple[Interval, Interval]:
    """(c_b, lambda) for t <= 0 (``backward``) or for t >= T (``forward``).

    ``||p(t)|| <= 3.5 e^{-xi|t|} ||p||`` holds along the local manifolds and
    ``|b_ij| <= m_ij max(|X0|, |Z0|) <= m_ij ||p(t)||`` entry by entry, with
    the multipliers of :func:`b_entry_multipliers`.
    """
    if side not in ("backward", "forward"):
        raise ValueError("side must be 'backward' or 'forward'")
    n0, nT = endpoint_norms(hom)
    c_b = c_b_from_norm(hom.a_bracket, hom.decay_c, n0 if side == "backward" else nT)
    return c_b, Interval(float(hom.decay_xi.lo))


# ---------------------------------------------------------------------------
# the pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SepSettings:
    rho_backward: float = 1.6e-4
    rho_forward: float = 5.4e-5
    r_forward: float = 1e-4
    T_flight: float | None = None  # default: the homoclinic T
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)


@dataclass(frozen=True)
class SeparatrixCertificate:
    x_minus: Interval
    x_plus: Interval
    ratio_A: Interval
    config_backward: SepConfig
    config_forward: SepConfig
    Gamma: Interval  # gamma at t = T
    base_final_local: Interval  # C^{-1} (X, Y, Z) at t = T
    eta_minus: Interval  # x_minus * v0
    eta_plus: Interval  # x_plus * v0
    a_bracket: Interval
    gamma_tube: tuple[TubeSegment, ...] = field(default=(), repr=False)
    eta_tube: tuple[TubeSegment, ...] = field(default=(), repr=False)

    def reverify(self) -> list[str]:
        """Re-run the inequality checks and the arithmetic; returns failed names."""
        failed = []
        b = check_backward(self.config_backward)
        failed += [f"backward:{n}" for n in b.failed]
        f = check_forward(self.config_forward, self.config_forward.x_star)
        failed += [f"forward:{n}" for n in f.failed]
        cb, cf = self.config_backward, self.config_forward
        # derived quantities must be reproduced bit for bit
        if not _same(as_interval(cb.x_star) + Interval(-cb.rho, cb.rho), self.x_minus):
            failed.append("x-minus")
        if not _same(as_interval(cf.x_star) + Interval(-cf.rho, cf.rho), self.x_plus):
            failed.append("x-plus")
        if not _same(self.x_plus / self.x_minus, self.ratio_A):
            failed.append("ratio")
        if not (self.ratio_A.lo > 0 and self.ratio_A.hi < RATIO_BOUND):
            failed.append("maincheck")
        if float(euclid_norm_sup(self.Gamma[1:]).hi) > self.config_forward.r:
            failed.append("gamma-y-radius")
        return failed


def _initial_set(hom: HomoclinicCertificate, r: float) -> LohnerSet:
    """Base at C (W^u endpoint box), gamma in {1} x [-r, r]^2, parameters (a, k)."""
    cert_u = hom.cert_u
    C = cert_u.spec.frame.matrix
    pbox = sep_parameter_box(hom.a_bracket)
    pm = pbox.mid()
    n = 8
    B = np.eye(n)
    B[:3, :3] = C.lo
    center = np.concatenate([np.zeros(3), [1.0, 0.0, 0.0], pm])
    radius = Interval.concatenate([
        cert_u.endpoint_enclosure,
        Interval([0.0, -r, -r], [0.0, r, r]),
        pbox - pm,
    ])
    return LohnerSet(center, B, radius)


def _eta_tube(tube, P: Interval) -> tuple[TubeSegment, ...]:
    out = []
    for seg in tube:
        g = seg.box[3:6]
        out.append(TubeSegment(seg.t_lo, seg.t_hi, Interval.concatenate([seg.box[:3], matmul(P, g)])))
    return tuple(out)


def flight(hom: HomoclinicCertificate, r: float, T: float,
           settings: IntegratorSettings | None = None) -> FlowEnclosure:
    """Integrate base loop and gamma from t = 0 to t = T."""
    f = extended_sep_field(hom.a_bracket)
    return integrate(f, _initial_set(hom, r), T, settings)


def compute_separatrix(hom: HomoclinicCertificate, settings: SepSettings | None = None) -> SeparatrixCertificate:
    """Bounds on x_-, x_+ and their ratio, the separatrix value."""
    s = settings or SepSettings()
    a0 = hom.a_bracket
    a22, a33 = a0 + 2.0, a0
    c_back, lam = c_b_bound(hom, "backward")
    T = hom.T if s.T_flight is None else s.T_flight
    cfg_b = SepConfig(Interval(1.0), s.rho_backward, s.rho_backward, c_back, lam, a22, a33, T_flight=T)
    adm = check_backward(cfg_b)
    if not adm:
        raise AdmissibilityFailed(adm.witness, f"backward check, margins {adm.margins}")
    x_minus = Interval(1.0) + Interval(-s.rho_backward, s.rho_backward)

    flow = flight(hom, s.rho_backward, T, s.integrator)
    final = flow.final_box
    frame = hom.cert_u.spec.frame
    q = matmul(frame.inverse, final[:3])
    if not in_block(q, hom.cert_u.spec):
        raise AdmissibilityFailed("re-entry", f"base at t = {T} is not inside the block: {q}")
    Gamma = final[3:6]
    ny = euclid_norm_sup(Gamma[1:])
    if not float(ny.hi) <= s.r_forward:
        raise AdmissibilityFailed("gamma-y-radius", f"||(Gamma2, Gamma3)|| <= {ny.hi} exceeds r = {s.r_forward}")
    c_fwd, _ = c_b_bound(hom, "forward")
    cfg_f = SepConfig(Gamma[0], s.rho_forward, s.r_forward, c_fwd, lam, a22, a33,
                      t_star_star=0.0, T_flight=T)
    adm = check_forward(cfg_f, Gamma[0])
    if not adm:
        raise AdmissibilityFailed(adm.witness, f"forward check, margins {adm.margins}")
    x_plus = Gamma[0] + Interval(-s.rho_forward, s.rho_forward)
    ratio = x_plus / x_minus
    if not (ratio.lo > 0 and ratio.hi < RATIO_BOUND):
        raise AdmissibilityFailed("maincheck", f"ratio {ratio} is not inside (0, {RATIO_BOUND})")

    v0 = limit_eigendata(a0).eigenvectors[:, 0]
    P = sep_frame_P(a0).matrix
    return SeparatrixCertificate(
        x_minus=x_minus,
        x_plus=x_plus,
        ratio_A=ratio,
        config_backward=cfg_b,
        config_forward=cfg_f,
        Gamma=Gamma,
        base_final_local=q,
        eta_minus=x_minus * v0,
        eta_plus=x_plus * v0,
        a_bracket=a0,
        gamma_tube=flow.tube,
        eta_tube=_eta_tube(flow.tube, P),
    )
