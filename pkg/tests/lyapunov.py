"""Sampled Lyapunov decrease along gamma' = (A + B) gamma.

Samples draw constants (c_b, lambda, t, a22, a33) and keep only those the
interval check accepts, then draw a matrix B with |b_ij| <= c_b e^{-lambda|t|}
and a point of the region.  dV/dt is evaluated exactly with fractions, so a
reported violation is never a rounding artefact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from smproof.interval import Interval
from smproof.sepvalue import SepConfig, check_cone_condition, check_strip_condition


@dataclass
class SampleReport:
    admissible: int = 0
    violations: int = 0
    worst: float = -math.inf  # largest dV/dt relative to V scale


def _config(rng: np.random.Generator, rho: float = 1.0, r: float = 1.0) -> tuple[SepConfig, float]:
    a0 = rng.uniform(0.1, 3.0)
    a22, a33 = a0 + 2.0, a0
    if rng.random() < 0.5:
        a22, a33 = rng.uniform(0.1, 4.0, size=2)
    lam = rng.uniform(0.05, 1.0)
    t = rng.uniform(-5.0, 5.0) if rng.random() < 0.5 else 0.0
    # c_b spread over magnitudes so that many samples sit near the threshold
    c_b = min(a22, a33) * math.exp(lam * abs(t)) / 6.0 * rng.uniform(0.0, 1.3)
    cfg = SepConfig(Interval(1.0), rho, r, Interval(c_b), Interval(lam), Interval(a22), Interval(a33))
    return cfg, t


def _matrix(rng: np.random.Generator, beta: float) -> np.ndarray:
    B = rng.uniform(-beta, beta, size=(3, 3))
    extreme = rng.random((3, 3)) < 0.5
    return np.where(extreme, np.sign(B) * beta, B)


def _dv(cfg: SepConfig, B: np.ndarray, g: np.ndarray, cone: bool) -> Fraction:
    a22, a33 = Fraction(float(cfg.a22.lo)), Fraction(float(cfg.a33.lo))
    gf = [Fraction(float(v)) for v in g]
    Bf = [[Fraction(float(B[i, j])) for j in range(3)] for i in range(3)]
    rhs = [sum(Bf[i][j] * gf[j] for j in range(3)) for i in range(3)]
    rhs[1] -= a22 * gf[1]
    rhs[2] -= a33 * gf[2]
    dv = 2 * (gf[1] * rhs[1] + gf[2] * rhs[2])
    if cone:
        dv -= 2 * gf[0] * rhs[0]
    return dv


def cone_samples(n: int, seed: int = 0) -> SampleReport:
    """V = ||y||^2 - x^2 on {||y||^2 >= x^2} minus the origin."""
    rng = np.random.default_rng(seed)
    rep = SampleReport()
    while rep.admissible < n:
        cfg, t = _config(rng)
        if not check_cone_condition(cfg, t):
            continue
        beta = float(cfg.decay(t).hi)
        B = _matrix(rng, beta)
        scale = 10.0 ** rng.uniform(-6, 3)
        phi = rng.uniform(0, 2 * np.pi)
        ny = scale
        # |x| <= ||y||, with the boundary |x| = ||y|| drawn often
        x = ny * (rng.choice([-1.0, 1.0]) if rng.random() < 0.3 else rng.uniform(-1, 1))
        g = np.array([x, ny * np.cos(phi), ny * np.sin(phi)])
        dv = _dv(cfg, B, g, cone=True)
        rep.admissible += 1
        rep.worst = max(rep.worst, float(dv) / scale**2)
        rep.violations += dv >= 0
    return rep


def strip_samples(n: int, seed: int = 0) -> SampleReport:
    """V = ||y||^2 on [x0 - 2rho, x0 + 2rho] x {||y|| >= r}."""
    rng = np.random.default_rng(seed)
    rep = SampleReport()
    while rep.admissible < n:
        rho = 10.0 ** rng.uniform(-5, -1)
        r = 10.0 ** rng.uniform(-5, 0)
        cfg, t = _config(rng, rho, r)
        x0 = rng.uniform(0.1, 2.0)
        if not check_strip_condition(cfg, x0, t):
            continue
        beta = float(cfg.decay(t).hi)
        B = _matrix(rng, beta)
        x = x0 + 2 * rho * (rng.choice([-1.0, 1.0]) if rng.random() < 0.3 else rng.uniform(-1, 1))
        ny = r * (1.0 if rng.random() < 0.3 else 10.0 ** rng.uniform(0, 2))
        phi = rng.uniform(0, 2 * np.pi)
        g = np.array([x, ny * np.cos(phi), ny * np.sin(phi)])
        dv = _dv(cfg, B, g, cone=False)
        rep.admissible += 1
        rep.worst = max(rep.worst, float(dv) / ny**2)
        rep.violations += dv >= 0
    return rep
