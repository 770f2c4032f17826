"""The seven acceptance criteria, each at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line (also collected in the
terminal summary) before asserting.
"""

from __future__ import annotations

import time

import mpmath
import numpy as np

from conftest import ACCEPTANCE_LINES
from fields import containment_case, linear_field
from lyapunov import cone_samples, strip_samples
from mutate import mutated, recomputed_leaves, sign_critical_leaves
from oracles import check_containment
from smproof.certio import verify
from smproof.config import ProofConfig
from smproof.homoclinic import prove_homoclinic
from smproof.integrator import IntegratorSettings, integrate
from smproof.interval import Interval
from smproof.manifold import decay_product
from smproof.sepvalue import compute_separatrix

XI1 = 0.99999999967813
XI2 = 0.99998045374688
A_PUBLISHED = Interval(0.62597007201516, 0.6267320984754)
BUDGET = 120.0

_timings: dict[str, float] = {}


def _report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def _agree_after_0999(x: float, ref: float) -> bool:
    # four significant digits after the leading 0.999 is a half unit of 1e-7
    return abs(x - ref) < 0.5e-7


def test_criterion_1_homoclinic_bracket():
    cfg = ProofConfig(a_left="1.72432329151531", a_right="1.72432329151551", R=1e-5, L=4e-5, T=26.0)
    t0 = time.perf_counter()
    cert = prove_homoclinic(cfg.bracket(), cfg.homoclinic_settings())
    elapsed = time.perf_counter() - t0
    _timings["homoclinic"] = elapsed
    hl, hr = cert.h_left, cert.h_right
    box = Interval(-1e-8, 1e-8)
    ok = (hl.lo > 0 and hr.hi < 0 and hl.subset(box) and hr.subset(box)
          and float(hl.width()) <= 1e-8 and float(hr.width()) <= 1e-8 and elapsed <= BUDGET)
    _report(1, ok, f"h(a_l) = {hl}, h(a_r) = {hr}, {elapsed:.1f} s")
    assert ok


def test_criterion_2_rate_constants(homoclinic):
    # xi_graph is the xi lower bound each certificate uses in its contraction estimate
    xi1 = float(homoclinic.cert_u.xi_graph.lo)
    xi2 = float(homoclinic.cert_s.xi_graph.lo)
    over_D = (float(homoclinic.cert_u.xi_arrow.lo), float(homoclinic.cert_s.xi_arrow.lo))
    prod = decay_product(homoclinic.cert_u.c, homoclinic.cert_u.spec.frame)
    ok1, ok2 = _agree_after_0999(xi1, XI1), _agree_after_0999(xi2, XI2)
    ok3 = prod.hi < 3.5 and homoclinic.decay_c.hi < 3.5
    ok = ok1 and ok2 and ok3
    _report(2, ok, f"xi1 {xi1!r} ({'match' if ok1 else 'mismatch'}), xi2 {xi2!r} "
                   f"({'match' if ok2 else 'mismatch'}), over D {over_D[0]!r} / {over_D[1]!r}, "
                   f"decay product <= {float(prod.hi):.6f}")
    assert ok


def test_criterion_3_separatrix_value(homoclinic):
    t0 = time.perf_counter()
    sep = compute_separatrix(homoclinic, ProofConfig().sep_settings())
    elapsed = time.perf_counter() - t0
    A = sep.ratio_A
    ok = (A.overlaps(A_PUBLISHED) and float(A.width()) <= 2e-2 and A.lo > 0 and A.hi < 2
          and sep.reverify() == [] and elapsed <= BUDGET)
    total = elapsed + _timings.get("homoclinic", 0.0)
    _report(3, ok, f"A in {A}, width {float(A.width()):.3e}, separatrix stage {elapsed:.1f} s "
                   f"(with homoclinic stage {total:.1f} s)")
    assert ok


def test_criterion_4_interval_containment():
    rep = check_containment(10**6, seed=2024)
    ok = rep.checked == 10**6 and not rep.violations
    _report(4, ok, f"{rep.checked} operations, {len(rep.violations)} violations")
    assert ok, rep.violations[:5]


def test_criterion_5_integrator_containment():
    counts = {"linear": 334, "shimizu": 333, "extended": 333}
    samples = outside = 0
    for i, (kind, n) in enumerate(counts.items()):
        s, bad, _ = containment_case(kind, n, seed=100 + i)
        samples += s
        outside += bad
    widths = []
    with mpmath.workdps(30):
        e = mpmath.exp(-1)
        decay_ok = True
        for order in (15, 20, 24):
            fb = integrate(linear_field([-1.0]), Interval(np.array([1.0])), 1.0,
                           IntegratorSettings(taylor_order=order)).final_box
            widths.append(float(fb.width()[0]))
            decay_ok &= mpmath.mpf(float(fb.lo[0])) <= e <= mpmath.mpf(float(fb.hi[0])) and widths[-1] <= 1e-9
    ok = outside == 0 and decay_ok
    _report(5, ok, f"{sum(counts.values())} initial points, {samples} samples, {outside} outside; "
                   f"e^-1 widths {', '.join(f'{w:.1e}' for w in widths)}")
    assert ok


def test_criterion_6_certificate_soundness(homoclinic_doc, separatrix_doc):
    clean = verify(homoclinic_doc) == [] and verify(separatrix_doc) == []
    rng = np.random.default_rng(6)
    total = caught = rec_total = rec_caught = 0
    escaped = []
    for doc in (homoclinic_doc, separatrix_doc):
        for path in sign_critical_leaves(doc):
            total += 1
            if verify(mutated(doc, path, rng), deep=False):
                caught += 1
            else:
                escaped.append(path)
        # the re-derivation itself, with the digest switched off
        for path in recomputed_leaves(doc):
            rec_total += 1
            if verify(mutated(doc, path, rng), check_digest=False):
                rec_caught += 1
            else:
                escaped.append(("no-digest",) + path)
    ok = clean and caught == total and rec_caught == rec_total
    _report(6, ok, f"clean verify {clean}; {caught}/{total} single-digit mutations rejected, "
                   f"{rec_caught}/{rec_total} rejected by recomputation alone")
    assert ok, escaped[:5]


def test_criterion_7_lyapunov_sampling():
    cone = cone_samples(10**4, seed=77)
    strip = strip_samples(10**4, seed=78)
    ok = all(r.admissible == 10**4 and r.violations == 0 for r in (cone, strip))
    _report(7, ok, f"cone {cone.admissible} samples / {cone.violations} violations "
                   f"(worst scaled dV/dt {cone.worst:.3e}), strip {strip.admissible} / {strip.violations} "
                   f"(worst {strip.worst:.3e})")
    assert ok
