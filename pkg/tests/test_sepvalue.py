from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from lyapunov import cone_samples, strip_samples
from smproof.homoclinic import endpoint_norms
from smproof.interval import Interval, matmul
from smproof.sepvalue import (
    AdmissibilityFailed,
    SepConfig,
    SepSettings,
    b_entry_multipliers,
    c_b_bound,
    c_b_from_norm,
    check_backward,
    check_cone_condition,
    check_forward,
    check_strip_condition,
    compute_separatrix,
)
from smproof.system import extended_sep_field, limit_eigendata, sep_frame_P

A0 = 1.72432329151541


def cfg(c_b=0.0, lam=1.0, a22=A0 + 2, a33=A0, rho=1e-4, r=1e-4, x=1.0, **kw) -> SepConfig:
    return SepConfig(Interval(x), rho, r, Interval(c_b), Interval(lam), Interval(a22), Interval(a33), **kw)


def test_cone_condition_examples():
    assert check_cone_condition(cfg(c_b=0.0), Interval(-50.0, 50.0))
    assert not check_cone_condition(cfg(c_b=1.0, lam=1.0, a22=1.0, a33=1.0), 0.0)
    assert check_cone_condition(cfg(c_b=2e-4, lam=0.9999), 0.0)
    # the decay factor helps away from t = 0
    assert check_cone_condition(cfg(c_b=1.0, lam=1.0, a22=1.0, a33=1.0), -3.0)


def test_strip_condition_examples():
    assert check_strip_condition(cfg(c_b=0.0), 1.0)
    # 2 * 0.1 * (1 + (1 + 2)/1) = 0.8
    assert check_strip_condition(cfg(c_b=0.1, a22=0.81, a33=5.0, rho=1.0, r=1.0), 1.0)
    assert not check_strip_condition(cfg(c_b=0.1, a22=0.79, a33=5.0, rho=1.0, r=1.0), 1.0)
    # at x0 = 1 and r = rho the condition reads 6 c_b + 2 c_b / r < min(a22, a33)
    assert check_strip_condition(cfg(c_b=1e-4, lam=0.9999, rho=1.6e-4, r=1.6e-4), 1.0)
    assert not check_strip_condition(cfg(c_b=2e-4, lam=0.9999, rho=1.6e-4, r=1.6e-4), 1.0)


def test_strip_condition_with_certified_coupling(homoclinic):
    c_b, lam = c_b_bound(homoclinic, "backward")
    a0 = homoclinic.a_bracket
    c = SepConfig(Interval(1.0), 1.6e-4, 1.6e-4, c_b, lam, a0 + 2.0, a0)
    assert check_strip_condition(c, 1.0) and check_cone_condition(c, 0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        cfg(rho=0.0)
    with pytest.raises(ValueError):
        cfg(c_b=-1.0)
    with pytest.raises(ValueError):
        cfg(lam=1.5)
    with pytest.raises(ValueError):
        check_backward(cfg(t_star=1.0))
    with pytest.raises(ValueError):
        check_forward(cfg(t_star_star=-1.0))


def test_backward_zero_coupling():
    res = check_backward(cfg(c_b=0.0, rho=1e-9, r=1e-9))
    assert res and res.route == "corollary" and res.witness is None


def test_backward_threshold(homoclinic):
    c_b, lam = c_b_bound(homoclinic, "backward")
    ok = check_backward(cfg(c_b=float(c_b.hi), lam=float(lam.lo), rho=1.6e-4, r=1.6e-4))
    assert ok
    thr = float(ok.margins["r-threshold"].hi)
    assert 1e-4 < thr < 1.6e-4
    bad = check_backward(cfg(c_b=float(c_b.hi), lam=float(lam.lo), rho=thr / 2, r=thr / 2))
    assert not bad and bad.witness == "r-threshold"


def test_backward_lemma_route():
    good = check_backward(cfg(c_b=1e-5, lam=0.9, rho=1e-3, r=1e-3, x=2.0))
    assert good.route == "lemma" and good
    bad = check_backward(cfg(c_b=1e-3, lam=0.9, rho=1e-4, r=1e-2, x=2.0, t_star=-1.0))
    assert not bad and "rho-t-r-link" in bad.failed


def test_forward_limits():
    res = check_forward(cfg(c_b=1e-300, rho=1e-3, r=1e-3), Interval(0.6))
    assert res
    assert float(res.margins["lower-bound"].hi) < 1e-290
    assert float(res.margins["upper-bound"].lo) > 1e290


def test_forward_upper_bound_violation(homoclinic):
    c_b, lam = c_b_bound(homoclinic, "forward")
    base = cfg(c_b=float(c_b.hi), lam=float(lam.lo), rho=5.4e-5, r=1e-4)
    x = Interval(0.6264)
    ok = check_forward(base, x)
    assert ok
    upper = float(ok.margins["upper-bound"].hi)
    bad = check_forward(replace(base, rho=upper * 1.5), x)
    assert not bad and bad.witness == "upper-bound"


def test_b_multipliers_bound_entries():
    rng = np.random.default_rng(8)
    f = extended_sep_field(Interval(A0))
    M = b_entry_multipliers(Interval(A0))
    A = np.diag([0.0, -(A0 + 2), -A0])
    for _ in range(200):
        X, Y, Z = rng.uniform(-1e-3, 1e-3, size=3)
        J = f.jacobian(Interval(np.array([X, Y, Z, 0.0, 0.0, 0.0]))).mid()
        B = J[3:, 3:] - A
        # subtracting A = diag(0, -(a+2), -a) cancels, leaving rounding at the scale of A
        assert np.all(np.abs(B) <= M.hi * max(abs(X), abs(Z)) * (1 + 1e-12) + 1e-14)


def test_c_b_examples(homoclinic):
    n0, nT = endpoint_norms(homoclinic)
    assert n0.hi <= 1.7e-5
    c_back, lam = c_b_bound(homoclinic, "backward")
    assert c_back.hi <= 2e-4 and lam.lo >= 1 - 1e-4
    assert c_b_from_norm(homoclinic.a_bracket, homoclinic.decay_c, Interval(0.0)).hi == 0.0
    c_fwd, _ = c_b_bound(homoclinic, "forward")
    same = c_b_from_norm(homoclinic.a_bracket, homoclinic.decay_c, nT)
    assert c_fwd.lo == same.lo and c_fwd.hi == same.hi
    with pytest.raises(ValueError):
        c_b_bound(homoclinic, "sideways")
    with pytest.raises(AdmissibilityFailed):
        c_b_from_norm(homoclinic.a_bracket, Interval(3.6), n0)


def test_separatrix_reproduces_published_bounds(separatrix):
    assert separatrix.x_minus.overlaps(Interval(0.99984336210766, 1.0001566378923))
    assert separatrix.x_plus.overlaps(Interval(0.62606812264791, 0.62663392848044))
    A = separatrix.ratio_A
    assert A.overlaps(Interval(0.62597007201516, 0.6267320984754))
    assert 0 < A.lo and A.hi < 2
    assert float(A.width()) <= 2e-2
    assert separatrix.reverify() == []


def test_ratio_is_stored_quotient(separatrix):
    q = separatrix.x_plus / separatrix.x_minus
    assert q.lo == separatrix.ratio_A.lo and q.hi == separatrix.ratio_A.hi


def test_eta_along_v0(separatrix):
    a0 = separatrix.a_bracket
    P = sep_frame_P(a0).matrix
    v0 = limit_eigendata(a0).eigenvectors[:, 0]
    assert v0.contains(np.array([1.0, -1.0, 0.0])).all()
    for x, eta in ((separatrix.x_minus, separatrix.eta_minus), (separatrix.x_plus, separatrix.eta_plus)):
        g = Interval.concatenate([x.reshape(1), Interval(np.zeros(2))])
        assert matmul(P, g).overlaps(eta)
        assert eta[0].contains(float(x.mid())) and eta[1].contains(-float(x.mid()))
        assert float(eta[2].mag()) == 0.0


def test_reverify_detects_tampering(separatrix):
    assert "ratio" in replace(separatrix, ratio_A=Interval(0.6, 0.7)).reverify()
    worse = replace(separatrix.config_backward, rho=1e-6, r=1e-6)
    assert "backward:r-threshold" in replace(separatrix, config_backward=worse).reverify()


def test_small_rho_is_refused(homoclinic):
    with pytest.raises(AdmissibilityFailed) as info:
        compute_separatrix(homoclinic, SepSettings(rho_backward=1e-6))
    assert info.value.condition == "r-threshold"


def test_lyapunov_cone_sample():
    rep = cone_samples(1500, seed=5)
    assert rep.admissible == 1500 and rep.violations == 0


def test_lyapunov_strip_sample():
    rep = strip_samples(1500, seed=6)
    assert rep.admissible == 1500 and rep.violations == 0
