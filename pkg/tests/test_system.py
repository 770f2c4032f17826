from __future__ import annotations

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smproof.interval import Interval, eye, matmul
from smproof.system import (
    C_ENTRY,
    Frame,
    SingularFrame,
    extended_sep_field,
    frame_entry,
    limit_eigendata,
    local_frame_C,
    origin_eigendata,
    param_convert,
    reversed_field,
    sep_frame_P,
    shimizu_field,
)

A0 = 1.72432329151541
A_BOX = Interval(A0 - 1e-13, A0 + 1e-13)

coord = st.floats(-2, 2, allow_nan=False)


def test_origin_is_equilibrium():
    f = shimizu_field(Interval(1.0, 3.0))
    v = f.evaluate(Interval(np.zeros(3)))
    assert np.all(v.lo == 0) and np.all(v.hi == 0)


def test_direct_substitution():
    v = shimizu_field(Interval(2.0)).evaluate(Interval(np.array([1.0, 0.0, 0.0])))
    assert v.contains(np.array([0.0, 3.0, 1.0])).all()


def test_origin_eigenvalues():
    ed = origin_eigendata(Interval(A0))
    assert ed.eigenvalues[0].contains(-1.0)
    assert ed.eigenvalues[1].contains(1.0)
    assert ed.eigenvalues[2].contains(-(1 + A0))
    J = shimizu_field(Interval(A0)).jacobian(Interval(np.zeros(3)))
    ev = np.sort(np.linalg.eigvals(J.mid()).real)
    assert np.allclose(ev, [-(1 + A0), -1.0, 1.0], atol=1e-12)


def test_reversed_field():
    f = shimizu_field(Interval(2.0))
    g = reversed_field(f)
    v = g.evaluate(Interval(np.array([1.0, 0.0, 0.0])))
    assert v.contains(np.array([0.0, -3.0, -1.0])).all()
    assert np.all(g.evaluate(Interval(np.zeros(3))).lo == 0)
    gg = reversed_field(g)
    box = Interval(np.array([-0.1, 0.2, 0.3]), np.array([0.0, 0.25, 0.4]))
    a, b = f.evaluate(box), gg.evaluate(box)
    assert np.array_equal(a.lo, b.lo) and np.array_equal(a.hi, b.hi)
    assert gg.name == f.name


@pytest.mark.parametrize("which", ["origin", "limit"])
def test_eigendata_residuals_contain_zero(which):
    ed = origin_eigendata(A_BOX) if which == "origin" else limit_eigendata(A_BOX)
    for r in ed.residuals():
        assert r.contains(np.zeros(3)).all()


def test_frames():
    C = local_frame_C()
    assert C.matrix[0, 1].contains(C_ENTRY) and C_ENTRY == -0.36706363121968
    R = C.residual()
    assert R.contains(np.eye(3)).all() and float(np.max(R.width())) <= 1e-12
    P = sep_frame_P(A_BOX)
    assert P.matrix[0, 1].contains(2.72432329151541)
    assert P.residual().contains(np.eye(3)).all()
    with pytest.raises(SingularFrame):
        Frame.from_matrix(Interval(np.ones((3, 3))))


def test_frame_entry_reproduces_constant():
    m = Interval(1.72432329151531, 1.72432329151551)
    assert frame_entry(m) == C_ENTRY
    assert abs(frame_entry(Interval(1.9)) + 1 / 2.9) < 1e-14


def test_param_convert():
    al, lam = param_convert(Interval(3.0))
    assert al.contains(0.5) and lam.contains(1.5)
    al, lam = param_convert(Interval(0.0))
    assert al.contains(1.0) and lam.contains(0.0)
    al, lam = param_convert(Interval(A0))
    # rounded values 0.6056 and 1.0443 are quoted only to about three digits
    assert abs(float(al.mid()) - 0.6056) < 1e-3 and abs(float(lam.mid()) - 1.0443) < 1e-3
    check = 1.0 / al - al - lam
    assert float(check.mag()) < 1e-12
    with mpmath.workdps(40):
        ref = 1 / mpmath.sqrt(mpmath.mpf(A0) + 1)
        assert mpmath.mpf(float(al.lo)) <= ref <= mpmath.mpf(float(al.hi))


def test_extended_field_examples():
    g = extended_sep_field(Interval(2.0))
    v = g.evaluate(Interval(np.array([0, 0, 0, 1.0, 0, 0])))
    assert np.all(v.lo[3:] <= 0) and np.all(v.hi[3:] >= 0) and float(np.max(v.mag()[3:])) == 0
    v = g.evaluate(Interval(np.array([0, 0, 0, 0, 1.0, 0])))
    assert v[4].contains(-4.0) and float(v[3].mag()) == 0 and float(v[5].mag()) == 0
    # B column 1 at X = Z = 1 with a0 = 2: (3/4) * (-1, -1, -4)
    v = g.evaluate(Interval(np.array([1.0, 0, 1.0, 1.0, 0, 0])))
    assert v[3].contains(-0.75) and v[4].contains(-0.75) and v[5].contains(-3.0)


@given(coord, coord, coord)
@settings(max_examples=100)
def test_extended_restricts_to_base(x, y, z):
    p = np.array([x, y, z])
    g = extended_sep_field(Interval(A0)).evaluate(Interval(np.concatenate([p, np.zeros(3)])))
    f = shimizu_field(Interval(A0)).evaluate(Interval(p))
    assert g[:3].overlaps(f)
    assert np.allclose(g.mid()[:3], f.mid(), rtol=1e-14, atol=1e-14)
    assert float(np.max(g.mag()[3:])) == 0


def test_extended_base_polynomials_equal_shimizu():
    def strip(polys, n_total, keep):
        out = []
        for p in polys:
            q = {}
            for e, c in p.items():
                assert all(e[j] == 0 for j in range(n_total) if j not in keep)
                q[tuple(e[j] for j in keep)] = (float(c.lo), float(c.hi))
            out.append(q)
        return out

    g = extended_sep_field(Interval(A0))
    f = shimizu_field(Interval(A0))
    base_g = strip(g.rhs.polys()[:3], 8, [0, 1, 2, 6])
    base_f = strip(f.rhs.polys(), 4, [0, 1, 2, 3])
    assert base_g == base_f


def test_jacobian_hull_contains_finite_differences():
    rng = np.random.default_rng(3)
    box = Interval(np.array([-0.5, -0.5, -0.5]), np.array([0.5, 0.5, 0.5]))
    for name, f, dim in (("sm", shimizu_field(A_BOX), 3), ("ext", extended_sep_field(A_BOX), 6)):
        big = Interval(np.full(dim, -0.5), np.full(dim, 0.5)) if dim == 6 else box
        J = f.jacobian(big)
        pm = f.parameter_box.mid()
        for _ in range(500):
            x = rng.uniform(-0.45, 0.45, size=dim)
            eps = 1e-6
            fd = np.empty((dim, dim))
            for j in range(dim):
                e = np.zeros(dim)
                e[j] = eps
                fd[:, j] = (f.rhs.eval_float(np.concatenate([x + e, pm]))
                            - f.rhs.eval_float(np.concatenate([x - e, pm]))) / (2 * eps)
            # polynomials of degree <= 3: central FD error is O(eps^2)
            assert np.all(fd >= J.lo - 1e-8) and np.all(fd <= J.hi + 1e-8), name


def test_conjugate_matches_matrix_formula():
    f = shimizu_field(Interval(A0))
    C = local_frame_C()
    loc = f.conjugate(C)
    p = np.array([1e-3, -2e-3, 5e-4])
    direct = matmul(C.inverse, f.evaluate(matmul(C.matrix, Interval(p))))
    assert loc.evaluate(Interval(p)).overlaps(direct)
    assert eye(3).subset(C.residual())
