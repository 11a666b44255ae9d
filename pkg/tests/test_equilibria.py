import csv
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from schwarzschild_isosceles.equilibria import (
    em_diagram, em_self_intersections, equilibrium_radii, linearization, relative_equilibria,
    stability_function, write_em_csv,
)
from schwarzschild_isosceles.flow import make_field
from schwarzschild_isosceles.model import derive, eval_effective, reduced_hamiltonian


def fd_jacobian(f, y, h=1e-6):
    y = np.asarray(y, float)
    cols = []
    for j in range(len(y)):
        e = np.zeros_like(y)
        e[j] = h
        cols.append((f.rhs(0, y + e) - f.rhs(0, y - e)) / (2 * h))
    return np.column_stack(cols)


def test_no_equilibria_below_critical(P):
    assert relative_equilibria(P, 2.0) == []


def test_degenerate_at_critical(P):
    C0 = derive(P).C0
    (eq,) = relative_equilibria(P, C0)
    assert eq.kind == "degenerate"
    assert eq.R == pytest.approx(math.sqrt(51) / 5, rel=1e-12)
    # the gradient has a double root there, so bracket the zero of its derivative
    oracle = brentq(lambda R: eval_effective(P, C0, R, 0.0).hess[0, 0], 1.0, 2.0, xtol=1e-14)
    assert eq.R == pytest.approx(oracle, rel=1e-10)
    assert abs(eval_effective(P, C0, eq.R, 0.0).grad[0]) < 1e-12
    assert min(abs(z) for z in eq.eigenvalues) < 1e-5


def test_values_at_C3(P):
    stable, unstable = relative_equilibria(P, 3.0)
    assert stable.R == pytest.approx(2.895445115010332, rel=1e-13)
    assert unstable.R == pytest.approx(0.704554884989668, rel=1e-12)
    oracle = brentq(lambda R: eval_effective(P, 3.0, R, 0.0).grad[0], 2.0, 4.0, xtol=1e-15)
    assert stable.R == pytest.approx(oracle, rel=1e-12)
    assert stable.kind == "stable" and unstable.kind == "unstable"
    assert all(abs(z.real) < 1e-8 * max(abs(w) for w in stable.eigenvalues) for z in stable.eigenvalues)
    reals = sorted(z.real for z in unstable.eigenvalues if abs(z.imag) < 1e-9)
    assert len(reals) == 2 and reals[0] == pytest.approx(-reals[1])
    assert stable.h == pytest.approx(9 / stable.R**2 - 5 / stable.R - 3.4 / stable.R**3, rel=1e-14)
    assert stable.h == pytest.approx(-0.79339, abs=1e-5)
    assert stable.h == pytest.approx(reduced_hamiltonian(P, 3.0, stable.R, 0, 0, 0), rel=1e-14)


def test_linearization_matches_finite_differences_and_closed_form(P):
    for C in (2.8, 3.0, 4.5):
        for eq in relative_equilibria(P, C):
            fd = fd_jacobian(make_field("reduced", P, C, 0.0), [eq.R, 0, 0, 0])
            assert np.allclose(linearization(P, C, eq.R), fd, rtol=1e-6, atol=1e-6 * np.abs(fd).max())
            num = sorted(eq.eigenvalues, key=lambda z: (z.real, z.imag))
            cf = sorted(eq.closed_form, key=lambda z: (z.real, z.imag))
            scale = max(abs(z) for z in num)
            assert all(abs(a - b) < 1e-8 * scale for a, b in zip(num, cf))


def test_quadratic_and_sign_analysis(P):
    d = derive(P)
    rng = np.random.default_rng(7)
    for C in rng.uniform(d.C0 * 1.001, 3 * d.C0, 100):
        R1, R2 = equilibrium_radii(P, C)
        for R in (R1, R2):
            assert d.alpha * R * R - 2 * C * C * R + 3 * d.beta == pytest.approx(0, abs=1e-9 * C * C * R)
            g = eval_effective(P, C, R, 0.0).grad
            assert np.linalg.norm(g) < 1e-9
        assert R2 < C * C / d.alpha < R1
        assert stability_function(P, C, R1) > 0 > stability_function(P, C, R2)


def test_em_diagram(P, tmp_path):
    pts = em_diagram(P, n=2000)
    assert [p.C for p in pts] == sorted(p.C for p in pts)
    C0 = derive(P).C0
    assert min(p.C for p in pts) >= C0 * (1 - 1e-12)
    assert not em_self_intersections(pts)
    R1 = relative_equilibria(P, 3.0)[0].R
    (q,) = em_diagram(P, (R1, R1 * 1.0000001), 2)[:1]
    assert q.C == pytest.approx(3.0, rel=1e-9)
    assert q.h == pytest.approx(-0.79339, abs=1e-5)
    path = tmp_path / "em.csv"
    write_em_csv(pts[:5], path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["R", "C", "h", "branch"] and len(rows) == 6


def test_em_self_intersection_detector_finds_planted_pair():
    from schwarzschild_isosceles.equilibria import EMPoint
    pts = [EMPoint(1.0, 3.0, -1.0, "stable"), EMPoint(2.0, 3.0, -1.0, "unstable")]
    assert len(em_self_intersections(pts)) == 1


def test_rejects_bad_input(P):
    with pytest.raises(ValueError):
        relative_equilibria(P, -1.0)
    with pytest.raises(ValueError):
        em_diagram(P, (0.0, 1.0), 10)
