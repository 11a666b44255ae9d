import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from schwarzschild_isosceles.charts import (
    ChartError, CylState, McGeheeState, RegState, cyl_to_mcgehee, cyl_to_reg, energy_residual,
    mass_metric, mcgehee_to_cyl, mcgehee_to_reg, mcgehee_vectors, phi_rate, reg_to_cyl,
    reg_to_mcgehee, relative_energy_residual,
)
from schwarzschild_isosceles.model import REFERENCE_PARAMS, potentials, reduced_hamiltonian

cyl_states = st.builds(
    CylState, st.floats(0.05, 10.0), st.floats(-5.0, 5.0), st.floats(-5.0, 5.0), st.floats(-5.0, 5.0)
)


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.max(np.abs(a - b) / np.maximum(np.abs(b), 1.0))


@settings(max_examples=300)
@given(cyl_states)
def test_cyl_round_trips(s):
    P = REFERENCE_PARAMS
    assert rel_err(mcgehee_to_cyl(P, cyl_to_mcgehee(P, s)), s) < 1e-12
    assert rel_err(reg_to_cyl(P, cyl_to_reg(P, s)), s) < 1e-11


@given(st.floats(0.01, 5), st.floats(-5, 5), st.floats(-math.pi / 2 + 1e-3, math.pi / 2 - 1e-3),
       st.floats(-5, 5))
def test_mcgehee_reg_round_trip(r, v, theta, u):
    P = REFERENCE_PARAMS
    m = McGeheeState(r, v, theta, u)
    assert rel_err(reg_to_mcgehee(P, mcgehee_to_reg(P, m)), m) < 1e-12


@given(cyl_states)
def test_blow_up_vectors(s):
    P = REFERENCE_PARAMS
    T = mass_metric(P)
    m = cyl_to_mcgehee(P, s)
    sv, uv = mcgehee_vectors(P, m)
    assert sv @ T @ sv == pytest.approx(1.0, rel=1e-12)
    assert abs(sv @ T @ uv) < 1e-12 * max(1.0, abs(m.u))
    # theta has the sign of z
    assert math.copysign(1, m.theta) == math.copysign(1, s.z) or s.z == 0


def test_hand_composed_example(P):
    m = cyl_to_mcgehee(P, CylState(1.0, 0.0, -1.0, 0.0))
    r = math.sqrt(0.5)
    assert m.r == pytest.approx(r, rel=1e-15)
    s1 = 1.0 / r  # R / r
    assert m.v == pytest.approx(r**1.5 * s1 * (-1.0), rel=1e-14)
    assert m.v == pytest.approx(-0.8408964152537145, rel=1e-14)
    assert m.theta == 0.0 and m.u == 0.0


def test_planar_maps_to_planar(P):
    m = cyl_to_mcgehee(P, CylState(2.0, 0.0, 0.3, 0.0))
    assert m.theta == 0.0 and m.u == 0.0
    g = mcgehee_to_reg(P, McGeheeState(1.0, 0.2, 0.0, 0.7))
    assert g.w == pytest.approx(0.7 / math.sqrt(potentials(P).W(0.0)), rel=1e-15)
    assert mcgehee_to_reg(P, McGeheeState(1.0, 0.2, 1.2, 0.0)).w == 0.0


def test_chart_domain_errors(P):
    with pytest.raises(ChartError):
        cyl_to_mcgehee(P, CylState(0.0, 1.0, 0, 0))
    with pytest.raises(ChartError):
        mcgehee_to_cyl(P, McGeheeState(0.0, 1.0, 0.1, 0))
    with pytest.raises(ChartError):
        mcgehee_to_cyl(P, McGeheeState(1.0, 1.0, math.pi / 2, 0))
    with pytest.raises(ChartError):
        reg_to_mcgehee(P, RegState(1.0, 1.0, math.pi / 2, 0.1))
    assert reg_to_mcgehee(P, RegState(1.0, 1.0, math.pi / 2, 0.0)).u == 0.0


def test_energy_residuals_on_collision_manifold(P):
    v0 = math.sqrt(2 * potentials(P).W(0.0))
    assert abs(energy_residual("reg", P, 0.0, 0.0, RegState(0, v0, 0, 0))) < 1e-15
    assert abs(energy_residual("reg", P, 1.7, -3.0, RegState(0, -v0, 0, 0))) < 1e-15
    with pytest.raises(ValueError):
        energy_residual("polar", P, 0, 0, (1, 2, 3, 4))


@settings(max_examples=200)
@given(cyl_states, st.floats(0.0, 4.0))
def test_cross_chart_energy_consistency(s, C):
    P = REFERENCE_PARAMS
    h = reduced_hamiltonian(P, C, *s)
    m = cyl_to_mcgehee(P, s)
    g = mcgehee_to_reg(P, m)
    assert relative_energy_residual("mcgehee", P, C, h, m) < 1e-12
    assert relative_energy_residual("reg", P, C, h, g) < 1e-12
    # shifted energy: residuals scale by r**3 and 2 cos**6 between charts
    rc = energy_residual("cyl", P, C, h + 0.1, s)
    rm = energy_residual("mcgehee", P, C, h + 0.1, m)
    rg = energy_residual("reg", P, C, h + 0.1, g)
    assert rm == pytest.approx(m.r**3 * rc, rel=1e-6, abs=1e-10)
    assert rg == pytest.approx(2 * math.cos(m.theta) ** 6 * rm, rel=1e-6, abs=1e-10)


def test_phi_rate(P):
    assert phi_rate(P, 0.0, 3.0) == 0.0
    assert phi_rate(P, 1.0, 1.0) == 2.0
    with pytest.raises(ValueError):
        phi_rate(P, 1.0, 0.0)
