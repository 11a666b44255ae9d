import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq, minimize_scalar

from schwarzschild_isosceles.model import (
    ModelParams, ParameterError, RegimeError, critical_angle_v, critical_angle_w, derive,
    equilibrium_energy, eval_angular, eval_effective, potentials, regime,
)

pos = st.floats(0.05, 10.0)


def pair_potentials(params, theta):
    """V and W rebuilt from the pairwise distances on the unit sphere r = 1."""
    a = math.sqrt(params.M / 2.0)
    b = math.sqrt(2.0 * params.M * params.m / (2.0 * params.M + params.m))
    R = math.cos(theta) / a
    z = math.sin(theta) / b
    d_side = math.sqrt(R * R + 4.0 * z * z)
    V = params.A / R + 4.0 * params.A1 / d_side
    W = params.B / R**3 + 16.0 * params.B1 / d_side**3
    return V, W


def test_reference_constants(P):
    d = derive(P)
    assert d.alpha == 5.0 and d.beta == pytest.approx(3.4, abs=1e-15)
    assert d.C0 == pytest.approx(51**0.25, rel=1e-15)
    assert abs(d.C0 - 2.67) < 0.01
    assert d.mu == pytest.approx(201.0)
    assert d.V0 == pytest.approx(math.sqrt(0.5) * 5, rel=1e-14)
    assert d.W0 == pytest.approx(0.5**1.5 * 3.4, rel=1e-14)


def test_theta_w_matches_golden_section_oracle(P):
    pot = potentials(P)
    res = minimize_scalar(pot.W, bounds=(0.001, math.pi / 2 - 0.001), method="bounded",
                          options={"xatol": 1e-12})
    # polish on a five-point central difference of W
    h = 1e-5
    dW = lambda t: (-pot.W(t + 2 * h) + 8 * pot.W(t + h) - 8 * pot.W(t - h) + pot.W(t - 2 * h)) / (12 * h)
    oracle = brentq(dW, res.x - 1e-3, res.x + 1e-3, xtol=1e-14)
    assert derive(P).theta_w == pytest.approx(oracle, abs=1e-10)
    assert derive(P).theta_w == pytest.approx(0.33423049615552436, abs=1e-13)


def test_theta_v_is_interior_minimum(P):
    pot = potentials(P)
    res = minimize_scalar(pot.V, bounds=(0.001, math.pi / 2 - 0.001), method="bounded",
                          options={"xatol": 1e-12})
    assert critical_angle_v(P) == pytest.approx(res.x, abs=1e-6)
    assert abs(pot.dV(critical_angle_v(P))) < 1e-10


def test_angular_potentials_from_pair_distances(P):
    for theta in np.linspace(-1.5, 1.5, 31):
        ap = eval_angular(P, theta)
        V, W = pair_potentials(P, theta)
        assert ap.V == pytest.approx(V, rel=1e-13)
        assert ap.W == pytest.approx(W, rel=1e-13)
        assert ap.U == pytest.approx(W * math.cos(theta) ** 3, rel=1e-12)


def test_angular_endpoints(P):
    ap = eval_angular(P, math.pi / 2)
    assert ap.U == pytest.approx(0.5**1.5 * 0.2, rel=1e-14)
    assert ap.dU == 0.0
    assert math.isinf(ap.V) and math.isinf(ap.W)


@given(st.floats(-1.5, 1.5))
def test_derivative_parity_and_fd(theta):
    from schwarzschild_isosceles.model import REFERENCE_PARAMS as P
    a, b = eval_angular(P, theta), eval_angular(P, -theta)
    assert a.dV == pytest.approx(-b.dV, rel=1e-12, abs=1e-12)
    assert a.dW == pytest.approx(-b.dW, rel=1e-12, abs=1e-12)
    pot = potentials(P)
    h = 1e-6
    for f, df in ((pot.V, pot.dV), (pot.W, pot.dW), (pot.U, pot.dU), (pot.dW, pot.d2W)):
        fd = (f(theta + h) - f(theta - h)) / (2 * h)
        assert df(theta) == pytest.approx(fd, rel=1e-5, abs=1e-6 * max(1.0, abs(f(theta))))


def test_u_stationary_at_zero_and_half_pi(P):
    pot = potentials(P)
    assert pot.dU(0.0) == 0.0
    assert abs(pot.dU(math.pi / 2)) < 1e-15


def test_w_minimum_is_strict(P):
    pot = potentials(P)
    tw = derive(P).theta_w
    assert pot.W(tw) < pot.W(0.0)
    assert pot.d2W(tw) > 0


@settings(max_examples=200)
@given(pos, pos, pos, pos)
def test_dual_critical_momentum_identity(A, A1, B, B1):
    d = derive(ModelParams(1.0, 0.01, A, A1, B, B1))
    assert abs((3 * d.alpha * d.beta) ** 0.25 - (12 * d.V0 * d.W0) ** 0.25) < 1e-12


@given(st.floats(0.1, 5.0), pos, pos)
def test_dual_identity_for_any_M(M, A, B):
    d = derive(ModelParams(M, 0.01, A, 1.0, B, 0.2))
    assert (12 * d.V0 * d.W0) ** 0.25 == pytest.approx(d.C0, rel=1e-13)


def test_effective_gradient_and_hessian(P):
    rng = np.random.default_rng(3)
    for _ in range(50):
        C, R, z = rng.uniform(0, 3), rng.uniform(0.3, 4), rng.uniform(-1, 1)
        e = eval_effective(P, C, R, z)
        h = 1e-6
        gR = (eval_effective(P, C, R + h, z).value - eval_effective(P, C, R - h, z).value) / (2 * h)
        gz = (eval_effective(P, C, R, z + h).value - eval_effective(P, C, R, z - h).value) / (2 * h)
        assert e.grad == pytest.approx([gR, gz], rel=1e-6, abs=1e-7)
        cols = []
        for k, (dR, dz) in enumerate(((h, 0), (0, h))):
            cols.append((eval_effective(P, C, R + dR, z + dz).grad - eval_effective(P, C, R - dR, z - dz).grad) / (2 * h))
        fd = np.column_stack(cols)
        assert np.allclose(e.hess, fd, rtol=1e-6, atol=1e-6 * np.abs(fd).max())
        assert e.hess[0, 1] == e.hess[1, 0]
    assert eval_effective(P, 3.0, 2.0, 0.0).grad[1] == 0.0


def test_effective_rejects_nonpositive_R(P):
    with pytest.raises(ValueError):
        eval_effective(P, 1.0, 0.0, 0.0)


def test_params_validation_and_json(tmp_path):
    with pytest.raises(ParameterError):
        ModelParams(1.0, 0.0, 1, 1, 1, 1)
    with pytest.raises(ParameterError):
        ModelParams.from_dict({"M": 1, "m": 1, "A": 1, "A1": 1, "B": 1, "B1": 1, "C": 2})
    p = tmp_path / "p.json"
    p.write_text('{"M": 1, "m": 0.01, "A": 1, "A1": 1, "B": 0.2, "B1": 0.2}')
    assert ModelParams.from_json(p) == ModelParams.from_json(p.read_text())


def test_regime_flags_and_failures():
    small = ModelParams(1.0, 1.0, 1.0, 0.01, 1.0, 0.001)  # mu = 3
    rep = regime(small)
    assert not rep.mu_large and not rep.cond_A and not rep.cond_B
    with pytest.raises(RegimeError):
        critical_angle_w(small)
    with pytest.raises(RegimeError):
        critical_angle_v(small)
    assert derive(small).theta_w is None


def test_energy_conventions_differ_by_M():
    p = ModelParams(2.0, 0.01, 1, 1, 0.2, 0.2)
    assert equilibrium_energy(p, 3.0, 2.0, "scaled") == pytest.approx(2.0 * equilibrium_energy(p, 3.0, 2.0))
    with pytest.raises(ValueError):
        equilibrium_energy(p, 3.0, 2.0, "other")
