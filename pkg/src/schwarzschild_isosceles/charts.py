"""Coordinate charts and the maps between them.

``CylState``      reduced cylindrical chart (R, z, P_R, P_z)
``McGeheeState``  blown-up chart (r, v, theta, u); singular at |theta| = pi/2
``RegState``      double-collision regularised chart (r, v, theta, w)

The intermediate vectors ``s`` and ``u_vec`` of the blow-up only exist inside
the composed transforms (see :func:`mcgehee_vectors`).
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .model import HALF_PI, ModelParams, potentials, reduced_hamiltonian

#: distance from +-pi/2 below which the McGehee chart is treated as invalid
MCGEHEE_THETA_MARGIN = 1e-6


class ChartError(ValueError):
    """A state lies outside the domain of the requested chart or map."""


class CylState(NamedTuple):
    R: float
    z: float
    P_R: float
    P_z: float


class McGeheeState(NamedTuple):
    r: float
    v: float
    theta: float
    u: float


class RegState(NamedTuple):
    r: float
    v: float
    theta: float
    w: float


def mass_metric(params: ModelParams) -> np.ndarray:
    """The matrix T with kinetic energy p^T T^{-1} p / 2 and r**2 = x^T T x."""
    return np.diag([params.M / 2.0, 2.0 * params.M * params.m / (2.0 * params.M + params.m)])


def _scales(params: ModelParams) -> tuple[float, float]:
    return math.sqrt(params.M / 2.0), math.sqrt(2.0 * params.M * params.m / (2.0 * params.M + params.m))


def cyl_to_mcgehee(params: ModelParams, s: CylState) -> McGeheeState:
    R, z, P_R, P_z = s
    if not R > 0:
        raise ChartError(f"cylindrical chart needs R > 0, got {R!r}")
    a, b = _scales(params)
    xi, eta = a * R, b * z
    r = math.hypot(xi, eta)
    theta = math.atan2(eta, xi)
    v = math.sqrt(r) * (R * P_R + z * P_z)
    u = r**1.5 * (-math.sin(theta) * P_R / a + math.cos(theta) * P_z / b)
    return McGeheeState(r, v, theta, u)


def mcgehee_to_cyl(params: ModelParams, s: McGeheeState) -> CylState:
    r, v, theta, u = s
    if not r > 0:
        raise ChartError(f"inverse blow-up needs r > 0, got {r!r}")
    if not abs(theta) < HALF_PI:
        raise ChartError(f"inverse blow-up needs |theta| < pi/2, got {theta!r}")
    a, b = _scales(params)
    c, sn = math.cos(theta), math.sin(theta)
    k = r**-1.5
    return CylState(
        R=r * c / a,
        z=r * sn / b,
        P_R=a * k * (v * c - u * sn),
        P_z=b * k * (v * sn + u * c),
    )


def mcgehee_vectors(params: ModelParams, s: McGeheeState) -> tuple[np.ndarray, np.ndarray]:
    """The unit configuration vector ``s`` and scaled tangential momentum ``u_vec``."""
    a, b = _scales(params)
    c, sn = math.cos(s.theta), math.sin(s.theta)
    return np.array([c / a, sn / b]), s.u * np.array([-sn / a, c / b])


def mcgehee_valid(s: McGeheeState, margin: float = MCGEHEE_THETA_MARGIN) -> bool:
    return s.r >= 0 and abs(s.theta) < HALF_PI - margin


def mcgehee_to_reg(params: ModelParams, s: McGeheeState) -> RegState:
    r, v, theta, u = s
    if not abs(theta) < HALF_PI:
        raise ChartError(f"McGehee chart needs |theta| < pi/2, got {theta!r}")
    c = math.cos(theta)
    return RegState(r, v, theta, c**3 * u / math.sqrt(potentials(params).U(theta)))


def reg_to_mcgehee(params: ModelParams, s: RegState) -> McGeheeState:
    r, v, theta, w = s
    if abs(theta) > HALF_PI:
        raise ChartError(f"|theta| must be <= pi/2, got {theta!r}")
    if abs(theta) == HALF_PI:
        if w != 0:
            raise ChartError("u is unbounded at theta = +-pi/2 with w != 0")
        return McGeheeState(r, v, theta, 0.0)
    c = math.cos(theta)
    return McGeheeState(r, v, theta, w * math.sqrt(potentials(params).U(theta)) / c**3)


def cyl_to_reg(params: ModelParams, s: CylState) -> RegState:
    return mcgehee_to_reg(params, cyl_to_mcgehee(params, s))


def reg_to_cyl(params: ModelParams, s: RegState) -> CylState:
    return mcgehee_to_cyl(params, reg_to_mcgehee(params, s))


def energy_residual(chart: str, params: ModelParams, C: float, h: float, state) -> float:
    """Left minus right side of the chart's energy relation.

    The McGehee residual equals ``r**3`` times the cylindrical one and the
    regularised residual equals ``2 cos(theta)**6`` times the McGehee one.
    """
    if chart == "cyl":
        R, z, P_R, P_z = state
        return reduced_hamiltonian(params, C, R, z, P_R, P_z) - h
    pot = potentials(params)
    if chart == "mcgehee":
        r, v, theta, u = state
        c = math.cos(theta)
        return (0.5 * (u * u + v * v) + C * C * r / (2.0 * c * c)
                - r * r * pot.V(theta) - pot.W(theta) - h * r**3)
    if chart == "reg":
        r, v, theta, w = state
        c = math.cos(theta)
        U = pot.U(theta)
        return (U * w * w + (v * v * c**3 - 2.0 * U) * c**3
                + (C * C - 2.0 * r * pot.Vcos(theta) * c) * r * c**4
                - 2.0 * h * r**3 * c**6)
    raise ValueError(f"unknown chart {chart!r}; expected 'cyl', 'mcgehee' or 'reg'")


def phi_rate(params: ModelParams, C: float, R: float) -> float:
    """Angular speed of the equal-mass pair about the vertical axis."""
    if not R > 0:
        raise ValueError(f"R must be > 0, got {R!r}")
    return 2.0 * C / (params.M * R * R)


def relative_energy_residual(chart: str, params: ModelParams, C: float, h: float, state) -> float:
    """Energy residual divided by the sum of the magnitudes of its terms."""
    res = energy_residual(chart, params, C, h, state)
    pot = potentials(params)
    if chart == "cyl":
        R, z, P_R, P_z = state
        kR = 2.0 / params.M
        kz = (2.0 * params.M + params.m) / (2.0 * params.M * params.m)
        rho = R * R + 4.0 * z * z
        scale = (0.5 * (kR * P_R**2 + kz * P_z**2) + C * C / (params.M * R * R) + params.A / R
                 + params.B / R**3 + 4.0 * params.A1 / rho**0.5 + 16.0 * params.B1 / rho**1.5 + abs(h))
    elif chart == "mcgehee":
        r, v, theta, u = state
        c = math.cos(theta)
        scale = (0.5 * (u * u + v * v) + C * C * r / (2.0 * c * c) + r * r * pot.V(theta)
                 + pot.W(theta) + abs(h) * r**3)
    else:
        r, v, theta, w = state
        c = math.cos(theta)
        U = pot.U(theta)
        # U keeps the scale finite where every other term vanishes (|theta| -> pi/2)
        scale = (U + U * w * w + v * v * c**6 + 2.0 * U * c**3 + C * C * r * c**4
                 + 2.0 * r * r * pot.Vcos(theta) * c**5 + 2.0 * abs(h) * r**3 * c**6)
    return abs(res) / scale if scale > 0 else abs(res)
