"""Physical parameters, derived constants and the potential functions.

Two equal masses ``M`` move in a horizontal plane, symmetric about the
vertical axis that carries the third mass ``m``.  Every pair interacts
through ``-A/r - B/r**3`` (the equal pair) or ``-A1/r - B1/r**3`` (the
unequal pairs).  After symmetry reduction the dynamics lives in the
cylindrical chart ``(R, z, P_R, P_z)`` with angular momentum ``C`` as a
parameter.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from functools import lru_cache
from pathlib import Path
from types import ModuleType

import numpy as np

HALF_PI = 0.5 * math.pi

#: accepted values of the M-factor convention used for relative-equilibrium energies
CONVENTIONS = ("hamiltonian", "scaled")


class ParameterError(ValueError):
    """Raised for invalid physical parameters or malformed parameter files."""


class RegimeError(ValueError):
    """Raised when a quantity is requested outside the regime where it exists."""


@dataclass(frozen=True)
class ModelParams:
    M: float
    m: float
    A: float
    A1: float
    B: float
    B1: float

    def __post_init__(self):
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ParameterError(f"{f.name} must be a number, got {val!r}")
            if not math.isfinite(val) or val <= 0:
                raise ParameterError(f"{f.name} must be finite and > 0, got {val!r}")
            object.__setattr__(self, f.name, float(val))

    @property
    def mu(self) -> float:
        return (2.0 * self.M + self.m) / self.m

    @property
    def gamma(self) -> float:
        return 16.0 * self.B1 / self.B

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        missing = names - set(data)
        if unknown:
            raise ParameterError(f"unknown parameter keys: {sorted(unknown)}")
        if missing:
            raise ParameterError(f"missing parameter keys: {sorted(missing)}")
        return cls(**{k: data[k] for k in names})

    @classmethod
    def from_json(cls, source) -> "ModelParams":
        """Load from a JSON file path or a JSON string."""
        text = str(source)
        if not text.lstrip().startswith("{"):
            text = Path(source).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ParameterError("parameter document must be a JSON object")
        return cls.from_dict(data)


#: the parameter set used in the figures: alpha = 5, beta = 3.4, mu = 201
REFERENCE_PARAMS = ModelParams(M=1.0, m=0.01, A=1.0, A1=1.0, B=0.2, B1=0.2)


class Potentials:
    """Closed forms of V(theta), W(theta), U(theta) = W cos^3 and derivatives.

    ``ops`` selects the elementary functions: :mod:`math` for speed, or
    :mod:`cmath` so that complex-step differentiation can run through the
    same code.
    """

    def __init__(self, params: ModelParams, ops: ModuleType = math):
        self.params = params
        self.ops = ops
        self.kv = math.sqrt(params.M / 2.0)
        self.kw = (params.M / 2.0) ** 1.5
        self.mu = params.mu
        self.A, self.A1, self.B, self.B1 = params.A, params.A1, params.B, params.B1

    def _cs(self, theta):
        c = self.ops.cos(theta)
        s = self.ops.sin(theta)
        return c, s, c * c + self.mu * s * s

    def V(self, theta):
        c, _, D = self._cs(theta)
        return self.kv * (self.A / c + 4.0 * self.A1 / self.ops.sqrt(D))

    def W(self, theta):
        c, _, D = self._cs(theta)
        return self.kw * (self.B / c**3 + 16.0 * self.B1 / D**1.5)

    def U(self, theta):
        c, _, D = self._cs(theta)
        return self.kw * (self.B + 16.0 * self.B1 * c**3 / D**1.5)

    def dV(self, theta):
        c, s, D = self._cs(theta)
        return self.kv * (self.A * s / c**2 - 4.0 * self.A1 * (self.mu - 1.0) * s * c / D**1.5)

    def dW(self, theta):
        c, s, D = self._cs(theta)
        return self.kw * (3.0 * self.B * s / c**4 - 48.0 * self.B1 * (self.mu - 1.0) * s * c / D**2.5)

    def d2W(self, theta):
        c, s, D = self._cs(theta)
        dD = 2.0 * (self.mu - 1.0) * s * c
        d2D = 2.0 * (self.mu - 1.0) * (c * c - s * s)
        cubic = 3.0 / c**3 + 12.0 * s * s / c**5
        inner = 3.75 * dD * dD / D**3.5 - 1.5 * d2D / D**2.5
        return self.kw * (self.B * cubic + 16.0 * self.B1 * inner)

    def dU(self, theta):
        c, s, D = self._cs(theta)
        return -48.0 * self.kw * self.B1 * self.mu * s * c * c / D**2.5

    def Vcos(self, theta):
        """V(theta) cos(theta); finite on the closed interval."""
        c, _, D = self._cs(theta)
        return self.kv * (self.A + 4.0 * self.A1 * c / self.ops.sqrt(D))

    def dVcos2(self, theta):
        """V'(theta) cos(theta)**2; finite on the closed interval."""
        c, s, D = self._cs(theta)
        return self.kv * (self.A * s - 4.0 * self.A1 * (self.mu - 1.0) * s * c**3 / D**1.5)


@lru_cache(maxsize=256)
def potentials(params: ModelParams) -> Potentials:
    return Potentials(params)


@dataclass(frozen=True)
class RegimeReport:
    mu_large: bool
    cond_A: bool
    cond_B: bool
    generic: bool

    @property
    def all_hold(self) -> bool:
        return self.mu_large and self.cond_A and self.cond_B and self.generic


def regime(params: ModelParams, mu_threshold: float = 100.0, generic_rtol: float = 1e-9) -> RegimeReport:
    mu = params.mu
    lhs = (mu - 1.0) ** (4.0 / 15.0) * (4.0 * params.A1 / params.A) ** (2.0 / 3.0)
    rhs = params.gamma**0.4
    return RegimeReport(
        mu_large=mu > mu_threshold,
        cond_A=mu > 1.0 + params.A / (4.0 * params.A1),
        cond_B=mu > 1.0 + params.B / (16.0 * params.B1),
        generic=abs(lhs - rhs) > generic_rtol * max(abs(lhs), abs(rhs)),
    )


def critical_angle_v(params: ModelParams) -> float:
    """Interior minimiser of V on (0, pi/2)."""
    if not regime(params).cond_A:
        raise RegimeError("mu <= 1 + A/(4 A1): V has no interior critical point")
    mu = params.mu
    cos2 = mu / ((mu - 1.0) + (mu - 1.0) ** (2.0 / 3.0) * (4.0 * params.A1 / params.A) ** (2.0 / 3.0))
    return math.acos(math.sqrt(cos2))


def critical_angle_w(params: ModelParams) -> float:
    """Interior minimiser of W on (0, pi/2)."""
    if not regime(params).cond_B:
        raise RegimeError("mu <= 1 + B/(16 B1): W has no interior critical point")
    mu = params.mu
    cos2 = mu / ((mu - 1.0) + (mu - 1.0) ** 0.4 * params.gamma**0.4)
    return math.acos(math.sqrt(cos2))


@dataclass(frozen=True)
class DerivedConstants:
    mu: float
    alpha: float
    beta: float
    C0: float
    V0: float
    W0: float
    theta_v: float | None
    theta_w: float | None
    gamma: float
    regime: RegimeReport

    def to_dict(self) -> dict:
        out = asdict(self)
        out["regime"] = asdict(self.regime)
        return out


def derive(params: ModelParams, mu_threshold: float = 100.0, generic_rtol: float = 1e-9) -> DerivedConstants:
    """Closed-form constants.  Critical angles are ``None`` outside their regime."""
    rep = regime(params, mu_threshold, generic_rtol)
    alpha = params.M * (params.A + 4.0 * params.A1)
    beta = params.M * (params.B + 16.0 * params.B1)
    pot = potentials(params)
    return DerivedConstants(
        mu=params.mu,
        alpha=alpha,
        beta=beta,
        C0=(3.0 * alpha * beta) ** 0.25,
        V0=pot.V(0.0),
        W0=pot.W(0.0),
        theta_v=critical_angle_v(params) if rep.cond_A else None,
        theta_w=critical_angle_w(params) if rep.cond_B else None,
        gamma=params.gamma,
        regime=rep,
    )


@dataclass(frozen=True)
class AngularPotentials:
    V: float
    W: float
    U: float
    dV: float
    dW: float
    dU: float


def eval_angular(params: ModelParams, theta: float) -> AngularPotentials:
    """V, W, U and their first derivatives at ``theta``.

    V, W and their derivatives are reported as ``inf`` (signed for the
    derivatives) at exactly +-pi/2, where they blow up.  U and U' stay finite.
    """
    if not abs(theta) <= HALF_PI:
        raise ValueError(f"|theta| must be <= pi/2, got {theta!r}")
    pot = potentials(params)
    if abs(theta) == HALF_PI:
        sign = math.copysign(1.0, theta)
        return AngularPotentials(
            V=math.inf, W=math.inf, U=pot.kw * params.B,
            dV=sign * math.inf, dW=sign * math.inf, dU=0.0,
        )
    return AngularPotentials(
        V=pot.V(theta), W=pot.W(theta), U=pot.U(theta),
        dV=pot.dV(theta), dW=pot.dW(theta), dU=pot.dU(theta),
    )


@dataclass(frozen=True)
class EffectivePotential:
    value: float
    grad: np.ndarray
    hess: np.ndarray


def effective_potential(params: ModelParams, C: float, R, z):
    p = params
    rho = R * R + 4.0 * z * z
    return (C * C / (p.M * R * R) - p.A / R - p.B / R**3
            - 4.0 * p.A1 / rho**0.5 - 16.0 * p.B1 / rho**1.5)


def eval_effective(params: ModelParams, C: float, R: float, z: float) -> EffectivePotential:
    """Amended potential with analytic gradient and Hessian in (R, z)."""
    if not R > 0:
        raise ValueError(f"R must be > 0, got {R!r}")
    p = params
    rho = R * R + 4.0 * z * z
    r3, r5, r7 = rho**-1.5, rho**-2.5, rho**-3.5
    value = effective_potential(params, C, R, z)
    gR = (-2.0 * C * C / (p.M * R**3) + p.A / R**2 + 3.0 * p.B / R**4
          + 4.0 * p.A1 * R * r3 + 48.0 * p.B1 * R * r5)
    gz = 16.0 * p.A1 * z * r3 + 192.0 * p.B1 * z * r5
    hRR = (6.0 * C * C / (p.M * R**4) - 2.0 * p.A / R**3 - 12.0 * p.B / R**5
           + 4.0 * p.A1 * (r3 - 3.0 * R * R * r5) + 48.0 * p.B1 * (r5 - 5.0 * R * R * r7))
    hRz = -48.0 * p.A1 * R * z * r5 - 960.0 * p.B1 * R * z * r7
    hzz = 16.0 * p.A1 * (r3 - 12.0 * z * z * r5) + 192.0 * p.B1 * (r5 - 20.0 * z * z * r7)
    return EffectivePotential(
        value=value,
        grad=np.array([gR, gz]),
        hess=np.array([[hRR, hRz], [hRz, hzz]]),
    )


def kinetic_weights(params: ModelParams) -> tuple[float, float]:
    """Diagonal of the inverse mass matrix: H_kin = (k_R P_R**2 + k_z P_z**2)/2."""
    return 2.0 / params.M, (2.0 * params.M + params.m) / (2.0 * params.M * params.m)


def reduced_hamiltonian(params: ModelParams, C: float, R, z, P_R, P_z):
    kR, kz = kinetic_weights(params)
    return 0.5 * (kR * P_R * P_R + kz * P_z * P_z) + effective_potential(params, C, R, z)


def equilibrium_energy(params: ModelParams, C: float, R, convention: str = "hamiltonian"):
    """Energy of the rotating collinear configuration at radius ``R``.

    ``"hamiltonian"`` evaluates the reduced Hamiltonian exactly
    (``C**2/(M R**2) - (A+4A1)/R - (B+16B1)/R**3``).  ``"scaled"`` uses
    ``C**2/R**2 - alpha/R - beta/R**3``, which is ``M`` times the former;
    the two agree when ``M == 1``.
    """
    if convention == "hamiltonian":
        return (C * C / (params.M * R * R) - (params.A + 4.0 * params.A1) / R
                - (params.B + 16.0 * params.B1) / R**3)
    if convention == "scaled":
        alpha = params.M * (params.A + 4.0 * params.A1)
        beta = params.M * (params.B + 16.0 * params.B1)
        return C * C / (R * R) - alpha / R - beta / R**3
    raise ValueError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")
