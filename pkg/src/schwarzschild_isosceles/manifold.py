"""Equilibria of the flow on the triple-collision manifold and their manifolds.

The collision manifold is the invariant set ``r = 0`` of the regularised
chart, cut out by ``w**2 + cos(theta)**6 v**2 / U(theta) = 2 cos(theta)**3``.
Its six equilibria sit at ``w = 0``, ``theta in {0, +-theta_w}`` and
``v = +-sqrt(2 W(theta))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .charts import RegState
from .flow import EventSpec, Trajectory, integrate, jacobian, make_field
from .model import HALF_PI, ModelParams, RegimeError, derive, potentials

#: default unstable-eigenvector offset for manifold shooting
DEFAULT_EPS = 1e-7
#: weight of the constraint-damping term used when shooting on the manifold
STABILIZE = 1.0

_NAMES = ("Q", "Qstar", "Eplus", "Eminus", "EplusStar", "EminusStar")


@dataclass(frozen=True)
class CMEquilibrium:
    """An equilibrium on the collision manifold.

    ``eigenvalues`` holds the spectrum on the tangent space of the energy
    level: the radial eigenvalue ``lambda_r`` and the pair tangent to the
    collision manifold (``delta_eigenvalues``).
    """

    name: str
    state: RegState
    eigenvalues: tuple
    lambda_r: float
    delta_eigenvalues: tuple
    classification: str
    dims: tuple
    closed_form: dict = field(default_factory=dict)
    basis_spectra: dict = field(default_factory=dict)
    vectors: np.ndarray | None = None

    @property
    def sign(self) -> int:
        return 1 if self.state.v > 0 else -1

    def to_dict(self) -> dict:
        def cl(vals):
            return [[complex(z).real, complex(z).imag] for z in vals]
        return {
            "name": self.name,
            "state": dict(self.state._asdict()),
            "lambda_r": self.lambda_r,
            "delta_eigenvalues": cl(self.delta_eigenvalues),
            "classification": self.classification,
            "dims": list(self.dims),
            "closed_form": {
                "lambda_r": self.closed_form["lambda_r"],
                "delta_eigenvalues": cl(self.closed_form["delta_eigenvalues"]),
                "printed_delta_eigenvalues": (cl(self.closed_form["printed_delta_eigenvalues"])
                                              if "printed_delta_eigenvalues" in self.closed_form else None),
            },
        }


def _sorted(vals) -> tuple:
    return tuple(sorted((complex(z) for z in vals), key=lambda z: (round(z.real, 12), z.imag)))


def equilibrium_states(params: ModelParams) -> dict[str, RegState]:
    d = derive(params)
    if d.theta_w is None:
        raise RegimeError("W has no interior critical point; E-equilibria do not exist")
    pot = potentials(params)
    v0 = math.sqrt(2.0 * pot.W(0.0))
    vw = math.sqrt(2.0 * pot.W(d.theta_w))
    tw = d.theta_w
    return {
        "Q": RegState(0.0, v0, 0.0, 0.0),
        "Qstar": RegState(0.0, -v0, 0.0, 0.0),
        "Eplus": RegState(0.0, vw, tw, 0.0),
        "Eminus": RegState(0.0, vw, -tw, 0.0),
        "EplusStar": RegState(0.0, -vw, tw, 0.0),
        "EminusStar": RegState(0.0, -vw, -tw, 0.0),
    }


def closed_form_spectrum(params: ModelParams, theta_c: float, sign: int) -> dict:
    """Radial eigenvalue and the pair from ``l**2 -+ sqrt(c**3/2) l - (W''/W) c**3 = 0``."""
    pot = potentials(params)
    c3 = math.cos(theta_c) ** 3
    b = sign * math.sqrt(c3 / 2.0)
    k = pot.d2W(theta_c) / pot.W(theta_c) * c3
    disc = complex(b * b + 4.0 * k)
    root = disc**0.5
    out = {
        "lambda_r": sign * math.sqrt(2.0 * c3),
        "delta_eigenvalues": _sorted(((b + root) / 2.0, (b - root) / 2.0)),
    }
    if theta_c == 0.0:
        p = params
        const = (25.0 * p.B + 16.0 * p.B1 * (1.0 - 24.0 * (p.mu - 1.0))) / (2.0 * (p.B + 16.0 * p.B1))
        root = complex(const) ** 0.5
        out["printed_discriminant"] = const
        out["printed_delta_eigenvalues"] = _sorted(
            ((sign * math.sqrt(2.0) / 2.0 + root) / 2.0, (sign * math.sqrt(2.0) / 2.0 - root) / 2.0))
    return out


def energy_gradient(params: ModelParams, C: float, state: RegState, step: float = 1e-20) -> np.ndarray:
    """Gradient of the regularised energy relation (complex step)."""
    f = make_field("regularized", params, C, 0.0, complex_step=True)
    y = np.asarray(state, dtype=float)
    g = np.empty(4)
    for j in range(4):
        yc = y.astype(complex)
        yc[j] += 1j * step
        g[j] = f.residual(0.0, yc).imag / step
    return g


def tangent_basis(params: ModelParams, C: float, state: RegState, method: str = "explicit") -> np.ndarray:
    """Columns spanning the tangent space of the energy level at an equilibrium.

    ``explicit`` uses the closed-form gradient ``(C**2 c**4, 2 v c**6, 0, 0)``
    and treats ``C = 0`` (the level contains the radial axis) separately;
    ``nullspace`` takes the numerical null space of the complex-step gradient.
    """
    if method == "nullspace":
        return null_space(energy_gradient(params, C, state)[None, :])
    if method != "explicit":
        raise ValueError(f"unknown basis method {method!r}")
    c = math.cos(state.theta)
    e = np.eye(4)
    if C == 0:
        return e[:, [0, 2, 3]]
    mixed = np.array([2.0 * state.v * c**6, -C * C * c**4, 0.0, 0.0])
    return np.column_stack([mixed / np.linalg.norm(mixed), e[:, 2], e[:, 3]])


def restricted_spectrum(params: ModelParams, C: float, state: RegState, method: str = "explicit") -> tuple:
    f = make_field("regularized", params, C, 0.0, complex_step=True)
    J = jacobian(f, list(state))
    B = tangent_basis(params, C, state, method)
    return _sorted(np.linalg.eigvals(np.linalg.pinv(B) @ J @ B))


def _classify(lam_r: float, pair: tuple, tol: float = 1e-10) -> tuple[str, tuple]:
    reals = [lam_r] + [z.real for z in pair]
    n_u = sum(x > tol for x in reals)
    n_s = sum(x < -tol for x in reals)
    is_spiral = all(abs(z.imag) > tol for z in pair)
    if n_u == 3:
        kind = "spiral_source" if is_spiral else "source"
    elif n_s == 3:
        kind = "spiral_sink" if is_spiral else "sink"
    else:
        kind = "saddle"
    return kind, (n_u, n_s)


def cm_equilibria(params: ModelParams, C: float = 0.0) -> list[CMEquilibrium]:
    """The six collision-manifold equilibria with numerical and closed-form spectra.

    The numerical spectrum is authoritative.  The pair tangent to the collision
    manifold is the spectrum of the ``(theta, w)`` block of the Jacobian, and
    ``lambda_r`` is ``dr'/dr``.
    """
    d = derive(params)
    if not (d.regime.mu_large and d.regime.cond_B and d.regime.generic):
        raise RegimeError(f"collision-manifold analysis needs the large-mu generic regime: {d.regime}")
    f = make_field("regularized", params, C, 0.0, complex_step=True)
    out = []
    for name, st in equilibrium_states(params).items():
        J = jacobian(f, list(st))
        block = J[2:, 2:]
        pair = _sorted(np.linalg.eigvals(block))
        lam_r = float(J[0, 0])
        kind, dims = _classify(lam_r, pair)
        sign = 1 if st.v > 0 else -1
        _, vecs = np.linalg.eig(block)
        out.append(CMEquilibrium(
            name=name, state=st,
            eigenvalues=_sorted((lam_r,) + pair),
            lambda_r=lam_r, delta_eigenvalues=pair, classification=kind, dims=dims,
            closed_form=closed_form_spectrum(params, st.theta, sign),
            basis_spectra={m: restricted_spectrum(params, C, st, m) for m in ("explicit", "nullspace")},
            vectors=vecs,
        ))
    return out


def find_equilibrium(eqs, name: str) -> CMEquilibrium:
    for e in eqs:
        if e.name == name:
            return e
    raise KeyError(name)


def delta_state(params: ModelParams, theta: float, w: float, sign: int) -> np.ndarray:
    """Point ``(v, theta, w)`` on the collision manifold with ``v`` of the given sign."""
    c = math.cos(theta)
    rad = (2.0 * c**3 - w * w) * potentials(params).U(theta) / c**6
    if rad < 0:
        raise ValueError("no collision-manifold point with this (theta, w)")
    return np.array([sign * math.sqrt(rad), theta, w])


@dataclass
class TraceResult:
    equilibrium: str
    branch: str
    eps: float
    outcome: str
    trajectory: Trajectory
    richardson_outcome: str | None = None

    @property
    def richardson_agrees(self) -> bool | None:
        if self.richardson_outcome is None:
            return None
        if self.equilibrium == "Q":
            # a fixed ray from a spiral source lands on a different turn at eps/10
            return _family(self.richardson_outcome) == _family(self.outcome)
        return self.richardson_outcome == self.outcome


def _family(outcome: str) -> str:
    return "B(0)" if outcome in ("B+(0)", "B-(0)") else outcome


def _start(params, eq: CMEquilibrium, branch: str, eps: float, ray_angle: float | None):
    vals, vecs = np.linalg.eig(make_jac_block(params, eq))
    if eq.classification == "saddle":
        k = int(np.argmax(vals.real))
        vec = np.real(vecs[:, k])
        vec = vec / np.linalg.norm(vec)
        want = 1.0 if branch == "w_pos" else -1.0
        if vec[1] * want < 0:
            vec = -vec
    elif eq.classification in ("spiral_source", "source"):
        k = int(np.argmax(vals.imag))
        psi = 0.0 if ray_angle is None else ray_angle
        z = vecs[:, k]
        vec = np.real(z) * math.cos(psi) - np.imag(z) * math.sin(psi)
        vec = vec / np.linalg.norm(vec)
    else:
        raise ValueError(f"{eq.name} has no unstable direction on the collision manifold")
    theta = eq.state.theta + eps * vec[0]
    w = eps * vec[1]
    return delta_state(params, theta, w, eq.sign)


def make_jac_block(params: ModelParams, eq: CMEquilibrium) -> np.ndarray:
    f = make_field("collision", params, complex_step=True)
    return jacobian(f, [eq.state.v, eq.state.theta, 0.0])[1:, 1:]


def _trace_once(params, eq, eqs, branch, eps, ray_angle, K, theta_band, near_tol, span, rtol, atol,
                stabilize):
    f = make_field("collision", params, stabilize=stabilize)
    y0 = _start(params, eq, branch, eps, ray_angle)
    targets = [e for e in eqs if e.name != eq.name and e.classification != "spiral_source"]

    def near(e):
        p = np.array([e.state.v, e.state.theta, 0.0])
        return EventSpec("custom", func=lambda t, y: float(np.linalg.norm(y - p)) - near_tol,
                         direction=-1, name=e.name)

    events = [EventSpec("v_below", -K, name="v_below_K")] + [near(e) for e in targets]
    traj = integrate(f, y0, (0.0, span), rtol=rtol, atol=atol, events=events)
    if traj.status != "event":
        return "undetermined", traj
    name = traj.events[-1].name
    v, th, _ = traj.final
    if name == "v_below_K":
        if th > HALF_PI - theta_band:
            return "B+(0)", traj
        if th < -HALF_PI + theta_band:
            return "B-(0)", traj
        return "undetermined", traj
    if name == "Qstar":
        return "Qstar", traj
    return f"connection:{name}", traj


def trace_manifold(params: ModelParams, eq: CMEquilibrium, branch: str = "w_pos", eps: float = DEFAULT_EPS,
                   *, C: float = 0.0, ray_angle: float | None = None, K: float | None = None,
                   theta_band: float = 0.05, near_tol: float = 1e-4, span: float = 500.0,
                   rtol: float = 1e-12, atol: float = 1e-14, richardson: bool = True,
                   stabilize: float = STABILIZE) -> TraceResult:
    """Shoot the unstable manifold of ``eq`` inside the collision manifold.

    Outcomes: ``B+(0)``/``B-(0)`` when ``v < -K`` with ``|theta|`` within
    ``theta_band`` of ``pi/2``; ``Qstar`` on entering a ``near_tol`` ball
    around the sink; ``connection:<name>`` near another saddle; else
    ``undetermined``.  With ``richardson=True`` the shot is repeated at
    ``eps/10`` and the second outcome is stored for comparison.  Shots use
    the constraint-stabilised collision field (see ``make_field``).
    """
    if branch not in ("w_pos", "w_neg"):
        raise ValueError("branch must be 'w_pos' or 'w_neg'")
    if not 1e-10 < eps < 1e-4:
        raise ValueError(f"eps must lie in (1e-10, 1e-4), got {eps!r}")
    if K is None:
        K = 5.0 * math.sqrt(2.0 * potentials(params).W(0.0))
    eqs = cm_equilibria(params, C)
    args = (ray_angle, K, theta_band, near_tol, span, rtol, atol, stabilize)
    outcome, traj = _trace_once(params, eq, eqs, branch, eps, *args)
    rich = None
    if richardson:
        rich, _ = _trace_once(params, eq, eqs, branch, eps / 10.0, *args)
    return TraceResult(eq.name, branch, eps, outcome, traj, rich)


@dataclass(frozen=True)
class ConnectionReport:
    theta_w: float
    lhs: float
    rhs: float
    cond_up_holds: bool
    param_argument: float
    param_lhs: float
    param_rhs: float
    cond_param_holds: bool

    @property
    def agree(self) -> bool:
        return self.cond_up_holds == self.cond_param_holds

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["agree"] = self.agree
        return out


def connection_condition(params: ModelParams) -> ConnectionReport:
    """Slope test ``sqrt(W(0)/2) <= sqrt(2 W(theta_w))/theta_w`` and its mu-gamma form.

    The parametric form compares ``cos**2`` of ``x = sqrt(4 W(theta_w)/W(0))``
    with ``cos**2(theta_w)``.  That comparison is only monotone while
    ``x <= pi/2``; for larger ``x`` the slope test holds trivially because
    ``theta_w < pi/2``.
    """
    d = derive(params)
    if d.theta_w is None:
        raise RegimeError("theta_w does not exist for these parameters")
    pot = potentials(params)
    tw = d.theta_w
    lhs = math.sqrt(pot.W(0.0) / 2.0)
    rhs = math.sqrt(2.0 * pot.W(tw)) / tw
    mu, g = params.mu, params.gamma
    bump = 1.0 + g**0.4 / (mu - 1.0) ** 0.6
    x = math.sqrt(4.0 / (1.0 + g)) * (1.0 - 1.0 / mu) ** 0.75 * bump**1.25
    p_lhs = math.cos(x) ** 2
    p_rhs = 1.0 / ((1.0 - 1.0 / mu) * bump)
    return ConnectionReport(
        theta_w=tw, lhs=lhs, rhs=rhs, cond_up_holds=lhs <= rhs,
        param_argument=x, param_lhs=p_lhs, param_rhs=p_rhs,
        cond_param_holds=x >= HALF_PI or p_lhs <= p_rhs,
    )


def gradient_like_audit(traj: Trajectory, tol: float = 1e-9) -> dict:
    """Check that ``v`` never increases along the samples of ``traj``."""
    v = traj.column("v")
    inc = np.diff(v)
    worst = float(max(0.0, inc.max())) if inc.size else 0.0
    return {"monotone": worst <= tol, "max_violation": worst}


@dataclass
class ProfileCurve:
    theta: np.ndarray
    v: np.ndarray
    status: str

    def __call__(self, theta):
        order = np.argsort(self.theta)
        return np.interp(theta, self.theta[order], self.v[order])


def profile_solution(params: ModelParams, theta0: float, v0: float, theta_end: float,
                     rtol: float = 1e-12, atol: float = 1e-14) -> ProfileCurve:
    """Integrate ``dv/dtheta = -sqrt(W(theta) - v**2/2)/sqrt(2)`` from ``(theta0, v0)``.

    Stops at ``theta_end`` (status ``end``) or where the curve meets the
    boundary ``|v| = sqrt(2 W(theta))`` (status ``boundary``).
    """
    pot = potentials(params)
    if not (abs(theta0) < HALF_PI and abs(theta_end) < HALF_PI):
        raise ValueError("profile curves live in |theta| < pi/2")
    if not abs(v0) < math.sqrt(2.0 * pot.W(theta0)):
        raise ValueError("need |v0| < sqrt(2 W(theta0))")
    f = make_field("profile", params)
    ev = EventSpec("custom", func=lambda t, y: pot.W(t) - 0.5 * y[0] * y[0], direction=-1,
                   name="boundary")
    traj = integrate(f, [v0], (theta0, theta_end), rtol=rtol, atol=atol, events=[ev])
    status = "boundary" if traj.status == "event" else ("end" if traj.status == "span_end" else traj.status)
    return ProfileCurve(traj.t, traj.y[:, 0], status)


def profile_curve(params: ModelParams, v_at_zero: float, theta_margin: float = 1e-6) -> ProfileCurve:
    """Solution of the profile equation through ``(0, v_at_zero)`` followed towards ``pi/2``."""
    return profile_solution(params, 0.0, v_at_zero, HALF_PI - theta_margin)


def profile_second_derivative(params: ModelParams, theta: float, v: float) -> float:
    """``d2v/dtheta2`` along profile solutions at the point ``(theta, v)``."""
    pot = potentials(params)
    rad = math.sqrt(pot.W(theta) - 0.5 * v * v)
    return -(pot.dW(theta) + v / math.sqrt(2.0) * rad) / (2.0 * math.sqrt(2.0) * rad)


def manifold_summary(params: ModelParams, C: float = 0.0) -> dict:
    eqs = cm_equilibria(params, C)
    return {
        "C": C,
        "equilibria": [e.to_dict() for e in eqs],
        "connection": connection_condition(params).to_dict(),
    }
