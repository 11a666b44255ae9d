"""Vector fields for every chart and an adaptive integrator with events.

Charts and their independent variables:

=============  ====================  =====
chart          state                 time
=============  ====================  =====
reduced        (R, z, P_R, P_z)      t
mcgehee        (r, v, theta, u)      tau
regularized    (r, v, theta, w)      sigma
collision      (v, theta, w)         sigma
planar         (r, v)                tau
profile        (v,)                  theta
=============  ====================  =====

With ``winding=True`` the reduced, mcgehee, regularized and planar fields
carry an extra coordinate ``phi``, the rotation angle of the equal-mass pair.

The angular equation of the regularised and collision fields includes the
term ``-3 tan(theta) w**2`` that comes from differentiating ``cos**3/sqrt(U)``
when ``u`` is rescaled to ``w``.  It is written with ``w**2`` eliminated
through the energy relation so that the field stays analytic at
``theta = +-pi/2``.  Pass ``printed=True`` to drop it (the resulting field
does not preserve the collision manifold).
"""

from __future__ import annotations

import cmath
import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import DOP853
from scipy.optimize import brentq

from .charts import MCGEHEE_THETA_MARGIN
from .model import HALF_PI, ModelParams, Potentials, kinetic_weights, potentials

CHARTS = ("reduced", "mcgehee", "regularized", "collision", "planar", "profile")

_COORDS = {
    "reduced": ("R", "z", "P_R", "P_z"),
    "mcgehee": ("r", "v", "theta", "u"),
    "regularized": ("r", "v", "theta", "w"),
    "collision": ("v", "theta", "w"),
    "planar": ("r", "v"),
    "profile": ("v",),
}
_TIME = {
    "reduced": "t",
    "mcgehee": "tau",
    "regularized": "sigma",
    "collision": "sigma",
    "planar": "tau",
    "profile": "theta",
}

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
EVENT_XTOL = 1e-12


class DomainError(ValueError):
    """The state is outside the domain of the requested vector field."""


@dataclass(frozen=True)
class ChartField:
    """A vector field together with its energy residual and observables.

    ``rhs(t, y)`` returns the derivative; ``residual(t, y)`` the energy
    residual of the chart (zero for exact states); ``obs(t, y)`` returns the
    triple ``(r, theta, v)`` used by events.
    """

    chart: str
    params: ModelParams
    C: float
    h: float
    rhs: Callable
    residual: Callable
    obs: Callable
    coords: tuple
    time_name: str
    winding: bool = False
    printed: bool = False

    @property
    def dim(self) -> int:
        return len(self.coords)


def _sqrt_r(ops, r):
    # stage values may dip a rounding error below r = 0 near collision
    if ops is math:
        return math.sqrt(r) if r > 0 else 0.0
    return ops.sqrt(r)


def _reduced(params, C, h, ops, winding):
    p = params
    kR, kz = kinetic_weights(p)
    a, b = math.sqrt(p.M / 2.0), math.sqrt(2.0 * p.M * p.m / (2.0 * p.M + p.m))

    def grad(R, z):
        rho = R * R + 4.0 * z * z
        r3, r5 = rho**-1.5, rho**-2.5
        gR = (-2.0 * C * C / (p.M * R**3) + p.A / R**2 + 3.0 * p.B / R**4
              + 4.0 * p.A1 * R * r3 + 48.0 * p.B1 * R * r5)
        gz = 16.0 * p.A1 * z * r3 + 192.0 * p.B1 * z * r5
        return gR, gz

    def rhs(t, y):
        R, z, PR, Pz = y[0], y[1], y[2], y[3]
        gR, gz = grad(R, z)
        out = [kR * PR, kz * Pz, -gR, -gz]
        if winding:
            out.append(2.0 * C / (p.M * R * R))
        return np.array(out)

    def residual(t, y):
        R, z, PR, Pz = y[0], y[1], y[2], y[3]
        rho = R * R + 4.0 * z * z
        H = (0.5 * (kR * PR * PR + kz * Pz * Pz) + C * C / (p.M * R * R) - p.A / R
             - p.B / R**3 - 4.0 * p.A1 / rho**0.5 - 16.0 * p.B1 / rho**1.5)
        return H - h

    def obs(t, y):
        R, z, PR, Pz = y[0], y[1], y[2], y[3]
        r = math.hypot(a * R, b * z)
        return r, math.atan2(b * z, a * R), math.sqrt(r) * (R * PR + z * Pz)

    return rhs, residual, obs


def _mcgehee(params, C, h, ops, winding):
    pot = Potentials(params, ops) if ops is not math else potentials(params)
    C2 = C * C

    def rhs(t, y):
        r, v, th, u = y[0], y[1], y[2], y[3]
        c, s = ops.cos(th), ops.sin(th)
        out = [
            r * v,
            1.5 * v * v + u * u + C2 * r / (c * c) - r * r * pot.V(th) - 3.0 * pot.W(th),
            u,
            0.5 * u * v - C2 * s / c**3 * r + r * r * pot.dV(th) + pot.dW(th),
        ]
        if winding:
            out.append(C * _sqrt_r(ops, r) / (c * c))
        return np.array(out)

    def residual(t, y):
        r, v, th, u = y[0], y[1], y[2], y[3]
        c = ops.cos(th)
        return (0.5 * (u * u + v * v) + C2 * r / (2.0 * c * c)
                - r * r * pot.V(th) - pot.W(th) - h * r**3)

    def obs(t, y):
        return y[0], y[2], y[1]

    return rhs, residual, obs


def _regularized(params, C, h, ops, winding, printed):
    pot = Potentials(params, ops) if ops is not math else potentials(params)
    C2 = C * C

    def rhs(t, y):
        r, v, th, w = y[0], y[1], y[2], y[3]
        c, s = ops.cos(th), ops.sin(th)
        U = pot.U(th)
        sU = ops.sqrt(U)
        Vc = pot.Vcos(th)
        g = c**3 / sU
        dv = g * v * v / 2.0 - sU + r * r * (2.0 * h * r * c + Vc) * c * c / sU
        dw = (0.5 * v * w * g + r * r * pot.dVcos2(th) * c**4 / U
              + pot.dU(th) / U * (c**3 - 0.5 * w * w) + 3.0 * s * c * c
              - C2 * r * s * c**3 / U)
        if not printed:
            dw -= 3.0 * s * (2.0 * h * r**3 * c**5 - v * v * c**5 + 2.0 * U * c * c
                             - C2 * r * c**3 + 2.0 * r * r * Vc * c**4) / U
        out = [r * v * g, dv, w, dw]
        if winding:
            out.append(C * _sqrt_r(ops, r) * c / sU)
        return np.array(out)

    def residual(t, y):
        r, v, th, w = y[0], y[1], y[2], y[3]
        c = ops.cos(th)
        U = pot.U(th)
        return (U * w * w + (v * v * c**3 - 2.0 * U) * c**3
                + (C2 - 2.0 * r * pot.Vcos(th) * c) * r * c**4
                - 2.0 * h * r**3 * c**6)

    def obs(t, y):
        return y[0], y[2], y[1]

    return rhs, residual, obs


def _collision(params, ops, printed, stabilize):
    pot = Potentials(params, ops) if ops is not math else potentials(params)

    def rhs(t, y):
        v, th, w = y[0], y[1], y[2]
        c, s = ops.cos(th), ops.sin(th)
        U = pot.U(th)
        dU = pot.dU(th)
        sU = ops.sqrt(U)
        g = c**3 / sU
        dv = g * v * v / 2.0 - sU
        dth = w
        dw = 0.5 * v * w * g + dU / U * (c**3 - 0.5 * w * w) + 3.0 * s * c * c
        if not printed:
            dw -= 3.0 * s * (2.0 * U * c * c - v * v * c**5) / U
        if stabilize:
            # gradient descent on the constraint; zero on the manifold itself
            G = w * w + c**6 * v * v / U - 2.0 * c**3
            k = stabilize * G
            dv -= k * 2.0 * c**6 * v / U
            dth -= k * (v * v * (-6.0 * c**5 * s / U - c**6 * dU / (U * U)) + 6.0 * c * c * s)
            dw -= k * 2.0 * w
        return np.array([dv, dth, dw])

    def residual(t, y):
        v, th, w = y[0], y[1], y[2]
        c = ops.cos(th)
        return w * w + c**6 * v * v / pot.U(th) - 2.0 * c**3

    def obs(t, y):
        return 0.0, y[1], y[0]

    return rhs, residual, obs


def _planar(params, C, h, ops, winding):
    pot = potentials(params)
    V0, W0 = pot.V(0.0), pot.W(0.0)
    C2 = C * C

    def rhs(t, y):
        r, v = y[0], y[1]
        out = [r * v, 1.5 * v * v + C2 * r - r * r * V0 - 3.0 * W0]
        if winding:
            out.append(C * _sqrt_r(ops, r))
        return np.array(out)

    def residual(t, y):
        r, v = y[0], y[1]
        return 0.5 * v * v + 0.5 * C2 * r - r * r * V0 - W0 - h * r**3

    def obs(t, y):
        return y[0], 0.0, y[1]

    return rhs, residual, obs


def _profile(params, ops):
    pot = Potentials(params, ops) if ops is not math else potentials(params)

    def rhs(t, y):
        rad = pot.W(t) - 0.5 * y[0] * y[0]
        if ops is math:
            rad = max(rad, 0.0)
        return np.array([-ops.sqrt(rad) / math.sqrt(2.0)])

    def residual(t, y):
        return 0.0

    def obs(t, y):
        return 0.0, t, y[0]

    return rhs, residual, obs


def make_field(chart: str, params: ModelParams, C: float = 0.0, h: float = 0.0, *,
               winding: bool = False, complex_step: bool = False,
               printed: bool = False, stabilize: float = 0.0) -> ChartField:
    """Build the vector field of ``chart`` at angular momentum ``C`` and energy ``h``.

    ``complex_step=True`` evaluates every elementary function through
    :mod:`cmath`, which makes the field usable for complex-step
    differentiation.  ``stabilize > 0`` adds ``-stabilize * G * grad(G)`` to
    the collision field, where ``G`` is the collision-manifold constraint.
    The term vanishes on the manifold and damps round-off drift off it, which
    matters near ``Q`` where the manifold is transversally repelling.
    """
    if chart not in CHARTS:
        raise ValueError(f"unknown chart {chart!r}; expected one of {CHARTS}")
    if winding and chart in ("collision", "profile"):
        raise ValueError(f"winding is not defined on the {chart} chart")
    ops = cmath if complex_step else math
    if chart == "reduced":
        parts = _reduced(params, C, h, ops, winding)
    elif chart == "mcgehee":
        parts = _mcgehee(params, C, h, ops, winding)
    elif chart == "regularized":
        parts = _regularized(params, C, h, ops, winding, printed)
    elif chart == "collision":
        parts = _collision(params, ops, printed, stabilize)
    elif chart == "planar":
        parts = _planar(params, C, h, ops, winding)
    else:
        parts = _profile(params, ops)
    coords = _COORDS[chart] + (("phi",) if winding else ())
    return ChartField(chart, params, float(C), float(h), *parts, coords=coords,
                      time_name=_TIME[chart], winding=winding, printed=printed)


def check_domain(chart: str, params: ModelParams, state, *, delta_tol: float = 1e-8,
                 theta_margin: float = MCGEHEE_THETA_MARGIN) -> None:
    """Raise :class:`DomainError` if ``state`` is outside the chart's domain."""
    y = [float(x) for x in state]
    if not all(math.isfinite(x) for x in y):
        raise DomainError(f"non-finite state {state!r}")
    n = len(_COORDS[chart])
    if len(y) not in (n, n + 1):
        raise DomainError(f"{chart} state needs {n} coordinates, got {len(y)}")
    if chart == "reduced":
        if not y[0] > 0:
            raise DomainError(f"reduced chart needs R > 0, got {y[0]!r}")
    elif chart == "mcgehee":
        if y[0] < 0:
            raise DomainError(f"r must be >= 0, got {y[0]!r}")
        if not abs(y[2]) < HALF_PI - theta_margin:
            raise DomainError(f"McGehee chart invalid at theta={y[2]!r}; use the regularized chart")
    elif chart == "regularized":
        if y[0] < 0:
            raise DomainError(f"r must be >= 0, got {y[0]!r}")
        if abs(y[2]) > HALF_PI:
            raise DomainError(f"|theta| must be <= pi/2, got {y[2]!r}")
    elif chart == "collision":
        if abs(y[1]) > HALF_PI:
            raise DomainError(f"|theta| must be <= pi/2, got {y[1]!r}")
        res = make_field("collision", params).residual(0.0, y)
        if abs(res) > delta_tol:
            raise DomainError(f"state is off the collision manifold (residual {res:.3g})")
    elif chart == "planar":
        if y[0] < 0:
            raise DomainError(f"r must be >= 0, got {y[0]!r}")


def vector_field(chart: str, params: ModelParams, C: float, h: float, state, *,
                 printed: bool = False, delta_tol: float = 1e-8) -> np.ndarray:
    """Derivative of ``state`` under the chart's vector field.

    For ``profile`` the state is ``(theta, v)`` and the result is ``[dv/dtheta]``.
    """
    if chart == "profile":
        theta, v = (float(x) for x in state)
        if not abs(theta) < HALF_PI:
            raise DomainError(f"profile needs |theta| < pi/2, got {theta!r}")
        if not abs(v) < math.sqrt(2.0 * potentials(params).W(theta)):
            raise DomainError("profile needs |v| < sqrt(2 W(theta))")
        return make_field("profile", params).rhs(theta, [v])
    if chart not in CHARTS:
        raise ValueError(f"unknown chart {chart!r}; expected one of {CHARTS}")
    check_domain(chart, params, state, delta_tol=delta_tol)
    f = make_field(chart, params, C, h, printed=printed,
                   winding=len(state) == len(_COORDS[chart]) + 1)
    return f.rhs(0.0, np.asarray(state, dtype=float))


def jacobian(f: ChartField, y, t: float = 0.0, step: float = 1e-20) -> np.ndarray:
    """Complex-step Jacobian of a field built with ``complex_step=True``."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    J = np.empty((n, n))
    for j in range(n):
        yc = y.astype(complex)
        yc[j] += 1j * step
        J[:, j] = np.imag(f.rhs(t, yc)) / step
    return J


@dataclass(frozen=True)
class EventSpec:
    """A scalar event function; a root with the requested crossing direction fires.

    ``kind`` is one of ``r_below``, ``r_above``, ``v_below``,
    ``theta_near_pm_half`` (``pi/2 - |theta|`` falls below ``threshold``),
    ``plane_crossing`` (``theta`` changes sign) or ``custom`` (``func(t, y)``).
    ``direction`` applies to ``custom`` and ``plane_crossing``: +1 rising,
    -1 falling, 0 either.
    """

    kind: str
    threshold: float = 0.0
    direction: int = 0
    terminal: bool = True
    func: Callable | None = None
    name: str | None = None

    def __post_init__(self):
        kinds = ("r_below", "r_above", "v_below", "theta_near_pm_half", "plane_crossing", "custom")
        if self.kind not in kinds:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if not math.isfinite(self.threshold):
            raise ValueError("event threshold must be finite")
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom events need func")
        if self.direction not in (-1, 0, 1):
            raise ValueError("direction must be -1, 0 or 1")

    @property
    def label(self) -> str:
        return self.name or self.kind

    def compile(self, f: ChartField) -> tuple[Callable, int]:
        obs = f.obs
        thr = self.threshold
        if self.kind == "r_below":
            return (lambda t, y: obs(t, y)[0] - thr), -1
        if self.kind == "r_above":
            return (lambda t, y: obs(t, y)[0] - thr), 1
        if self.kind == "v_below":
            return (lambda t, y: obs(t, y)[2] - thr), -1
        if self.kind == "theta_near_pm_half":
            return (lambda t, y: HALF_PI - abs(obs(t, y)[1]) - thr), -1
        if self.kind == "plane_crossing":
            return (lambda t, y: obs(t, y)[1]), self.direction
        return self.func, self.direction


@dataclass
class Event:
    time: float
    kind: str
    name: str
    state: np.ndarray

    def to_dict(self) -> dict:
        return {"time": self.time, "kind": self.kind, "name": self.name,
                "state": [float(x) for x in self.state]}


@dataclass
class Trajectory:
    chart: str
    coords: tuple
    time_name: str
    t: np.ndarray
    y: np.ndarray
    events: list = field(default_factory=list)
    status: str = "span_end"
    steps: int = 0
    rejections: int = 0
    nfev: int = 0
    max_residual: float = 0.0
    message: str = ""

    @property
    def final(self) -> np.ndarray:
        return self.y[-1]

    def column(self, name: str) -> np.ndarray:
        return self.y[:, self.coords.index(name)]

    def to_csv(self, path, fmt: str = "%.17g") -> None:
        """Write the samples; the first line names the chart."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            fh.write(f"# chart: {self.chart}\n")
            w = csv.writer(fh)
            w.writerow((self.time_name,) + tuple(self.coords))
            for ti, yi in zip(self.t, self.y):
                w.writerow([fmt % ti] + [fmt % x for x in yi])

    def summary(self) -> dict:
        return {
            "chart": self.chart, "status": self.status, "message": self.message,
            "steps": self.steps, "rejections": self.rejections, "nfev": self.nfev,
            "max_residual": self.max_residual,
            "events": [e.to_dict() for e in self.events],
        }

    def write_events_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2) + "\n")


def _crossed(g0: float, g1: float, direction: int) -> bool:
    if g0 == 0.0 or not (g0 * g1 <= 0.0) or g0 == g1:
        return False
    rising = g1 > g0
    return direction == 0 or (direction > 0) == rising


def integrate(f: ChartField, y0, span: Sequence[float], *, rtol: float = DEFAULT_RTOL,
              atol: float = DEFAULT_ATOL, events: Sequence[EventSpec] = (),
              max_steps: int = 10**7, max_step: float = math.inf,
              first_step: float | None = None, stop: Callable | None = None,
              record: bool = True) -> Trajectory:
    """Integrate ``f`` from ``y0`` over ``span = (t0, t1)`` with DOP853.

    Stops at the first terminal event, at ``t1``, when ``max_steps`` accepted
    steps have been taken (status ``budget``), or when the step size
    underflows (status ``step_underflow``).  Every accepted step evaluates
    the chart's energy residual; the largest magnitude is kept.

    ``stop(t, y)`` is called after every accepted step; a truthy return ends
    the run with status ``stopped`` and the value as message.  With
    ``record=False`` only the first and last samples are kept.
    """
    t0, t1 = float(span[0]), float(span[1])
    if not (math.isfinite(t0) and math.isfinite(t1)) or t0 == t1:
        raise ValueError(f"invalid span {span!r}")
    if not (rtol > 0 and atol > 0):
        raise ValueError("tolerances must be > 0")
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (f.dim,):
        raise ValueError(f"{f.chart} needs a state of length {f.dim}, got {y0.shape}")
    if not np.all(np.isfinite(y0)):
        raise DomainError("initial state is not finite")

    compiled = [(ev, *ev.compile(f)) for ev in events]
    gvals = [g(t0, y0) for _, g, _ in compiled]
    ts, ys, log = [t0], [y0.copy()], []
    max_res = abs(f.residual(t0, y0))
    solver = DOP853(f.rhs, t0, y0, t1, rtol=rtol, atol=atol, max_step=max_step,
                    first_step=first_step)
    steps = rejections = 0
    status, message = "span_end", ""

    while True:
        if steps >= max_steps:
            status = "budget"
            break
        t_old = solver.t
        nfev_before = solver.nfev
        msg = solver.step()
        if solver.status == "failed":
            message = str(msg)
            status = "step_underflow" if "step size" in message else "failed"
            break
        steps += 1
        rejections += max(0, (solver.nfev - nfev_before) // solver.n_stages - 1)
        t_new, y_new = solver.t, solver.y.copy()
        if not np.all(np.isfinite(y_new)):
            status, message = "nonfinite", "state became non-finite"
            break

        hit = None
        dense = None
        for k, (ev, g, direction) in enumerate(compiled):
            g_new = g(t_new, y_new)
            if _crossed(gvals[k], g_new, direction):
                if dense is None:
                    dense = solver.dense_output()
                te = brentq(lambda s: g(s, dense(s)), t_old, t_new, xtol=EVENT_XTOL)
                if ev.terminal:
                    if hit is None or abs(te - t_old) < abs(hit[0] - t_old):
                        hit = (te, ev)
                else:
                    log.append((te, ev, dense(te)))
            gvals[k] = g_new

        if hit is not None:
            te, ev = hit
            ye = dense(te)
            log = [item for item in log if abs(item[0] - t_old) <= abs(te - t_old)]
            log.append((te, ev, ye))
            if te != ts[-1]:
                if record or len(ts) == 1:
                    ts.append(te)
                    ys.append(ye)
                else:
                    ts[-1], ys[-1] = te, ye
            max_res = max(max_res, abs(f.residual(te, ye)))
            status = "event"
            break

        if record or len(ts) == 1:
            ts.append(t_new)
            ys.append(y_new)
        else:
            ts[-1], ys[-1] = t_new, y_new
        max_res = max(max_res, abs(f.residual(t_new, y_new)))
        if stop is not None:
            why = stop(t_new, y_new)
            if why:
                status, message = "stopped", str(why)
                break
        if solver.status == "finished":
            break

    log.sort(key=lambda item: abs(item[0] - t0))
    return Trajectory(
        chart=f.chart, coords=f.coords, time_name=f.time_name,
        t=np.array(ts), y=np.array(ys),
        events=[Event(float(te), ev.kind, ev.label, np.asarray(ye)) for te, ev, ye in log],
        status=status, steps=steps, rejections=rejections, nfev=solver.nfev,
        max_residual=float(max_res), message=message,
    )
