"""Planar motion, homographic admissibility and orbit-fate classification."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .charts import (
    CylState, McGeheeState, RegState, cyl_to_mcgehee, cyl_to_reg, mcgehee_to_reg,
    reg_to_cyl, relative_energy_residual,
)
from .flow import integrate, make_field
from .manifold import equilibrium_states
from .model import HALF_PI, ModelParams, RegimeError, critical_angle_v, derive, potentials

FATES = (
    "triple_collision_Qstar", "triple_collision_Estar", "triple_collision_Bpm0",
    "double_collision", "escape", "bounded", "undetermined",
)


# ---------------------------------------------------------------- planar motion

@dataclass(frozen=True)
class PlanarCurve:
    """Samples of ``v(r)`` on one energy level; ``v`` is NaN where the radicand is negative."""

    C: float
    h: float
    r: np.ndarray
    v: np.ndarray


def planar_radicand(params: ModelParams, C: float, h: float, r):
    pot = potentials(params)
    return 2.0 * h * r**3 + 2.0 * pot.V(0.0) * r**2 - C * C * r + 2.0 * pot.W(0.0)


def planar_curve(params: ModelParams, C: float, h: float, r_range=(1e-3, 5.0), n: int = 400) -> PlanarCurve:
    """Upper branch ``v = +sqrt(radicand)`` of the planar phase curve; the lower one is ``-v``."""
    lo, hi = float(r_range[0]), float(r_range[1])
    if not 0 < lo < hi:
        raise ValueError(f"r_range must satisfy 0 < lo < hi, got {r_range!r}")
    r = np.linspace(lo, hi, n)
    rad = planar_radicand(params, C, h, r)
    v = np.full_like(r, np.nan)
    ok = rad >= 0
    v[ok] = np.sqrt(rad[ok])
    return PlanarCurve(C, h, r, v)


@dataclass(frozen=True)
class PlanarPoint:
    r: float
    type: str
    eigenvalues: tuple


@dataclass(frozen=True)
class PlanarRegime:
    case: str
    equilibria: tuple

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "equilibria": [{"r": p.r, "type": p.type,
                            "eigenvalues": [[complex(z).real, complex(z).imag] for z in p.eigenvalues]}
                           for p in self.equilibria],
        }


def planar_jacobian(params: ModelParams, C: float, r: float, v: float = 0.0) -> np.ndarray:
    V0 = potentials(params).V(0.0)
    return np.array([[v, r], [C * C - 2.0 * r * V0, 3.0 * v]])


def planar_equilibria(params: ModelParams, C: float, h: float | None = None,
                      degenerate_rtol: float = 1e-12) -> PlanarRegime:
    """Equilibria of the planar system with ``r > 0`` and the case label.

    Case letters: ``A`` for ``C < C0``, ``B`` for ``C = C0``, ``C`` for
    ``C > C0``; with ``h`` given, ``_a`` marks ``h < 0`` and ``_b`` marks
    ``h >= 0`` (the ``C = C0`` case has no split and is ``B_case``).
    """
    if not (math.isfinite(C) and C >= 0):
        raise ValueError(f"C must be finite and >= 0, got {C!r}")
    d = derive(params)
    V0 = d.V0
    disc = C**4 - d.C0**4
    pts = []
    if abs(disc) <= degenerate_rtol * d.C0**4:
        letter = "B"
        r0 = C * C / (2.0 * V0)
        pts.append(PlanarPoint(r0, "degenerate", _eig(planar_jacobian(params, C, r0))))
    elif disc < 0:
        letter = "A"
    else:
        letter = "C"
        root = math.sqrt(disc)
        r2 = (C * C + root) / (2.0 * V0)
        r1 = 3.0 * d.W0 / (V0 * r2)
        for r in (r1, r2):
            eig = _eig(planar_jacobian(params, C, r))
            kind = "saddle" if any(abs(z.real) > 1e-12 * max(abs(z) for z in eig) for z in eig) else "center"
            pts.append(PlanarPoint(r, kind, eig))
    if letter == "B":
        case = "B_case"
    elif h is None:
        case = letter
    else:
        case = f"{letter}_{'a' if h < 0 else 'b'}"
    return PlanarRegime(case, tuple(pts))


def _eig(J) -> tuple:
    return tuple(sorted((complex(z) for z in np.linalg.eigvals(J)), key=lambda z: (z.real, z.imag)))


# ------------------------------------------------------------ homographic orbits

@dataclass(frozen=True)
class HomographicReport:
    admissible: bool
    case: str
    witness: dict


def homographic_admissible(params: ModelParams, C: float, theta0: float, tol: float = 1e-9) -> HomographicReport:
    """Can a homographic solution keep the shape angle fixed at ``theta0``?

    Only the planar angle ``theta0 = 0`` is admissible.  At ``+-theta_v`` with
    ``C != 0`` the witness is the forced value of ``r0**2`` (negative); at
    ``+-theta_v`` with ``C = 0`` it is ``W'(theta_v)`` (nonzero off the
    degenerate parameter set); elsewhere it reports the two mismatched
    coefficient ratios together with the ``r0**2`` obtained by eliminating
    ``C**2``.
    """
    if not abs(theta0) < HALF_PI:
        raise ValueError(f"|theta0| must be < pi/2, got {theta0!r}")
    if abs(theta0) <= tol:
        return HomographicReport(True, "planar", {"theta0": theta0})
    pot = potentials(params)
    V, W, dV, dW = pot.V(theta0), pot.W(theta0), pot.dV(theta0), pot.dW(theta0)
    t = math.tan(theta0)
    # r0**2 after eliminating C**2 between the two stationarity conditions
    r0_sq = (dW / t - 3.0 * W) / (V - dV / t)
    try:
        tv = critical_angle_v(params)
    except RegimeError:
        tv = None
    if tv is not None and abs(abs(theta0) - tv) <= tol:
        if C == 0:
            return HomographicReport(False, "theta_v_C0", {"dW_at_theta_v": dW, "theta_v": tv})
        c, s = math.cos(theta0), math.sin(theta0)
        cc_bah = W / V * (c / s) * (dW / W - 3.0 * s / c)
        return HomographicReport(False, "theta_v_Cnonzero", {"r0_squared": cc_bah, "theta_v": tv})
    return HomographicReport(False, "generic_theta", {
        "dV_over_V_minus_tan": dV / V - t,
        "dW_over_3W_minus_tan": dW / (3.0 * W) - t,
        "r0_squared": r0_sq,
    })


# ------------------------------------------------------------------ global sink

SINK_FORMS = ("printed", "linear")


def sink_predicate(params: ModelParams, C: float, state, form: str = "printed") -> bool:
    """Sufficient condition for monotone infall, evaluated on ``(r, v, ...)``.

    ``"printed"`` tests ``2 r**2 V(0) < C**2/2`` and ``v < 0``.  Substituting
    the energy relation into ``v'`` gives a bracket ``2 r V cos(theta)**2 - C**2/2``
    that is linear in ``r``, so the condition that actually forces
    ``v' < 0`` is ``"linear"``: ``2 r V(0) < C**2/2`` and ``v < 0``.  For
    ``r < 1`` the printed form is weaker and admits states where ``v``
    initially increases.
    """
    r, v = float(state[0]), float(state[1])
    return r < sink_radius(params, C, form) and v < 0


def sink_radius(params: ModelParams, C: float, form: str = "printed") -> float:
    """Supremum of the radii admitted by :func:`sink_predicate`."""
    V0 = potentials(params).V(0.0)
    if form == "printed":
        return abs(C) / (2.0 * math.sqrt(V0))
    if form == "linear":
        return C * C / (4.0 * V0)
    raise ValueError(f"unknown form {form!r}; expected one of {SINK_FORMS}")


def sink_rate(params: ModelParams, C: float, h: float, state: RegState) -> float:
    """``dv/dsigma`` of the regularised field with ``v**2`` eliminated by the energy relation."""
    pot = potentials(params)
    r, _, theta, w = state
    c = math.cos(theta)
    sU = math.sqrt(pot.U(theta))
    return (-sU * w * w / (2.0 * c**3) + 3.0 * h * c**3 * r**3 / sU
            + r * c * (2.0 * r * pot.Vcos(theta) * c - 0.5 * C * C) / sU)


def reg_state_from_energy(params: ModelParams, C: float, h: float, r: float, v: float,
                          theta: float, w_sign: int = 1) -> RegState | None:
    """Solve the regularised energy relation for ``w``; ``None`` if impossible."""
    pot = potentials(params)
    c = math.cos(theta)
    U = pot.U(theta)
    rhs = (2.0 * h * r**3 * c**6 - (v * v * c**3 - 2.0 * U) * c**3
           - (C * C - 2.0 * r * pot.Vcos(theta) * c) * r * c**4)
    if rhs < 0:
        return None
    return RegState(r, v, theta, math.copysign(math.sqrt(rhs / U), w_sign))


def sample_sink_states(params: ModelParams, n: int, seed: int = 0, *, C_range=(0.5, 3.0),
                       h_range=(-3.0, -0.1), v_range=(-3.0, -0.01), theta_max: float = 1.3,
                       fast: bool = False, form: str = "printed") -> list[tuple[float, float, RegState]]:
    """Random ``(C, h, state)`` triples satisfying the sink predicate at ``h < 0``.

    ``r`` is uniform below the sink radius of ``form``; with ``fast=True``
    the initial ``v`` is additionally below ``-sqrt(2 W(0))``.
    """
    rng = np.random.default_rng(seed)
    vmin = -math.sqrt(2.0 * potentials(params).W(0.0))
    out = []
    while len(out) < n:
        C = rng.uniform(*C_range)
        h = rng.uniform(*h_range)
        r = rng.uniform(0.02, 0.98) * sink_radius(params, C, form)
        hi = min(v_range[1], vmin - 1e-3) if fast else v_range[1]
        v = rng.uniform(v_range[0], hi)
        th = rng.uniform(-theta_max, theta_max)
        st = reg_state_from_energy(params, C, h, r, v, th, 1 if rng.random() < 0.5 else -1)
        if st is not None and sink_predicate(params, C, st, form):
            out.append((C, h, st))
    return out


# ------------------------------------------------------------ fate classification

@dataclass(frozen=True)
class FateThresholds:
    """Detection thresholds; all configurable."""

    r_triple: float = 1e-6
    v_triple_frac: float = 0.9
    theta_double: float = 1e-4
    w_double: float = 1e-6
    r_double_min: float = 1e-4
    escape_factor: float = 1e3
    switch_r_frac: float = 0.05
    switch_theta: float = 0.1
    K_factor: float = 5.0
    theta_band: float = 0.05
    near_tol: float = 1e-3
    estar_r_drop: float = 1e-3
    winding_mark: float = 1e-5
    consistency_rtol: float = 1e-8


@dataclass
class FateReport:
    fate: str
    side: str | None
    limiting_theta: float | None
    winding: float
    plane_crossings: int
    r_terminal: float
    diagnostics: dict = field(default_factory=dict)

    def to_row(self) -> dict:
        dg = self.diagnostics
        return {
            "fate": self.fate, "side": self.side or "",
            "limiting_theta": "" if self.limiting_theta is None else "%.17g" % self.limiting_theta,
            "winding": "%.17g" % self.winding, "plane_crossings": self.plane_crossings,
            "r_terminal": "%.17g" % self.r_terminal,
            "status": dg.get("status", ""), "steps": dg.get("steps", 0),
            "max_rel_residual": "%.17g" % dg.get("max_rel_residual", 0.0),
            "crossings_in_terminal_window": dg.get("crossings_in_terminal_window", 0),
            "r_gap": dg.get("r_gap", False),
        }


class _Tracker:
    """Per-step bookkeeping shared by both chart phases."""

    def __init__(self, max_history: int = 200_000):
        self.crossings: list[tuple[float, float]] = []
        self.prev_theta: float | None = None
        self.prev_r: float | None = None
        self.prev_v: float | None = None
        self.r_rise = 0.0
        self.v_rise = 0.0
        self.v_sign_changes = 0
        self.r_max = 0.0
        self.r_min = math.inf
        self.hist: list[tuple[float, float, float]] = []
        self.max_history = max_history
        self.winding_mark: float | None = None
        self.r_mark: float | None = None
        self.last_time = 0.0

    def update(self, t, r, theta, v, phi, mark):
        if self.prev_theta is not None and self.prev_theta * theta < 0:
            self.crossings.append((t, r))
        if self.prev_r is not None:
            if self.prev_r > 0:
                self.r_rise = max(self.r_rise, (r - self.prev_r) / self.prev_r)
            self.v_rise = max(self.v_rise, v - self.prev_v)
            if self.prev_v * v < 0:
                self.v_sign_changes += 1
        if self.winding_mark is None and r < mark:
            self.winding_mark, self.r_mark = phi, r
        self.prev_theta, self.prev_r, self.prev_v = theta, r, v
        self.r_max = max(self.r_max, r)
        self.r_min = min(self.r_min, r)
        self.hist.append((t, r, theta))
        if len(self.hist) > self.max_history:
            self.hist = self.hist[::2]


def _as_reg_or_cyl(params, state):
    if isinstance(state, CylState):
        return "cyl", state
    if isinstance(state, McGeheeState):
        return "reg", mcgehee_to_reg(params, state)
    return "reg", RegState(*[float(x) for x in state])


def classify_fate(params: ModelParams, C: float, h: float, state0, budget: int = 10**7,
                  span: float = 1e6, thresholds: FateThresholds = FateThresholds(),
                  rtol: float = 1e-10, atol: float = 1e-12) -> FateReport:
    """Follow an orbit until it collides, escapes, or the budget runs out.

    ``state0`` is a :class:`CylState`, :class:`McGeheeState` or
    :class:`RegState` (plain 4-tuples are read as the latter).  Away from
    collisions the reduced chart is used; the run switches to the
    regularised chart once ``r < switch_r_frac * r_init`` or ``|theta|``
    comes within ``switch_theta`` of ``pi/2``.  ``budget`` counts accepted
    steps; ``span`` caps the independent variable of each chart phase.
    """
    th = thresholds
    kind, st = _as_reg_or_cyl(params, state0)
    chart = "cyl" if kind == "cyl" else "reg"
    rel = relative_energy_residual(chart, params, C, h, st)
    if not rel <= th.consistency_rtol:
        raise ValueError(f"state is inconsistent with (h, C): relative energy residual {rel:.3g}")
    pot = potentials(params)
    vq = math.sqrt(2.0 * pot.W(0.0))
    K = th.K_factor * vq
    eq = equilibrium_states(params) if derive(params).theta_w is not None else {
        "Qstar": RegState(0.0, -vq, 0.0, 0.0)}
    qstar = np.array([-vq, 0.0, 0.0])
    estars = {n: np.array([s.v, s.theta, 0.0]) for n, s in eq.items() if n in ("EplusStar", "EminusStar")}

    if kind == "cyl":
        r_init = cyl_to_mcgehee(params, st).r
        start_reduced = True
    else:
        r_init = st.r
        start_reduced = st.r > 0 and abs(st.theta) < HALF_PI - th.switch_theta
    if not r_init > 0:
        raise ValueError("classification needs r > 0 initially")
    r_escape = th.escape_factor * r_init

    tracker = _Tracker()
    verdict: dict = {}
    steps_used = 0
    max_rel = rel
    statuses = []
    phi = 0.0

    # reduced phase
    if start_reduced:
        y = list(reg_to_cyl(params, st)) if kind == "reg" else list(st)
        f = make_field("reduced", params, C, h, winding=True)

        def stop_reduced(t, yy):
            r, theta, v = f.obs(t, yy)
            tracker.update(t, r, theta, v, yy[4], th.winding_mark)
            if h >= 0 and r > r_escape and v > 0:
                verdict["fate"] = "escape"
                return "escape"
            if r < th.switch_r_frac * r_init or abs(theta) > HALF_PI - th.switch_theta:
                return "switch"
            return None

        r0, th0, v0 = f.obs(0.0, y)
        tracker.update(0.0, r0, th0, v0, 0.0, th.winding_mark)
        traj = integrate(f, y + [0.0], (0.0, span), rtol=rtol, atol=atol, max_steps=budget,
                         stop=stop_reduced, record=False)
        steps_used += traj.steps
        statuses.append(traj.status)
        yend = traj.final
        phi = float(yend[4])
        max_rel = max(max_rel, relative_energy_residual("cyl", params, C, h, yend[:4]))
        if verdict.get("fate") == "escape":
            return _report(params, C, h, "escape", None, tracker, phi, tracker.prev_r, statuses,
                           steps_used, max_rel, {})
        if traj.message != "switch":
            return _budget_report(params, C, h, tracker, phi, statuses, steps_used, max_rel, r_escape)
        st = cyl_to_reg(params, CylState(*yend[:4]))
        t_offset = float(traj.t[-1])
    else:
        t_offset = 0.0
        tracker.update(0.0, st.r, st.theta, st.v, 0.0, th.winding_mark)

    # regularised phase
    f = make_field("regularized", params, C, h, winding=True)
    phase = {"triple": False, "r_at_triple": None}

    def stop_reg(t, yy):
        r, v, theta, w = yy[0], yy[1], yy[2], yy[3]
        tracker.update(t_offset + t, r, theta, v, yy[4], th.winding_mark)
        if h >= 0 and r > r_escape and v > 0:
            verdict["fate"] = "escape"
            return "escape"
        pinned = abs(theta) > HALF_PI - th.theta_double and abs(w) < th.w_double
        if not phase["triple"]:
            if pinned and r >= th.r_triple:
                verdict["fate"] = "double_collision"
                verdict["r_gap"] = r < th.r_double_min
                return "double"
            near_e = any(np.linalg.norm(np.array([v, theta, w]) - e) < 10.0 * th.near_tol
                         for e in estars.values())
            if r < th.r_triple and (v < -th.v_triple_frac * vq or near_e):
                phase["triple"] = True
                phase["r_at_triple"] = r
            return None
        p = np.array([v, theta, w])
        if np.linalg.norm(p - qstar) < th.near_tol:
            verdict["fate"] = "triple_collision_Qstar"
            return "Qstar"
        if abs(theta) > HALF_PI - th.theta_band and v < -K:
            verdict["fate"] = "triple_collision_Bpm0"
            return "B0"
        if r < th.estar_r_drop * phase["r_at_triple"]:
            for name, e in estars.items():
                if np.linalg.norm(p - e) < th.near_tol:
                    verdict["fate"] = "triple_collision_Estar"
                    return name
        return None

    y0 = list(st) + [phi]
    traj = integrate(f, y0, (0.0, span), rtol=rtol, atol=atol, max_steps=max(budget - steps_used, 1),
                     stop=stop_reg, record=False)
    steps_used += traj.steps
    statuses.append(traj.status)
    yend = traj.final
    phi = float(yend[4])
    max_rel = max(max_rel, relative_energy_residual("reg", params, C, h, yend[:4]))
    fate = verdict.get("fate")
    extra = {"r_gap": bool(verdict.get("r_gap", False)), "r_at_triple_detection": phase["r_at_triple"]}
    if fate is None:
        if phase["triple"]:
            return _report(params, C, h, "undetermined", None, tracker, phi, float(yend[0]), statuses,
                           steps_used, max_rel, extra)
        return _budget_report(params, C, h, tracker, phi, statuses, steps_used, max_rel, r_escape)
    theta_end = float(yend[2])
    side = None
    if fate in ("double_collision", "triple_collision_Bpm0", "triple_collision_Estar"):
        side = "+" if theta_end > 0 else "-"
    return _report(params, C, h, fate, side, tracker, phi, float(yend[0]), statuses, steps_used,
                   max_rel, extra, theta_end=theta_end)


def _terminal_window(tracker: _Tracker, fate: str):
    """Samples of the last decade of r (triple fates) or of the pinned approach (double)."""
    hist = tracker.hist
    if not hist:
        return []
    r_end = hist[-1][1]
    if fate.startswith("triple"):
        k = len(hist) - 1
        while k > 0 and hist[k - 1][1] <= 10.0 * r_end:
            k -= 1
        return hist[k:]
    k = len(hist) - 1
    while k > 0 and abs(hist[k - 1][2]) > HALF_PI - 0.1:
        k -= 1
    return hist[k:]


def _report(params, C, h, fate, side, tracker, phi, r_end, statuses, steps, max_rel, extra, theta_end=None):
    window = _terminal_window(tracker, fate)
    limiting = None
    if fate.startswith("triple") and len(window) >= 2:
        t = np.array([s[0] for s in window])
        th_ = np.array([s[2] for s in window])
        span = t[-1] - t[0]
        limiting = float(np.trapezoid(th_, t) / span) if span > 0 else float(th_[-1])
    elif fate == "double_collision" and theta_end is not None:
        limiting = theta_end
    t_start = window[0][0] if window else math.inf
    in_window = sum(1 for t, _ in tracker.crossings if t >= t_start)
    diag = {
        "status": "+".join(statuses), "steps": steps, "max_rel_residual": max_rel,
        "r_max_relative_increase": tracker.r_rise, "v_max_increase": tracker.v_rise,
        "crossings_in_terminal_window": in_window,
        "crossing_in_last_decade": in_window > 0,
        "winding_at_mark": tracker.winding_mark,
        "r_at_mark": tracker.r_mark,
        "r_min": tracker.r_min, "r_max": tracker.r_max,
    }
    diag.update(extra)
    return FateReport(fate, side, limiting, phi, len(tracker.crossings), r_end, diag)


def _budget_report(params, C, h, tracker, phi, statuses, steps, max_rel, r_escape):
    recurrent = tracker.v_sign_changes >= 2
    fate = "bounded" if (h < 0 and tracker.r_max < r_escape and recurrent) else "undetermined"
    return _report(params, C, h, fate, None, tracker, phi, tracker.prev_r, statuses, steps, max_rel, {})


# ----------------------------------------------------------------------- batches

def _job(args):
    params_dict, C, h, state, kwargs = args
    params = ModelParams.from_dict(params_dict)
    return classify_fate(params, C, h, _state_from_json(state), **kwargs)


def _state_from_json(state):
    if isinstance(state, dict):
        keys = set(state)
        for cls in (CylState, McGeheeState, RegState):
            if keys == set(cls._fields):
                return cls(**{k: float(v) for k, v in state.items()})
        raise ValueError(f"unrecognised state keys {sorted(keys)}")
    return RegState(*[float(x) for x in state])


def classify_batch(params: ModelParams, jobs, n_workers: int = 1, **kwargs) -> list[FateReport]:
    """Classify ``jobs`` (iterables of ``(C, h, state)``); output order matches input order."""
    args = [(params.to_dict(), float(C), float(h),
             state if isinstance(state, dict) else (dict(state._asdict()) if hasattr(state, "_asdict")
                                                     else list(state)), kwargs)
            for C, h, state in jobs]
    if n_workers <= 1:
        return [_job(a) for a in args]
    with ProcessPoolExecutor(max_workers=n_workers) as ex:
        return list(ex.map(_job, args))


def load_batch(path) -> list[tuple[float, float, object]]:
    """Read a JSON array of ``{"C": ..., "h": ..., "state0": ...}`` objects."""
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list):
        raise ValueError("batch file must hold a JSON array")
    out = []
    for i, item in enumerate(data):
        if not isinstance(item, dict) or set(item) != {"C", "h", "state0"}:
            raise ValueError(f"batch entry {i} must have exactly the keys C, h, state0")
        out.append((float(item["C"]), float(item["h"]), _state_from_json(item["state0"])))
    return out


def write_fates_csv(reports, path) -> None:
    rows = [r.to_row() for r in reports]
    cols = list(rows[0]) if rows else list(FateReport("", None, None, 0.0, 0, 0.0).to_row())
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["index"] + cols)
        w.writeheader()
        for i, row in enumerate(rows):
            w.writerow({"index": i, **row})


def winding_quadrature(params: ModelParams, C: float, h: float, r_start: float, r_end: float,
                       turning_tol: float = 1e-10) -> float:
    """Winding accumulated along a planar orbit between two radii.

    Integrates ``dphi/dr = C r**(-1/2) / |v(r)|`` by adaptive quadrature,
    independently of any time stepping.  Valid along a stretch where ``v``
    keeps its sign.  An endpoint where the radicand vanishes (a turning
    point) carries an inverse square-root singularity, which is handled by
    an algebraic quadrature weight.
    """
    from scipy.integrate import quad

    lo, hi = sorted((float(r_start), float(r_end)))
    scale = 2.0 * potentials(params).W(0.0)
    a_sing = abs(planar_radicand(params, C, h, lo)) <= turning_tol * scale
    b_sing = abs(planar_radicand(params, C, h, hi)) <= turning_tol * scale
    if lo == hi:
        return 0.0

    V0 = potentials(params).V(0.0)

    def slope(r, x):
        # (radicand(r) - radicand(x)) / (r - x), exact for the cubic
        return 2.0 * h * (r * r + r * x + x * x) + 2.0 * V0 * (r + x) - C * C

    def g(r):
        # with a turning point at an endpoint the vanishing factor is divided out exactly
        if a_sing and b_sing:
            rad = -(slope(r, lo) - slope(hi, lo)) / (r - hi) if r != hi else -2.0 * h * (hi + 2 * lo) - 2.0 * V0
            rad = abs(rad)
        elif a_sing:
            rad = abs(slope(r, lo))
        elif b_sing:
            rad = abs(slope(r, hi))
        else:
            rad = planar_radicand(params, C, h, r)
        return C / (math.sqrt(r) * math.sqrt(rad))

    if a_sing or b_sing:
        wvar = (-0.5 if a_sing else 0.0, -0.5 if b_sing else 0.0)
        val, _ = quad(g, lo, hi, weight="alg", wvar=wvar, limit=500, epsabs=1e-13, epsrel=1e-12)
    else:
        val, _ = quad(g, lo, hi, limit=500, epsabs=1e-13, epsrel=1e-12)
    return val
