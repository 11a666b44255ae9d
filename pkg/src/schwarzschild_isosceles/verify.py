"""Invariant checks run by ``schwarzschild-iso verify``.

Each check returns ``(name, passed, detail)``.  Checks that need the
large-mu regime are reported as failures if the parameters fall outside it.
"""

from __future__ import annotations

import math
import traceback

import numpy as np

from .charts import (
    CylState, cyl_to_mcgehee, cyl_to_reg, mcgehee_to_cyl, mcgehee_to_reg, reg_to_cyl,
    reg_to_mcgehee, relative_energy_residual,
)
from .equilibria import em_diagram, em_self_intersections, relative_equilibria
from .flow import integrate, make_field
from .manifold import (
    cm_equilibria, closed_form_spectrum, connection_condition, delta_state, find_equilibrium,
    gradient_like_audit, trace_manifold,
)
from .model import ModelParams, derive, eval_effective, potentials, reduced_hamiltonian
from .orbits import (
    classify_fate, homographic_admissible, planar_equilibria, planar_radicand,
    sample_sink_states, winding_quadrature,
)


def check_constants(params, rng, n):
    d = derive(params)
    worst = 0.0
    for _ in range(n):
        A, A1, B, B1 = rng.uniform(0.1, 5.0, 4)
        q = derive(ModelParams(params.M, params.m, A, A1, B, B1))
        worst = max(worst, abs((3 * q.alpha * q.beta) ** 0.25 - (12 * q.V0 * q.W0) ** 0.25))
    own = abs((3 * d.alpha * d.beta) ** 0.25 - (12 * d.V0 * d.W0) ** 0.25)
    return max(worst, own) < 1e-12, f"max |dual C0 difference| = {max(worst, own):.3g}"


def check_relative_equilibria(params, rng, n):
    C0 = derive(params).C0
    bad = 0
    for C in rng.uniform(1.01 * C0, 3.0 * C0, n):
        eqs = relative_equilibria(params, C)
        stable, unstable = eqs
        grads = [np.linalg.norm(eval_effective(params, C, e.R, 0.0).grad) for e in eqs]
        real = sum(abs(z.real) > 1e-8 * max(abs(w) for w in unstable.eigenvalues) for z in unstable.eigenvalues)
        if max(grads) >= 1e-9 or np.linalg.eigvalsh(stable.hessian).min() <= 0 or real != 2:
            bad += 1
    return bad == 0, f"{bad} of {n} angular momenta failed"


def check_em(params, n):
    pts = em_diagram(params, n=n)
    k = len(em_self_intersections(pts))
    return k == 0, f"{k} self-intersections over {n} points"


def check_charts(params, rng, n):
    worst_rt = worst_en = 0.0
    for _ in range(n):
        R = rng.uniform(0.2, 5.0)
        z = rng.uniform(-2.0, 2.0)
        P = rng.uniform(-2.0, 2.0, 2)
        cs = CylState(R, z, P[0], P[1])
        C = rng.uniform(0.0, 3.0)
        h = reduced_hamiltonian(params, C, R, z, P[0], P[1])
        m = cyl_to_mcgehee(params, cs)
        g = mcgehee_to_reg(params, m)
        back = mcgehee_to_cyl(params, reg_to_mcgehee(params, g))
        back2 = reg_to_cyl(params, cyl_to_reg(params, cs))
        for b in (back, back2):
            worst_rt = max(worst_rt, np.max(np.abs(np.subtract(b, cs)) / np.maximum(np.abs(cs), 1.0)))
        worst_en = max(worst_en, relative_energy_residual("mcgehee", params, C, h, m),
                       relative_energy_residual("reg", params, C, h, g))
    ok = worst_rt < 1e-10 and worst_en < 1e-8
    return ok, f"round trip {worst_rt:.3g}, energy {worst_en:.3g}"


def check_conservation(params, span):
    C0 = derive(params).C0
    C = 1.2 * C0
    R1 = relative_equilibria(params, C)[0].R
    y0 = [R1 * 1.01, 0.01, 0.01, 0.0]
    h = reduced_hamiltonian(params, C, *y0)
    traj = integrate(make_field("reduced", params, C, h), y0, (0.0, span), record=False)
    rel = traj.max_residual / abs(h)
    ok = traj.status == "span_end" and rel < 1e-8
    return ok, f"max |H - h|/|h| = {rel:.3g} over {span:g} ({traj.status})"


def check_cm_spectra(params):
    worst = 0.0
    for e in cm_equilibria(params):
        cf = closed_form_spectrum(params, e.state.theta, e.sign)
        target = sorted([cf["lambda_r"], *cf["delta_eigenvalues"]], key=lambda z: (z.real, z.imag))
        got = sorted(e.eigenvalues, key=lambda z: (z.real, z.imag))
        for a, b in zip(got, target):
            worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
    return worst < 1e-8, f"max relative deviation {worst:.3g}"


def check_gradient_like(params, rng, n):
    f = make_field("collision", params)
    pot = potentials(params)
    worst = 0.0
    for _ in range(n):
        th = rng.uniform(-1.4, 1.4)
        w_max = math.sqrt(2.0 * math.cos(th) ** 3)
        y0 = delta_state(params, th, rng.uniform(-0.99, 0.99) * w_max, rng.choice((-1, 1)))
        stop = lambda t, y: "left" if abs(y[1]) > math.pi / 2 - 1e-3 or y[0] < -50 * math.sqrt(pot.W(0.0)) else None
        traj = integrate(f, y0, (0.0, 30.0), stop=stop)
        worst = max(worst, gradient_like_audit(traj)["max_violation"])
    return worst < 1e-9, f"max increase of v = {worst:.3g}"


def check_connection(params):
    rep = connection_condition(params)
    eq = find_equilibrium(cm_equilibria(params), "Eminus")
    tr = trace_manifold(params, eq, "w_pos")
    ok = rep.cond_up_holds and rep.agree and tr.outcome == "B+(0)" and tr.richardson_agrees
    return ok, (f"lhs {rep.lhs:.5f} rhs {rep.rhs:.5f} agree={rep.agree}; "
                f"W_u(E-) w>0 -> {tr.outcome} (eps/10: {tr.richardson_outcome})")


def check_planar(params, rng, n):
    C0 = derive(params).C0
    counts = [len(planar_equilibria(params, C).equilibria) for C in (0.8 * C0, C0, 1.2 * C0)]
    kinds = [p.type for p in planar_equilibria(params, 1.2 * C0).equilibria]
    C = C0 - 0.5
    fates = []
    for h in rng.uniform(-3.0, -0.1, n):
        r = rng.uniform(0.05, 0.95) * _turning_point(params, C, h)
        v = math.sqrt(planar_radicand(params, C, h, r)) * rng.choice((-1, 1))
        fates.append(classify_fate(params, C, h, (r, v, 0.0, 0.0)).fate == "triple_collision_Qstar")
    for h in rng.uniform(0.0, 2.0, n):
        r = rng.uniform(0.05, 2.0)
        v = math.sqrt(planar_radicand(params, C, h, r))
        fates.append(classify_fate(params, C, h, (r, v, 0.0, 0.0)).fate == "escape")
    ok = counts == [0, 1, 2] and kinds == ["saddle", "center"] and all(fates)
    return ok, f"counts {counts}, types {kinds}, {sum(fates)}/{len(fates)} planar fates as expected"


def _turning_point(params, C, h):
    from scipy.optimize import brentq

    hi = 1.0
    while planar_radicand(params, C, h, hi) > 0:
        hi *= 2.0
    return brentq(lambda r: planar_radicand(params, C, h, r), 0.0, hi, xtol=1e-14)


def check_homographic(params, rng, n):
    tv = derive(params).theta_v
    # 99 points through 0 plus theta_v itself
    grid = np.union1d(np.linspace(-1.5, 1.5, 99), [tv])
    adm = [float(t) for t in grid if homographic_admissible(params, 1.0, t).admissible]
    neg = all(homographic_admissible(params, C, s * tv).witness["r0_squared"] < 0
              for C in rng.uniform(0.1, 5.0, n) for s in (-1, 1))
    ok = adm == [0.0] and neg
    return ok, f"admissible angles {adm}; theta_v witnesses negative: {neg}"


def check_black_hole(params):
    C = derive(params).C0 - 0.5
    h = -1.0
    r0 = _turning_point(params, C, h)
    rep = classify_fate(params, C, h, (r0, 0.0, 0.0, 0.0))
    mark = rep.diagnostics["winding_at_mark"]
    # the mark is the first accepted sample below r = 1e-5
    quad = winding_quadrature(params, C, h, r0, rep.diagnostics["r_at_mark"])
    zero = classify_fate(params, 0.0, h, (_turning_point(params, 0.0, h), 0.0, 0.0, 0.0))
    ok = (rep.fate == "triple_collision_Qstar" and mark is not None and 0 < mark < math.inf
          and abs(mark - quad) < 1e-6 * quad and zero.winding == 0.0 and zero.plane_crossings == 0)
    return ok, (f"winding before r < 1e-5: {mark:.6f} (quadrature {quad:.6f}); "
                f"C = 0 winding {zero.winding}")


def check_sink(params, seed, n):
    mono = sample_sink_states(params, n, seed, form="linear")
    bad = 0
    for C, h, st in mono:
        rep = classify_fate(params, C, h, st)
        dg = rep.diagnostics
        if (rep.fate not in ("double_collision",) and not rep.fate.startswith("triple")) or \
                dg["v_max_increase"] > 1e-10 or dg["r_max_relative_increase"] > 1e-10:
            bad += 1
    printed = sample_sink_states(params, n, seed + 1)
    bad_printed = sum(1 for C, h, st in printed
                      if not _is_collision(classify_fate(params, C, h, st).fate))
    fast = sample_sink_states(params, n, seed + 2, fast=True)
    bad_fast = 0
    for C, h, st in fast:
        rep = classify_fate(params, C, h, st)
        if rep.fate not in ("double_collision", "triple_collision_Bpm0") or \
                rep.diagnostics["crossings_in_terminal_window"] != 0:
            bad_fast += 1
    ok = bad == bad_printed == bad_fast == 0
    return ok, (f"monotone infall failures {bad}/{n}; non-collision fates {bad_printed}/{n}; "
                f"fast-infall failures {bad_fast}/{n}")


def _is_collision(fate: str) -> bool:
    return fate == "double_collision" or fate.startswith("triple")


def run_checks(params: ModelParams, seed: int = 0, quick: bool = False) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)
    n = 10 if quick else 100
    checks = [
        ("constants", lambda: check_constants(params, rng, n * 10)),
        ("relative_equilibria", lambda: check_relative_equilibria(params, rng, n)),
        ("em_diagram", lambda: check_em(params, 2000 if quick else 10_000)),
        ("charts", lambda: check_charts(params, rng, n * 10)),
        ("conservation", lambda: check_conservation(params, 100.0 if quick else 1000.0)),
        ("collision_spectra", lambda: check_cm_spectra(params)),
        ("gradient_like", lambda: check_gradient_like(params, rng, 10 if quick else 50)),
        ("connection", lambda: check_connection(params)),
        ("planar", lambda: check_planar(params, rng, 5 if quick else 20)),
        ("homographic", lambda: check_homographic(params, rng, n)),
        ("black_hole", lambda: check_black_hole(params)),
        ("global_sink", lambda: check_sink(params, seed, 20 if quick else 100)),
    ]
    out = []
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc} | {traceback.format_exc(limit=1).strip()}"
        out.append((name, bool(ok), detail))
    return out
