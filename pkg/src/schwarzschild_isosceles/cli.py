"""Command-line front end.

Every subcommand reads an optional JSON run configuration and writes CSV,
JSON or SVG files into the output directory.  Exit codes: 0 success,
1 verification failure, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .model import CONVENTIONS, REFERENCE_PARAMS, ModelParams, ParameterError

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
FMT = "%.17g"


class InputError(Exception):
    """Bad user input; maps to exit code 2."""


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams = REFERENCE_PARAMS
    convention: str = "hamiltonian"
    rtol: float = 1e-10
    atol: float = 1e-12
    output_dir: str = "."
    seed: int = 0
    jobs: int = 1
    extra: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise InputError("configuration must be a JSON object")
        known = {f.name for f in fields(cls)} - {"extra"}
        unknown = set(data) - known
        if unknown:
            raise InputError(f"unknown configuration keys: {sorted(unknown)}")
        kw = dict(data)
        if "params" in kw:
            try:
                kw["params"] = ModelParams.from_dict(kw["params"])
            except (ParameterError, TypeError) as exc:
                raise InputError(str(exc)) from exc
        cfg = cls(**kw)
        if cfg.convention not in CONVENTIONS:
            raise InputError(f"convention must be one of {CONVENTIONS}")
        if not (cfg.rtol > 0 and cfg.atol > 0):
            raise InputError("tolerances must be > 0")
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read configuration: {exc}") from exc
        return cls.from_dict(data)


def _json_default(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _dump(obj, path: Path | None = None) -> str:
    text = json.dumps(obj, indent=2, default=_json_default, sort_keys=True)
    if path is not None:
        path.write_text(text + "\n")
    return text


# ----------------------------------------------------------------------- SVG

def write_svg(curves, path, *, width: int = 640, height: int = 480, xlabel: str = "r",
              ylabel: str = "v") -> None:
    """Polylines with a frame and zero axes; ``curves`` is a list of ``(label, x, y)``.

    NaN entries split a polyline into separate segments.
    """
    xs = np.concatenate([np.asarray(c[1], float) for c in curves])
    ys = np.concatenate([np.asarray(c[2], float) for c in curves])
    ok = np.isfinite(xs) & np.isfinite(ys)
    x0, x1 = float(xs[ok].min()), float(xs[ok].max())
    y0, y1 = float(ys[ok].min()), float(ys[ok].max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pad = 40

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
           'fill="none" stroke="black"/>']
    if y0 < 0 < y1:
        out.append(f'<line x1="{pad}" y1="{py(0):.2f}" x2="{width - pad}" y2="{py(0):.2f}" '
                   'stroke="gray" stroke-dasharray="4"/>')
    if x0 < 0 < x1:
        out.append(f'<line x1="{px(0):.2f}" y1="{pad}" x2="{px(0):.2f}" y2="{height - pad}" '
                   'stroke="gray" stroke-dasharray="4"/>')
    for k, (label, x, y) in enumerate(curves):
        col = colors[k % len(colors)]
        seg: list[str] = []
        for a, b in zip(np.asarray(x, float), np.asarray(y, float)):
            if math.isfinite(a) and math.isfinite(b):
                seg.append(f"{px(a):.2f},{py(b):.2f}")
            elif seg:
                out.append(f'<polyline fill="none" stroke="{col}" points="{" ".join(seg)}"/>')
                seg = []
        if seg:
            out.append(f'<polyline fill="none" stroke="{col}" points="{" ".join(seg)}"/>')
        out.append(f'<text x="{width - pad - 120}" y="{pad + 15 * (k + 1)}" fill="{col}" '
                   f'font-size="12">{label}</text>')
    out.append(f'<text x="{width / 2:.0f}" y="{height - 8}" font-size="12">{xlabel}</text>')
    out.append(f'<text x="8" y="{height / 2:.0f}" font-size="12">{ylabel}</text>')
    out.append(f'<text x="{pad}" y="{height - pad + 15}" font-size="10">{x0:.3g}</text>')
    out.append(f'<text x="{width - pad - 30}" y="{height - pad + 15}" font-size="10">{x1:.3g}</text>')
    out.append(f'<text x="2" y="{height - pad}" font-size="10">{y0:.3g}</text>')
    out.append(f'<text x="2" y="{pad + 4}" font-size="10">{y1:.3g}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


# --------------------------------------------------------------- subcommands

def cmd_equilibria(cfg: RunConfig, args, out: Path) -> int:
    from .equilibria import relative_equilibria
    from .model import derive

    eqs = relative_equilibria(cfg.params, args.C, cfg.convention)
    doc = {"C": args.C, "C0": derive(cfg.params).C0, "equilibria": [e.to_dict() for e in eqs]}
    print(_dump(doc, out / "equilibria.json"))
    return EXIT_OK


def cmd_em_diagram(cfg: RunConfig, args, out: Path) -> int:
    from .equilibria import em_diagram, em_self_intersections, write_em_csv

    pts = em_diagram(cfg.params, (args.R_min, args.R_max), args.n, cfg.convention)
    write_em_csv(pts, out / "em_diagram.csv")
    print(_dump({"points": len(pts), "self_intersections": len(em_self_intersections(pts)),
                 "file": str(out / "em_diagram.csv")}))
    return EXIT_OK


def cmd_manifold(cfg: RunConfig, args, out: Path) -> int:
    from .manifold import manifold_summary

    print(_dump(manifold_summary(cfg.params, args.C), out / "manifold.json"))
    return EXIT_OK


def cmd_trace(cfg: RunConfig, args, out: Path) -> int:
    from .manifold import cm_equilibria, find_equilibrium, trace_manifold

    eq = find_equilibrium(cm_equilibria(cfg.params, args.C), args.eq)
    res = trace_manifold(cfg.params, eq, args.branch, args.eps, C=args.C, ray_angle=args.ray_angle,
                         span=args.span)
    name = f"trace_{args.eq}_{args.branch}.csv"
    res.trajectory.to_csv(out / name)
    print(_dump({"equilibrium": res.equilibrium, "branch": res.branch, "eps": res.eps,
                 "outcome": res.outcome, "richardson_outcome": res.richardson_outcome,
                 "richardson_agrees": res.richardson_agrees, "file": str(out / name),
                 "trajectory": res.trajectory.summary()}))
    return EXIT_OK


def cmd_planar(cfg: RunConfig, args, out: Path) -> int:
    from .model import derive
    from .orbits import planar_curve, planar_equilibria

    C = args.C if args.C is not None else derive(cfg.params).C0 + args.C_offset
    curves, files = [], []
    for k, h in enumerate(args.h):
        pc = planar_curve(cfg.params, C, h, (args.r_min, args.r_max), args.n)
        name = f"planar_{k}.csv"
        with (out / name).open("w") as fh:
            fh.write("r,h,v_upper,v_lower\n")
            for r, v in zip(pc.r, pc.v):
                fh.write(f"{FMT % r},{FMT % h},{FMT % v},{FMT % -v}\n")
        files.append(name)
        r2 = np.concatenate([pc.r, [np.nan], pc.r[::-1]])
        v2 = np.concatenate([pc.v, [np.nan], -pc.v[::-1]])
        curves.append((f"h = {h:g}", r2, v2))
    if args.svg:
        write_svg(curves, out / "planar.svg")
        files.append("planar.svg")
    print(_dump({"C": C, "h": list(args.h), "regime": planar_equilibria(cfg.params, C).to_dict(),
                 "files": files}))
    return EXIT_OK


EVENT_KINDS = ("r_below", "r_above", "v_below", "theta_near_pm_half", "plane_crossing")


def _parse_event(text: str):
    """``kind`` or ``kind:threshold``."""
    from .flow import EventSpec

    kind, _, value = text.partition(":")
    if kind not in EVENT_KINDS:
        raise InputError(f"unknown event {kind!r}; expected one of {EVENT_KINDS}")
    try:
        return EventSpec(kind, float(value)) if value else EventSpec(kind)
    except ValueError as exc:
        raise InputError(f"bad event {text!r}: {exc}") from exc


def cmd_simulate(cfg: RunConfig, args, out: Path) -> int:
    from .flow import integrate, make_field

    f = make_field(args.chart, cfg.params, args.C, args.h, winding=args.winding)
    y0 = list(args.state) + ([0.0] if args.winding else [])
    events = [_parse_event(e) for e in args.event]
    traj = integrate(f, y0, (0.0, args.span), rtol=cfg.rtol, atol=cfg.atol, events=events,
                     max_steps=args.budget)
    traj.to_csv(out / "trajectory.csv")
    traj.write_events_json(out / "events.json")
    print(_dump(traj.summary()))
    return EXIT_OK


def cmd_classify(cfg: RunConfig, args, out: Path) -> int:
    from .orbits import classify_batch, load_batch, write_fates_csv

    jobs = load_batch(args.batch)
    reports = classify_batch(cfg.params, jobs, n_workers=args.jobs or cfg.jobs, budget=args.budget,
                             rtol=cfg.rtol, atol=cfg.atol)
    write_fates_csv(reports, out / "fates.csv")
    counts: dict[str, int] = {}
    for r in reports:
        counts[r.fate] = counts.get(r.fate, 0) + 1
    print(_dump({"jobs": len(reports), "fates": counts, "file": str(out / "fates.csv")}))
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args, out: Path) -> int:
    from .verify import run_checks

    results = run_checks(cfg.params, seed=cfg.seed, quick=args.quick)
    ok = True
    for name, passed, detail in results:
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    _dump([{"check": n, "passed": p, "detail": d} for n, p, d in results], out / "verify.json")
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="schwarzschild-iso",
                                description="Isosceles three-body problem with a Schwarzschild-type potential.")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", help="output directory (overrides the configuration)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("equilibria", help="relative equilibria and their stability at one C")
    s.add_argument("--C", type=float, required=True)
    s.set_defaults(func=cmd_equilibria)

    s = sub.add_parser("em-diagram", help="energy-momentum curve as CSV")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--R-min", dest="R_min", type=float, default=0.05)
    s.add_argument("--R-max", dest="R_max", type=float, default=50.0)
    s.set_defaults(func=cmd_em_diagram)

    s = sub.add_parser("manifold", help="collision-manifold equilibria and connection test")
    s.add_argument("--C", type=float, default=0.0)
    s.set_defaults(func=cmd_manifold)

    s = sub.add_parser("trace", help="shoot an unstable manifold on the collision manifold")
    s.add_argument("--eq", required=True, help="Q, Eplus, Eminus, ...")
    s.add_argument("--branch", choices=("w_pos", "w_neg"), default="w_pos")
    s.add_argument("--eps", type=float, default=1e-7)
    s.add_argument("--C", type=float, default=0.0)
    s.add_argument("--ray-angle", dest="ray_angle", type=float, default=None)
    s.add_argument("--span", type=float, default=500.0)
    s.set_defaults(func=cmd_trace)

    s = sub.add_parser("planar", help="planar phase curves for several energies")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--C", type=float, default=None)
    g.add_argument("--C-offset", dest="C_offset", type=float, default=-0.5,
                   help="C relative to the critical value (used when --C is absent)")
    s.add_argument("--h", type=float, nargs="+", default=[1.0, 0.0, -1.0, -5.0])
    s.add_argument("--r-min", dest="r_min", type=float, default=1e-3)
    s.add_argument("--r-max", dest="r_max", type=float, default=5.0)
    s.add_argument("--n", type=int, default=400)
    s.add_argument("--svg", action="store_true")
    s.set_defaults(func=cmd_planar)

    s = sub.add_parser("simulate", help="integrate one initial condition")
    s.add_argument("--chart", required=True,
                   choices=("reduced", "mcgehee", "regularized", "collision", "planar"))
    s.add_argument("--state", type=float, nargs="+", required=True)
    s.add_argument("--C", type=float, default=0.0)
    s.add_argument("--h", type=float, default=0.0)
    s.add_argument("--span", type=float, default=10.0)
    s.add_argument("--budget", type=int, default=10**7)
    s.add_argument("--winding", action="store_true")
    s.add_argument("--event", action="append", default=[], metavar="KIND[:THRESHOLD]",
                   help=f"stop event, one of {', '.join(EVENT_KINDS)}")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("classify", help="classify a batch of orbits")
    s.add_argument("--batch", required=True, help="JSON array of {C, h, state0}")
    s.add_argument("--jobs", type=int, default=None)
    s.add_argument("--budget", type=int, default=10**7)
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("verify", help="run the invariant checks")
    s.add_argument("--quick", action="store_true", help="smaller samples")
    s.set_defaults(func=cmd_verify)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        out = Path(args.out or cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        return args.func(cfg, args, out)
    except (InputError, ParameterError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
