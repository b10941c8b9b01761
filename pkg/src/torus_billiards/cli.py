"""Command-line entry point.

Every command prints its report as JSON on stdout and, with ``--out``,
writes the report and any tables into that directory. The exit status is
0 when all checks of the command pass, 1 when some check fails and 2 on
usage errors.
"""
from __future__ import annotations

import argparse
import logging
import math
import random
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import textio
from .admissible import (
    CyclicSequence,
    SymbolicSequence,
    build_paper_graph,
    build_transition_graph,
    enumerate_periodic,
    summarize_paper_graph,
)
from .flow import FlowState, rotation_series, trace
from .rotset import (
    convexity_experiment,
    parse_cycle_id,
    proper_inclusion_check,
    sample_admissible_rotation_set,
)
from .scene import Scene, validate_scene
from .varpath import VarPathError, minimize_open

COMMANDS = ("validate", "graph", "periodic", "rotset", "trajectory", "flow", "convexity", "inclusion")


class UsageError(Exception):
    pass


@dataclass
class Output:
    report: dict
    passed: bool
    files: dict[str, str]


def _vector(text: str | None, m: int, name: str) -> np.ndarray | None:
    if text is None:
        return None
    try:
        v = np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise UsageError(f"{name} must be comma-separated numbers, got {text!r}") from None
    if len(v) != m:
        raise UsageError(f"{name} needs {m} coordinates, got {len(v)}")
    return v


def _table(fmt: str, name: str, header: list[str], rows: list[list]) -> tuple[str, str]:
    if fmt == "csv":
        return f"{name}.csv", textio.table_csv(header, rows)
    return f"{name}.json", textio.dumps([dict(zip(header, r)) for r in rows])


# ---------------------------------------------------------------------------
# commands


def cmd_validate(scene: Scene, args) -> Output:
    rep = validate_scene(scene)
    return Output(rep.to_dict(), rep.valid, {})


def cmd_graph(scene: Scene, args) -> Output:
    paper = build_paper_graph(scene, args.jmax)
    summary = summarize_paper_graph(scene, paper)
    tg = build_transition_graph(scene, args.jmax)
    checks = {
        "hub_edges": not summary.no_hub_edge,
        "routed_diameter_at_most_5": summary.routed_diameter <= 5,
    }
    report = {
        "checks": checks,
        "paper_graph": summary.to_dict(),
        "transition_graph": {"states": len(tg.states), "arcs": tg.n_arcs, "boundary_warning": tg.boundary_warning},
    }
    files = {
        "paper_graph.json": textio.dumps(paper.to_dict()),
        "transition_graph.json": textio.dumps(tg.to_dict()),
    }
    return Output(report, all(checks.values()), files)


def _cloud(scene: Scene, args):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return sample_admissible_rotation_set(scene, args.qmax, args.jmax)


def cmd_periodic(scene: Scene, args) -> Output:
    cloud = _cloud(scene, args)
    norms = [s.norm for s in cloud.samples]
    checks = {"all_orbits_verified": not cloud.failures, "norms_below_one": all(n < 1.0 for n in norms)}
    report = {"checks": checks, "n_orbits": len(cloud.orbits), "minimized": cloud.minimized, "failures": cloud.failures}
    orbits = [o.to_dict() for o in cloud.orbits]
    m = scene.m
    header = [f"rho{i + 1}" for i in range(m)] + ["norm", "q", "length", "residual", "clearance", "source"]
    rows = [
        list(map(float, s.vector)) + [s.norm, o.q, o.period_length, o.residual, o.clearance, s.source]
        for s, o in zip(cloud.samples, cloud.orbits)
    ]
    name, text = _table(args.format, "samples", header, rows)
    return Output(report, all(checks.values()), {"orbits.json": textio.dumps(orbits), name: text})


def cmd_rotset(scene: Scene, args) -> Output:
    cloud = _cloud(scene, args)
    pts = cloud.points
    sym = True
    if len(pts):
        from scipy.spatial import cKDTree

        sym = bool(cKDTree(pts).query(-pts)[0].max() <= 1e-12)
    checks = {"contains_zero": cloud.contains_zero(), "margin_positive": cloud.margin > 0.0, "reversal_symmetric": sym}
    report = {"checks": checks, **cloud.to_dict()}
    m = scene.m
    header = [f"rho{i + 1}" for i in range(m)] + ["norm", "provenance", "source"]
    rows = [list(map(float, s.vector)) + [s.norm, s.provenance, s.source] for s in cloud.samples]
    name, text = _table(args.format, "cloud", header, rows)
    files = {name: text}
    if cloud.hull is not None:
        hrows = [list(map(float, v)) for v in cloud.hull.vertices]
        hname, htext = _table(args.format, "hull", [f"rho{i + 1}" for i in range(m)], hrows)
        files[hname] = htext
    return Output(report, all(checks.values()), files)


def cmd_trajectory(scene: Scene, args) -> Output:
    if args.sequence is None:
        raise UsageError("trajectory needs --sequence FILE (JSON array of [k..., r] rows)")
    try:
        rows = textio.read_json(args.sequence)
        seq = SymbolicSequence.from_rows(rows)
    except (OSError, ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"cannot read sequence file {args.sequence}: {exc}") from None
    start = _vector(args.start, scene.m, "--start")
    end = _vector(args.end, scene.m, "--end")
    try:
        piece = minimize_open(scene, seq, start, end)
    except VarPathError as exc:
        return Output({"checks": {"minimized": False}, "error": str(exc)}, False, {})
    checks = {"minimized": True, "residual_below_tol": piece.residual < 1e-10, "clearance_positive": piece.clearance > 0}
    return Output({"checks": checks, "piece": piece.to_dict()}, all(checks.values()), {})


def _random_start(scene: Scene, rng: random.Random) -> FlowState:
    while True:
        x = np.array([rng.random() for _ in range(scene.m)])
        if np.all(np.linalg.norm(x - scene.centers, axis=1) > scene.radii + 1e-9):
            break
    d = np.array([rng.gauss(0.0, 1.0) for _ in range(scene.m)])
    return FlowState.make(tuple(float(a) for a in x), tuple(float(a) for a in d))


def cmd_flow(scene: Scene, args) -> Output:
    rng = random.Random(args.seed)
    pos = _vector(args.start, scene.m, "--start")
    direction = _vector(args.direction, scene.m, "--direction")
    if (pos is None) != (direction is None):
        raise UsageError("give both --start and --direction, or neither (random start from --seed)")
    if pos is None:
        start = _random_start(scene, rng)
    else:
        if np.any(np.linalg.norm(pos - scene.centers - np.round(pos - scene.centers), axis=1) < scene.radii):
            raise UsageError("--start lies inside an obstacle")
        if not np.linalg.norm(direction) > 0:
            raise UsageError("--direction must be nonzero")
        start = FlowState.make(tuple(float(a) for a in pos), tuple(float(a) for a in direction))
    t_max = math.inf if args.tmax is None else args.tmax
    flight = trace(scene, start, args.nmax, t_max)
    speeds = [abs(float(np.linalg.norm(np.array(flight.final.direction, float))) - 1.0)]
    checks = {"no_tangency": flight.terminal != "tangency", "speed_conserved": max(speeds) < 1e-12}
    series = rotation_series(flight)
    report = {
        "checks": checks,
        "terminal": flight.terminal,
        "events": len(flight.events),
        "initial": {"position": list(start.position), "direction": list(start.direction)},
        "final": {"position": list(flight.final.position), "direction": list(flight.final.direction), "time": float(flight.final.time)},
        "displacement": flight.displacement.tolist(),
        "last_rotation_estimate": series[-1][1].tolist() if series else None,
    }
    m = scene.m
    ev_header = ["time"] + [f"x{i + 1}" for i in range(m)] + [f"k{i + 1}" for i in range(m)] + ["r"]
    ev_rows = [[float(e.time)] + [float(a) for a in e.point] + list(e.obstacle.k) + [e.obstacle.r] for e in flight.events]
    rs_rows = [[n] + [float(a) for a in v] for n, v in series]
    ename, etext = _table(args.format, "events", ev_header, ev_rows)
    sname, stext = _table(args.format, "rotation_series", ["n"] + [f"rho{i + 1}" for i in range(m)], rs_rows)
    return Output(report, all(checks.values()), {ename: etext, sname: stext})


def _default_cycles(scene: Scene, graph) -> tuple[CyclicSequence, CyclicSequence]:
    """Shortest-period bounce cycle (p = 0) and shortest-period translating cycle."""
    cycles = enumerate_periodic(scene, graph, 4)
    bounce = [c for c in cycles if not any(c.p)]
    moving = [c for c in cycles if any(c.p)]
    if not bounce or not moving:
        raise UsageError("no default cycle pair found; pass --cycle-a and --cycle-b")
    return bounce[0], moving[0]


def cmd_convexity(scene: Scene, args) -> Output:
    if not 0.0 < args.t <= 1.0:
        raise UsageError("--t must lie in (0, 1]")
    graph = build_transition_graph(scene, args.jmax)
    if args.cycle_a and args.cycle_b:
        try:
            A, B = parse_cycle_id(args.cycle_a), parse_cycle_id(args.cycle_b)
        except ValueError as exc:
            raise UsageError(f"bad cycle id: {exc}") from None
    else:
        A, B = _default_cycles(scene, graph)
    rep = convexity_experiment(scene, A, B, args.t, args.eps, graph=graph)
    return Output({"checks": {"passed": rep.passed}, "report": rep.to_dict()}, rep.passed, {})


def cmd_inclusion(scene: Scene, args) -> Output:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = proper_inclusion_check(scene, args.qmax, args.k, args.jmax)
    return Output({"checks": {"passed": rep.passed}, "report": rep.to_dict()}, rep.passed, {})


HANDLERS = {
    "validate": cmd_validate,
    "graph": cmd_graph,
    "periodic": cmd_periodic,
    "rotset": cmd_rotset,
    "trajectory": cmd_trajectory,
    "flow": cmd_flow,
    "convexity": cmd_convexity,
    "inclusion": cmd_inclusion,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="torus-billiards", description="Billiards in a torus with spherical obstacles.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--scene", required=True, help="scene file (JSON)")
    ap.add_argument("--out", help="directory for report and tables")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jmax", type=int, default=1, help="cell cutoff of the graphs")
    ap.add_argument("--qmax", type=int, default=4, help="largest period of enumerated cycles")
    ap.add_argument("--eps", type=float, default=0.05)
    ap.add_argument("--t", type=float, default=0.5)
    ap.add_argument("--k", type=int, default=100)
    ap.add_argument("--nmax", type=int, default=100)
    ap.add_argument("--tmax", type=float, default=None)
    ap.add_argument("--format", choices=("json", "csv"), default="csv", help="format of tables")
    ap.add_argument("--sequence", help="trajectory type: JSON array of [k..., r] rows")
    ap.add_argument("--start", help="point as comma-separated coordinates")
    ap.add_argument("--end", help="point as comma-separated coordinates")
    ap.add_argument("--direction", help="flow direction as comma-separated coordinates")
    ap.add_argument("--cycle-a", help="cycle id r_prev:l:r;... for the first block")
    ap.add_argument("--cycle-b", help="cycle id for the second block")
    return ap


def _check_ranges(args) -> None:
    if args.jmax < 1:
        raise UsageError("--jmax must be at least 1")
    if args.qmax < 1:
        raise UsageError("--qmax must be at least 1")
    if not args.eps > 0:
        raise UsageError("--eps must be positive")
    if args.k < 1:
        raise UsageError("--k must be at least 1")
    if args.nmax < 0:
        raise UsageError("--nmax must be nonnegative")
    if args.tmax is not None and not args.tmax > 0:
        raise UsageError("--tmax must be positive")


def run(argv: list[str] | None = None) -> tuple[int, Output | None]:
    args = build_parser().parse_args(argv)
    try:
        _check_ranges(args)
        try:
            scene = Scene.load(args.scene)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"cannot read scene {args.scene}: {exc}") from None
        out = HANDLERS[args.command](scene, args)
    except UsageError as exc:
        print(f"torus-billiards: error: {exc}", file=sys.stderr)
        return 2, None
    text = textio.dumps({"command": args.command, "passed": out.passed, **out.report})
    sys.stdout.write(text)
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{args.command}.json").write_text(text)
        for name, body in out.files.items():
            (d / name).write_text(body)
    return (0 if out.passed else 1), out


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
