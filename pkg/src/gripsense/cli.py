"""Command line entry point: ``gripsense run | bench-latency | mechanics | detect``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from . import bench
from .control import GraspPhase, GripperSession, monitor_and_dodge, run_grasp
from .collision import MarkerLoss
from .detect import DEFAULT_BAND, NoCircle, extract_marker_centers, hough_circles
from .imaging import dump_frame, read_pgm
from .mechanics import Disturbance, FingerBasis, decompose, is_resistible
from .scenario import ScenarioError, load_scenario

EXIT_OK, EXIT_USAGE, EXIT_FAULT = 0, 1, 2

log = logging.getLogger("gripsense")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))


def execute_scenario(scenario, frame_dir=None):
    """Grasp, then monitor and dodge scripted disturbances.  Returns (outcome, session, dodges)."""
    sink = (lambda f: dump_frame(f, frame_dir)) if frame_dir else None
    world = scenario.initial_world()
    session = GripperSession(world, scenario.rig, scenario.controller, scenario.camera, frame_sink=sink)
    outcome = run_grasp(world, scenario.controller, scenario.rig, session=session)
    dodges = []
    if outcome.phase is GraspPhase.DONE and scenario.monitor_duration > 0:
        t0 = session.t
        # disturbance start times count from the beginning of monitoring
        shifted = tuple(replace(d, start=d.start + t0) for d in scenario.disturbances)
        session.world = replace(session.world, disturbances=shifted)
        session.log("monitor", duration=scenario.monitor_duration)
        try:
            dodges = monitor_and_dodge(session, scenario.monitor_duration)
        except MarkerLoss as exc:
            outcome.phase, outcome.fault = GraspPhase.FAULT, "MarkerLoss"
            session.log("fault", reason="MarkerLoss", detail=str(exc))
    return outcome, session, dodges


def cmd_run(args) -> int:
    path = args.scenario_file or args.scenario
    if path is None:
        raise ScenarioError("run needs a scenario file")
    scenario = load_scenario(path)
    outcome, session, dodges = execute_scenario(scenario, args.dump_frames)
    summary = {
        "phase": outcome.phase.value,
        "fault": outcome.fault,
        "contact_depth_mm": outcome.contact_depth,
        "descend_iterations": outcome.descend_iterations,
        "dodges": [{"t": round(d.vector.timestamp, 6), "theta": d.vector.theta, "r": d.vector.r,
                    "delta": [float(x) for x in d.move.delta]} for d in dodges],
        "seed": scenario.seed,
        "scenario_hash": scenario.hash,
    }
    if args.trace:
        with open(args.trace, "w") as fh:
            for ev in session.events:
                fh.write(_dumps(ev) + "\n")
            fh.write(_dumps({"event": "outcome", **summary}) + "\n")
    if args.polar_csv:
        with open(args.polar_csv, "w", newline="") as fh:
            bench.write_polar_csv(fh, [("run", v.timestamp, v.theta, v.r) for v in session.vectors])
    print(json.dumps(summary, indent=2))
    return EXIT_OK if outcome.phase is GraspPhase.DONE else EXIT_FAULT


def cmd_bench(args) -> int:
    scenario = load_scenario(args.scenario)
    report = bench.bench_latency(scenario, args.trials)
    files = bench.emit_report(report, args.out)
    print(json.dumps({"art_ms": report.summary()["art_ms"], "n": report.n,
                      "files": [str(f) for f in files]}, indent=2))
    return EXIT_OK


def cmd_mechanics(args) -> int:
    basis = FingerBasis.two_finger() if args.two_finger else FingerBasis.three_finger()
    f = Disturbance(args.fx, args.fy)
    out = decompose(f, basis).to_dict()
    out["resistible"] = is_resistible(f, basis, args.tol)
    out["fingers"] = len(basis.normals)
    print(json.dumps(out))
    return EXIT_OK


def cmd_detect(args) -> int:
    frame = read_pgm(args.frame)
    observations, missing = extract_marker_centers(frame, args.marker_side)
    for o in observations:
        print(_dumps({"kind": "marker", "id": o.id, "u": o.centroid.u, "v": o.centroid.v}))
    for m in missing:
        print(_dumps({"kind": "missing_marker", "id": m.id}))
    try:
        for c in hough_circles(frame, args.r_min, args.r_max):
            print(_dumps({"kind": "circle", "u": c.center.u, "v": c.center.v, "radius": c.radius,
                          "score": c.accumulator_score}))
    except NoCircle:
        print(_dumps({"kind": "no_circle"}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gripsense", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="grasp, then monitor and dodge")
    run.add_argument("scenario_file", nargs="?")
    run.add_argument("--scenario")
    run.add_argument("--dump-frames", metavar="DIR")
    run.add_argument("--trace", metavar="FILE", help="NDJSON phase/move/collision trace")
    run.add_argument("--polar-csv", metavar="FILE")
    run.set_defaults(func=cmd_run)

    b = sub.add_parser("bench-latency", help="vision vs force onset benchmark")
    b.add_argument("--scenario", required=True)
    b.add_argument("--trials", type=int)
    b.add_argument("--out", required=True, metavar="DIR")
    b.set_defaults(func=cmd_bench)

    m = sub.add_parser("mechanics", help="decompose a planar disturbance over finger normals")
    m.add_argument("--fx", type=float, required=True)
    m.add_argument("--fy", type=float, required=True)
    m.add_argument("--two-finger", action="store_true")
    m.add_argument("--tol", type=float, default=1e-9)
    m.set_defaults(func=cmd_mechanics)

    d = sub.add_parser("detect", help="markers and circles in a binary PGM frame")
    d.add_argument("frame")
    d.add_argument("--r-min", type=int, default=DEFAULT_BAND[0])
    d.add_argument("--r-max", type=int, default=DEFAULT_BAND[1])
    d.add_argument("--marker-side", type=float, default=16)
    d.set_defaults(func=cmd_detect)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, bench.BenchmarkError, ValueError) as exc:
        print(f"gripsense: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"gripsense: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
