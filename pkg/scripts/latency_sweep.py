"""Vision-vs-force onset benchmark over a range of processing delays.

    python3 scripts/latency_sweep.py --trials 20 --delays 0 30 --out results/latency
"""
import argparse
import json
from dataclasses import replace
from pathlib import Path

from gripsense.bench import bench_latency, emit_report
from gripsense.scenario import load_scenario

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default=str(HERE.parent / "scenarios" / "latency_bench.toml"))
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--delays", type=float, nargs="+", default=[0.0, 30.0], help="ms")
    ap.add_argument("--phase-lock", action="store_true")
    ap.add_argument("--out", default="results/latency")
    args = ap.parse_args()
    base = load_scenario(args.scenario)
    table = []
    for ms in args.delays:
        s = replace(base, bench=replace(base.bench, processing_delay=ms / 1000.0, phase_lock=args.phase_lock))
        rep = bench_latency(s, args.trials)
        emit_report(rep, Path(args.out) / f"delay_{ms:g}ms")
        lat = [x * 1000 for x in rep.latencies]
        table.append({"delay_ms": ms, "art_ms": round(rep.art * 1000, 3), "n": rep.n,
                      "min_ms": round(min(lat), 3), "max_ms": round(max(lat), 3)})
    print(json.dumps(table, indent=2))


if __name__ == "__main__":
    main()
