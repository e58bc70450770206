"""Seven directional disturbance cases on a grasped object: three finger
pokes, three object pokes and one poke whose contact the camera cannot see.

Writes one polar CSV row per frame plus the dodge taken in each case.

    python3 scripts/polar_directions.py --out results/polar
"""
import argparse
import csv
import json
from dataclasses import replace
from pathlib import Path

from gripsense.bench import write_polar_csv
from gripsense.control import ControllerConfig, GripperSession, monitor_and_dodge
from gripsense.geometry import GripperRig
from gripsense.sim import DisturbanceEvent, FingerState, SimObject, WorldState, grasp_center

CASES = {
    "finger1": DisturbanceEvent.finger_poke(1, 5.0, 0.1, 0.3),
    "finger2": DisturbanceEvent.finger_poke(2, 5.0, 0.1, 0.3),
    "finger3": DisturbanceEvent.finger_poke(3, 5.0, 0.1, 0.3),
    "object_a": DisturbanceEvent("object", 30.0, 5.0, 0.1, 0.3),
    "object_b": DisturbanceEvent("object", 150.0, 5.0, 0.1, 0.3),
    "object_c": DisturbanceEvent("object", 270.0, 5.0, 0.1, 0.3),
    "unseen": DisturbanceEvent("object", 210.0, 5.0, 0.1, 0.3, contact_height=-25.0),
}


def grasped(rig, event):
    w = WorldState(finger_state=FingerState.CLOSED, bend=1.0, disturbances=(event,))
    c = grasp_center(w, rig)
    return replace(w, object=SimObject((c[0], c[1], c[2] + 10.0), 40.0, attached=True))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/polar")
    ap.add_argument("--duration", type=float, default=0.6)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rig, cfg = GripperRig(), ControllerConfig()
    rows, summary = [], []
    for name, ev in CASES.items():
        session = GripperSession(grasped(rig, ev), rig, cfg)
        dodges = monitor_and_dodge(session, args.duration)
        rows += [(name, v.timestamp, v.theta, v.r) for v in session.vectors]
        first = dodges[0] if dodges else None
        summary.append({"case": name, "injected_deg": ev.direction,
                        "theta_deg": first.vector.theta if first else None,
                        "r_px": first.vector.r if first else None,
                        "dodge_mm": [round(float(x), 4) for x in first.move.delta] if first else None})
    with open(out / "polar.csv", "w", newline="") as fh:
        write_polar_csv(fh, rows)
    with open(out / "dodges.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(summary[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(summary)
    print(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
