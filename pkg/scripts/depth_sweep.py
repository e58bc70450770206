"""Depth-free grasping across object depths: contact-depth estimate vs truth.

    python3 scripts/depth_sweep.py --depths 20 40 80 120 --z-step 5
"""
import argparse
import json

from gripsense.control import ControllerConfig, run_grasp
from gripsense.scenario import ObjectSpec, Scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--depths", type=float, nargs="+", default=[20.0, 40.0, 80.0, 120.0])
    ap.add_argument("--z-step", type=float, default=5.0)
    ap.add_argument("--offset", type=float, nargs=2, default=[10.0, -5.0], metavar=("X", "Y"))
    args = ap.parse_args()
    cfg = ControllerConfig(z_step=args.z_step)
    rows = []
    for depth in args.depths:
        s = Scenario(controller=cfg, object=ObjectSpec(args.offset[0], args.offset[1], 40.0, depth))
        out = run_grasp(s.initial_world(), cfg, s.rig)
        rows.append({"depth_mm": depth, "phase": out.phase.value, "fault": out.fault,
                     "estimate_mm": out.contact_depth, "iterations": out.descend_iterations,
                     "sim_time_s": round(out.world.clock, 3)})
    print(json.dumps(rows, indent=2))


if __name__ == "__main__":
    main()
