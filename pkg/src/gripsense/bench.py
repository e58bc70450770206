"""Response-time benchmark: vision-channel vs force-channel collision onset.

Each trial drives the closed gripper down onto a contact plane, holds, and
retreats.  The force channel is sampled every tick (2000 Hz); the vision
channel is the collision-vector magnitude of every camera frame (20 fps).
Both series are peak-normalized and their onsets are the first samples
strictly above the onset fraction.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .collision import PositionMatrix, encode
from .detect import extract_marker_centers
from .imaging import FRAME_PERIOD, CameraClock, capture_if_due
from .scenario import Scenario
from .sim import DT, FingerState, ft_sample, grasp_center, penetration, step

log = logging.getLogger(__name__)

HARDWARE_ART_MS = 204.75
HUMAN_BASELINE_MS = 241.0
LABEL_NOTE = ("t1 is the vision onset and t2 the force onset; with the force channel leading, "
              "t2 - t1 is negative, so ART is reported as the mean absolute gap")


class NoOnset(LookupError):
    pass


class BenchmarkError(RuntimeError):
    pass


class ReportError(OSError):
    pass


@dataclass(frozen=True)
class OnsetDetector:
    fraction: float = 0.6
    channel: str = "force"

    def __post_init__(self):
        if not 0 < self.fraction < 1:
            raise ValueError("onset fraction must lie in (0, 1)")
        if self.channel not in ("force", "vision"):
            raise ValueError(f"unknown channel {self.channel!r}")


def detect_onset(times, values, d: OnsetDetector | None = None) -> float:
    """Time of the first sample whose peak-normalized value exceeds the fraction."""
    d = d or OnsetDetector()
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise NoOnset("empty series")
    peak = float(v.max())
    if not peak > 0:
        raise NoOnset("series has no positive peak")
    above = np.nonzero(v / peak > d.fraction)[0]
    if above.size == 0:
        raise NoOnset("no sample above the onset fraction")
    return float(np.asarray(times)[above[0]])


@dataclass
class TrialTrace:
    index: int
    force_t: list[float] = field(default_factory=list)
    force: list[float] = field(default_factory=list)
    vision_t: list[float] = field(default_factory=list)
    vision_r: list[float] = field(default_factory=list)
    vision_theta: list[float] = field(default_factory=list)
    contact_t: float | None = None


@dataclass
class LatencyReport:
    periods: list[tuple[float, float]]  # (t1 vision onset, t2 force onset) per trial
    art: float  # s, mean |t2 - t1|
    n: int
    processing_delay: float = 0.0
    seed: int = 0
    scenario_hash: str = ""
    failed: list[int] = field(default_factory=list)
    traces: list[TrialTrace] = field(default_factory=list)
    trial_ids: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.n < 1:
            raise BenchmarkError("a latency report needs at least one trial")

    @property
    def latencies(self) -> list[float]:
        return [t1 - t2 for t1, t2 in self.periods]

    def summary(self) -> dict:
        return {
            "art_ms": round(self.art * 1000.0, 6),
            "n": self.n,
            "processing_delay_ms": round(self.processing_delay * 1000.0, 6),
            "seed": self.seed,
            "scenario_hash": self.scenario_hash,
            "failed_trials": self.failed,
            "per_trial": [
                {"trial": i, "t1_vision": round(t1, 6), "t2_force": round(t2, 6),
                 "latency_ms": round((t1 - t2) * 1000.0, 6)}
                for i, (t1, t2) in zip(self.trial_ids, self.periods)
            ],
            "annotations": {
                "hardware_art_ms": HARDWARE_ART_MS,
                "human_tactile_baseline_ms": HUMAN_BASELINE_MS,
                "labeling": LABEL_NOTE,
                "note": "hardware figures are reference context only; the simulator measures sampling-grid latency",
            },
        }


def _approach_height(scenario: Scenario, index: int) -> float:
    b = scenario.bench
    rng = np.random.default_rng([scenario.seed, index, 0xBE])
    h = float(rng.uniform(*b.approach))
    if b.phase_lock:
        # contact exactly on a camera tick
        per_frame = b.speed * FRAME_PERIOD
        h = per_frame * max(1, round(h / per_frame))
    return h


def run_trial(scenario: Scenario, index: int) -> TrialTrace:
    """One descend-hold-retreat cycle with both channels recorded."""
    b = scenario.bench
    rig = scenario.rig
    h = _approach_height(scenario, index)
    noise = b.ft_noise_fraction * scenario.physics.stiffness * b.penetration
    world = replace(scenario.initial_world(), object=None, finger_state=FingerState.CLOSED, bend=1.0,
                    rng_seed=scenario.seed * 1000 + index,
                    physics=replace(scenario.physics, ft_noise=noise))
    start_z = float(grasp_center(world, rig)[2])
    world = replace(world, plane_z=start_z - h).command_velocity((0.0, 0.0, -b.speed))

    trace = TrialTrace(index)
    clock = CameraClock()
    reference = None
    phase, hold_until = "descend", None
    max_ticks = int(round((2 * (h + b.penetration) / b.speed + b.hold + 2 * FRAME_PERIOD) / DT))
    for _ in range(max_ticks):
        s = ft_sample(world, rig)
        trace.force_t.append(s.t)
        trace.force.append(s.fz)
        frame = capture_if_due(clock, world.clock, world, rig, scenario.camera)
        if frame is not None:
            obs, _ = extract_marker_centers(frame, rig.marker_side)
            current = PositionMatrix.from_observations(obs, frame.timestamp)
            if reference is None:
                reference = current
            vec = encode(reference, current)
            trace.vision_t.append(frame.timestamp)
            trace.vision_r.append(vec.r)
            trace.vision_theta.append(vec.theta)
        if trace.contact_t is None and penetration(world, rig) > 0:
            trace.contact_t = world.clock
        if phase == "descend" and penetration(world, rig) >= b.penetration - 1e-9:
            phase, hold_until = "hold", world.clock + b.hold
            world = world.command_velocity((0.0, 0.0, 0.0))
        elif phase == "hold" and world.clock >= hold_until - 1e-12:
            phase = "retreat"
            world = world.command_velocity((0.0, 0.0, b.speed))
        elif phase == "retreat" and grasp_center(world, rig)[2] >= start_z:
            break
        world = step(world)
    return trace


def bench_latency(scenario: Scenario, trials: int | None = None) -> LatencyReport:
    """Run the trials and average the vision-vs-force onset gap."""
    b = scenario.bench
    n = trials if trials is not None else b.trials
    if n < 3:
        raise BenchmarkError("latency bench needs at least 3 trials")
    force_d = OnsetDetector(b.onset_fraction, "force")
    vision_d = OnsetDetector(b.onset_fraction, "vision")
    periods, failed, traces, ids = [], [], [], []
    for i in range(n):
        tr = run_trial(scenario, i)
        traces.append(tr)
        try:
            t2 = detect_onset(tr.force_t, tr.force, force_d)
            t1 = detect_onset(tr.vision_t, tr.vision_r, vision_d) + b.processing_delay
        except NoOnset as exc:
            log.warning("trial %d has no onset: %s", i, exc)
            failed.append(i)
            continue
        periods.append((t1, t2))
        ids.append(i)
    if failed:
        if len(failed) >= 0.1 * n:
            raise BenchmarkError(f"{len(failed)} of {n} trials had no onset")
        log.warning("excluded %d failed trial(s): %s", len(failed), failed)
    art = float(np.mean([abs(t2 - t1) for t1, t2 in periods]))
    return LatencyReport(periods, art, len(periods), b.processing_delay, scenario.seed, scenario.hash,
                         failed, traces, ids)


def _normalize(values) -> list[float]:
    peak = max(values) if values else 0.0
    return [v / peak if peak > 0 else 0.0 for v in values]


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_report(report: LatencyReport, out_dir) -> list[Path]:
    """Write summary.json plus force, vision and polar CSV traces."""
    out = Path(out_dir)
    written = []

    def open_out(name):
        path = out / name
        try:
            return path, open(path, "w", newline="")
        except OSError as exc:
            raise ReportError(f"{path}: {exc.strerror}") from exc

    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"{out}: {exc.strerror}") from exc

    path, fh = open_out("summary.json")
    with fh:
        json.dump(report.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(path)

    path, fh = open_out("force_trace.csv")
    with fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "t", "fz", "fz_norm"])
        for tr in report.traces:
            for t, f, fn in zip(tr.force_t, tr.force, _normalize(tr.force)):
                w.writerow([tr.index, _fmt(t), _fmt(f), _fmt(fn)])
    written.append(path)

    path, fh = open_out("vision_trace.csv")
    with fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "t", "r", "r_norm"])
        for tr in report.traces:
            for t, r, rn in zip(tr.vision_t, tr.vision_r, _normalize(tr.vision_r)):
                w.writerow([tr.index, _fmt(t), _fmt(r), _fmt(rn)])
    written.append(path)

    path, fh = open_out("polar.csv")
    with fh:
        write_polar_csv(fh, [(tr.index, t, th, r) for tr in report.traces
                             for t, th, r in zip(tr.vision_t, tr.vision_theta, tr.vision_r)])
    written.append(path)
    return written


def write_polar_csv(fh, rows):
    """Rows of (trial_or_label, t, theta_deg, r_px)."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["trial", "t", "theta", "r"])
    for label, t, theta, r in rows:
        w.writerow([label, _fmt(t), _fmt(theta), _fmt(r)])

