"""Scenario files: TOML tables describing rig, physics, controller, object,
disturbances and latency-bench settings."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import tomli

from .collision import CollisionThreshold
from .control import ControllerConfig
from .geometry import GripperRig, Transform
from .imaging import CameraModel
from .sim import ComplianceModel, DisturbanceEvent, FingerState, Physics, SimObject, WorldState

SEED_ENV = "GRIPSENSE_SEED"


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class BenchSettings:
    trials: int = 20
    speed: float = 500.0  # mm/s toward the contact plane
    approach: tuple[float, float] = (5.0, 30.0)  # mm, start height above the plane
    penetration: float = 3.0  # mm, robot stops here
    hold: float = 0.1  # s in contact before retreating
    processing_delay: float = 0.0  # s added to every vision onset
    phase_lock: bool = False  # put contact exactly on a camera tick
    ft_noise_fraction: float = 0.005  # of the nominal peak force
    onset_fraction: float = 0.6

    def __post_init__(self):
        if self.trials < 1:
            raise ScenarioError("bench.trials must be >= 1")
        lo, hi = self.approach
        if not 0 < lo <= hi:
            raise ScenarioError("bench.approach must satisfy 0 < min <= max")
        if self.speed <= 0 or self.penetration <= 0 or self.hold <= 0:
            raise ScenarioError("bench speed, penetration and hold must be positive")
        if self.processing_delay < 0:
            raise ScenarioError("bench.processing_delay must be non-negative")


@dataclass(frozen=True)
class ObjectSpec:
    x: float = 0.0
    y: float = 0.0
    radius: float = 40.0
    top_depth: float = 40.0  # mm below the grasp center at the start pose


@dataclass(frozen=True, eq=False)
class Scenario:
    seed: int = 0
    rig: GripperRig = field(default_factory=GripperRig)
    camera: CameraModel = field(default_factory=CameraModel)
    physics: Physics = field(default_factory=Physics)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    object: ObjectSpec | None = field(default_factory=ObjectSpec)
    disturbances: tuple[DisturbanceEvent, ...] = ()
    monitor_duration: float = 1.0
    bench: BenchSettings = field(default_factory=BenchSettings)
    source: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        blob = json.dumps(self.source, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def initial_world(self) -> WorldState:
        obj = None
        if self.object is not None:
            start_z = self.rig.t_a_c.translation[2]
            o = self.object
            obj = SimObject((o.x, o.y, start_z - o.top_depth), o.radius)
        return WorldState(object=obj, rng_seed=self.seed, physics=self.physics,
                          finger_state=FingerState.OPEN)

    def with_seed(self, seed: int) -> Scenario:
        return replace(self, seed=seed)


def _pick(table: dict, cls, keys):
    out = {}
    for k in keys:
        if k in table:
            out[k] = table[k]
    unknown = set(table) - set(keys)
    if unknown:
        raise ScenarioError(f"unknown keys for {cls.__name__}: {sorted(unknown)}")
    return out


def _rig(table: dict) -> GripperRig:
    t = dict(table)
    kwargs = {}
    yaw = t.pop("camera_yaw", 0.0)
    offset = t.pop("grasp_offset", 120.0)
    center = t.pop("pixel_center_offset", [0.0, 0.0])
    kwargs["t_a_b"] = Transform.rot_z(float(yaw))
    kwargs["t_b_pixel"] = Transform.from_translation(0.0, 0.0, -float(offset))
    kwargs["t_pixel_center"] = Transform.from_translation(float(center[0]), float(center[1]), 0.0)
    kwargs.update(_pick(t, GripperRig, ["pixel_scale", "fingertip_spacing", "finger_tilt", "marker_offset",
                                        "closed_tip_radius", "marker_side", "distortion_k"]))
    return GripperRig(**kwargs)


def _physics(table: dict) -> Physics:
    t = dict(table)
    comp = {}
    for k in ("gain", "contact_weights"):
        if k in t:
            v = t.pop(k)
            comp[k] = tuple(v) if isinstance(v, list) else v
    kwargs = _pick(t, Physics, ["stiffness", "ft_noise", "move_speed", "actuation_time"])
    return Physics(compliance=ComplianceModel(**comp), **kwargs)


def _controller(table: dict) -> ControllerConfig:
    t = dict(table)
    kwargs = {}
    if "threshold" in t:
        kwargs["threshold"] = CollisionThreshold(float(t.pop("threshold")))
    if "hough_band" in t:
        kwargs["hough_band"] = tuple(int(x) for x in t.pop("hough_band"))
    kwargs.update(_pick(t, ControllerConfig, ["z_step", "z_g", "align_tol", "dodge_gain", "dodge_deadband",
                                              "max_descend"]))
    return ControllerConfig(**kwargs)


def _disturbance(entry: dict, compliance: ComplianceModel) -> DisturbanceEvent:
    e = dict(entry)
    target = e.pop("target")
    inward = e.pop("inward", False)
    if inward:
        if target == "object":
            raise ScenarioError("inward pokes apply to fingers only")
        e["direction"] = (compliance.finger_polar[int(target) - 1] + 180.0) % 360.0
    kwargs = _pick(e, DisturbanceEvent, ["direction", "magnitude", "start", "duration", "contact_height"])
    if "direction" not in kwargs:
        raise ScenarioError("disturbance needs a direction (or inward = true)")
    return DisturbanceEvent(target if target == "object" else int(target), **kwargs)


def _bench(table: dict) -> BenchSettings:
    t = dict(table)
    kwargs = {}
    if "approach_min" in t or "approach_max" in t:
        kwargs["approach"] = (float(t.pop("approach_min", 5.0)), float(t.pop("approach_max", 30.0)))
    kwargs.update(_pick(t, BenchSettings, ["trials", "speed", "penetration", "hold", "processing_delay",
                                           "phase_lock", "ft_noise_fraction", "onset_fraction"]))
    return BenchSettings(**kwargs)


def scenario_from_dict(data: dict) -> Scenario:
    known = {"seed", "rig", "camera", "physics", "controller", "object", "disturbance", "monitor", "bench"}
    unknown = set(data) - known
    if unknown:
        raise ScenarioError(f"unknown scenario tables: {sorted(unknown)}")
    try:
        physics = _physics(data.get("physics", {}))
        obj_table = data.get("object", {})
        obj = None if obj_table.get("absent", False) else ObjectSpec(**{k: float(v) for k, v in obj_table.items()})
        return Scenario(
            seed=int(data.get("seed", 0)),
            rig=_rig(data.get("rig", {})),
            camera=CameraModel(**_pick(data.get("camera", {}), CameraModel,
                                       ["background", "object", "rim", "marker", "rim_width", "noise_sigma"])),
            physics=physics,
            controller=_controller(data.get("controller", {})),
            object=obj,
            disturbances=tuple(_disturbance(d, physics.compliance) for d in data.get("disturbance", [])),
            monitor_duration=float(data.get("monitor", {}).get("duration", 1.0)),
            bench=_bench(data.get("bench", {})),
            source=data,
        )
    except ScenarioError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ScenarioError(str(exc)) from exc


def load_scenario(path, env: dict | None = None) -> Scenario:
    """Read a scenario file; ``GRIPSENSE_SEED`` in ``env`` overrides its seed."""
    env = os.environ if env is None else env
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    scenario = scenario_from_dict(data)
    if env.get(SEED_ENV):
        try:
            scenario = scenario.with_seed(int(env[SEED_ENV]))
        except ValueError as exc:
            raise ScenarioError(f"{SEED_ENV} must be an integer") from exc
    return scenario
