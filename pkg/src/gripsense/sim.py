"""Fixed-timestep world model for the gripper, its markers and the F/T channel.

One tick is 0.5 ms, locked to the 2000 Hz force channel; the 20 fps camera
fires on every 100th tick.  ``step`` is pure: it returns a new ``WorldState``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .collision import MARKER_IDS, PositionMatrix
from .geometry import FRAME_CENTER, GripperRig, Transform, base_to_center

DT = 0.0005  # s
FORCE_RATE = 2000  # Hz
CAMERA_RATE = 20  # fps
TICKS_PER_FRAME = FORCE_RATE // CAMERA_RATE


class FingerState(enum.Enum):
    OPEN = "open"
    CLOSED = "closed"


@dataclass(frozen=True)
class ComplianceModel:
    gain: float = 2.0  # px per force unit
    finger_polar: tuple[float, float, float] = (0.0, 120.0, 240.0)
    # outward splay per unit vertical contact load, one weight per finger;
    # unequal so a probe contact yields a non-zero marker sum
    contact_weights: tuple[float, float, float] = (1.0, 0.8, 0.6)

    def __post_init__(self):
        if not self.gain > 0:
            raise ValueError("compliance gain must be positive")

    @property
    def contact_factor(self) -> float:
        """|sum of weighted outward unit vectors|, i.e. px per (gain * force)."""
        v = sum(w * np.array([math.cos(math.radians(p)), math.sin(math.radians(p))])
                for w, p in zip(self.contact_weights, self.finger_polar))
        return float(np.hypot(*v))


@dataclass(frozen=True)
class Physics:
    stiffness: float = 10.0  # force units per mm of penetration
    compliance: ComplianceModel = field(default_factory=ComplianceModel)
    ft_noise: float = 0.0  # force units, 1-sigma
    move_speed: float = 500.0  # mm/s for commanded Cartesian moves
    actuation_time: float = 0.3  # s, open <-> closed ramp


@dataclass(frozen=True)
class SimObject:
    """Upright circular object; ``center`` is (x, y, top_z) in the base frame."""

    center: tuple[float, float, float]
    radius: float
    attached: bool = False

    @property
    def top_z(self) -> float:
        return self.center[2]


@dataclass(frozen=True)
class DisturbanceEvent:
    """Scripted push.  ``target`` is a finger id (1..3) or ``"object"``.

    ``direction`` is the image polar angle the push drives the markers toward
    (0 deg along +v, 90 deg along +u).  ``contact_height`` places the contact
    point along z relative to the grasp plane; it does not affect the markers.
    """

    target: int | str
    direction: float
    magnitude: float
    start: float
    duration: float
    contact_height: float = 0.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("disturbance duration must be positive")
        if self.magnitude < 0:
            raise ValueError("disturbance magnitude must be non-negative")
        if self.target != "object" and self.target not in MARKER_IDS:
            raise ValueError(f"unknown disturbance target {self.target!r}")

    def active(self, t: float) -> bool:
        # half-open window; the slack keeps tick-aligned edges exact in floating point
        return self.start - 1e-9 <= t < self.start + self.duration - 1e-9

    @classmethod
    def finger_poke(cls, finger: int, magnitude: float, start: float, duration: float,
                    compliance: ComplianceModel | None = None) -> DisturbanceEvent:
        """Inward push on one finger, toward the image center."""
        polar = (compliance or ComplianceModel()).finger_polar[finger - 1]
        return cls(finger, (polar + 180.0) % 360.0, magnitude, start, duration)


@dataclass(frozen=True, eq=False)
class WorldState:
    gripper_pose: Transform = field(default_factory=Transform.identity)
    finger_state: FingerState = FingerState.OPEN
    bend: float = 0.0
    object: SimObject | None = None
    plane_z: float | None = None  # infinite contact plane (latency bench)
    disturbances: tuple[DisturbanceEvent, ...] = ()
    tick: int = 0
    rng_seed: int = 0
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)  # mm/s
    move_target: tuple[float, float, float] | None = None
    occluded: frozenset = frozenset()
    physics: Physics = field(default_factory=Physics)

    @property
    def clock(self) -> float:
        return self.tick * DT

    @property
    def position(self) -> np.ndarray:
        return self.gripper_pose.translation

    @property
    def settled(self) -> bool:
        target = 1.0 if self.finger_state is FingerState.CLOSED else 0.0
        return self.bend == target and self.move_target is None

    def command_fingers(self, state: FingerState) -> WorldState:
        return replace(self, finger_state=state)

    def command_move(self, delta) -> WorldState:
        target = tuple(float(a + b) for a, b in zip(self.position, delta))
        return replace(self, move_target=target, velocity=(0.0, 0.0, 0.0))

    def command_velocity(self, v) -> WorldState:
        return replace(self, velocity=tuple(float(c) for c in v), move_target=None)


def _advance_position(world: WorldState, dt: float) -> tuple[np.ndarray, tuple | None]:
    pos = world.position.copy()
    if world.move_target is not None:
        target = np.array(world.move_target)
        gap = target - pos
        dist = float(np.linalg.norm(gap))
        reach = world.physics.move_speed * dt
        if dist <= reach + 1e-12:
            return target, None
        return pos + gap * (reach / dist), world.move_target
    return pos + np.array(world.velocity) * dt, None


def _advance_bend(world: WorldState, dt: float) -> float:
    target = 1.0 if world.finger_state is FingerState.CLOSED else 0.0
    rate = dt / world.physics.actuation_time
    if abs(target - world.bend) <= rate + 1e-12:
        return target
    return world.bend + math.copysign(rate, target - world.bend)


def step(world: WorldState, dt: float = DT) -> WorldState:
    """Advance the world by one 0.5 ms tick."""
    if abs(dt - DT) > 1e-15:
        raise ValueError(f"step only supports the global tick dt={DT}")
    new_pos, target = _advance_position(world, dt)
    shift = new_pos - world.position
    obj = world.object
    if obj is not None and obj.attached:
        obj = replace(obj, center=tuple(float(c) for c in np.array(obj.center) + shift))
    pose = Transform(world.gripper_pose.rotation, new_pos)
    return replace(world, gripper_pose=pose, move_target=target, object=obj,
                   bend=_advance_bend(world, dt), tick=world.tick + 1)


def run_until(world: WorldState, predicate, max_ticks: int = 10**6) -> WorldState:
    for _ in range(max_ticks):
        if predicate(world):
            return world
        world = step(world)
    raise RuntimeError("simulation did not reach the requested condition")


def grasp_center(world: WorldState, rig: GripperRig) -> np.ndarray:
    return base_to_center(world.gripper_pose, rig).translation


def penetration(world: WorldState, rig: GripperRig) -> float:
    """Depth (mm) by which the fingertips are pressed into a contact surface."""
    c = grasp_center(world, rig)
    depth = 0.0
    if world.plane_z is not None:
        depth = max(depth, world.plane_z - c[2])
    obj = world.object
    if obj is not None and not obj.attached:
        horizontal = math.hypot(c[0] - obj.center[0], c[1] - obj.center[1])
        # open fingertips straddle the object; closed ones land on its top
        if horizontal <= obj.radius and rig.tip_radius(world.bend) <= obj.radius:
            depth = max(depth, obj.top_z - c[2])
    return max(depth, 0.0)


def contact_force(world: WorldState, rig: GripperRig) -> float:
    return world.physics.stiffness * penetration(world, rig)


def marker_rest_positions(world: WorldState, rig: GripperRig) -> PositionMatrix:
    """Undisturbed marker pixels: fingers 1/2/3 at polar 0/120/240 deg."""
    radius = rig.marker_radius_px(world.bend)
    rows = []
    for polar in world.physics.compliance.finger_polar:
        a = math.radians(polar)
        rows.append((FRAME_CENTER[1] + radius * math.cos(a), FRAME_CENTER[0] + radius * math.sin(a)))
    return PositionMatrix(np.array(rows), world.clock)


def _polar_vec(deg: float) -> np.ndarray:
    a = math.radians(deg)
    return np.array([math.cos(a), math.sin(a)])  # (dy, dx)


def marker_displacements(world: WorldState, rig: GripperRig) -> np.ndarray:
    """Per-marker (dy, dx) pixel displacement from the compliance model."""
    comp = world.physics.compliance
    disp = np.zeros((3, 2))
    t = world.clock
    for ev in world.disturbances:
        if not ev.active(t):
            continue
        push = comp.gain * ev.magnitude * _polar_vec(ev.direction)
        if ev.target == "object":
            disp += push / 3.0
        else:
            disp[ev.target - 1] += push
    force = contact_force(world, rig)
    if force > 0:
        for i, (w, polar) in enumerate(zip(comp.contact_weights, comp.finger_polar)):
            disp[i] += comp.gain * force * w * _polar_vec(polar)
    return disp


def object_displacement(world: WorldState) -> np.ndarray:
    """(dy, dx) pixel shift of a grasped object under active object pushes."""
    comp = world.physics.compliance
    disp = np.zeros(2)
    for ev in world.disturbances:
        if ev.target == "object" and ev.active(world.clock):
            disp += comp.gain * ev.magnitude * _polar_vec(ev.direction) / 3.0
    return disp


def marker_positions(world: WorldState, rig: GripperRig) -> PositionMatrix:
    rest = marker_rest_positions(world, rig)
    return PositionMatrix(rest.rows + marker_displacements(world, rig), world.clock)


@dataclass(frozen=True)
class ForceSample:
    t: float
    fz: float


def ft_sample(world: WorldState, rig: GripperRig) -> ForceSample:
    fz = contact_force(world, rig)
    sigma = world.physics.ft_noise
    if sigma > 0:
        rng = np.random.default_rng([world.rng_seed, world.tick, 0xF7])
        fz += float(rng.normal(0.0, sigma))
    return ForceSample(world.clock, fz)


def ft_channel(world: WorldState, rig: GripperRig, ticks: int):
    """Yield ``(world, sample)`` for ``ticks`` consecutive ticks, stepping the world."""
    for _ in range(ticks):
        yield world, ft_sample(world, rig)
        world = step(world)


def is_camera_tick(tick: int) -> bool:
    return tick % TICKS_PER_FRAME == 0
