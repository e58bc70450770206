"""Depth-free grasping state machine and the post-grasp dodge controller."""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .collision import (CollisionMonitor, CollisionThreshold, CollisionVector, IncompleteObservation,
                        MarkerLoss, PositionMatrix, is_collision)
from .detect import DEFAULT_BAND, CircleDetection, NoCircle, extract_marker_centers, hough_circles, polygon_center
from .geometry import FRAME_CENTER, GripperRig, PixelPoint, Transform, center_direction_to_base, image_direction, pixel_to_center
from .imaging import CameraClock, CameraModel, FrameBuffer, capture_if_due, undistort
from .sim import DT, FingerState, WorldState, grasp_center, step

log = logging.getLogger(__name__)

MAX_MOVE = 50.0  # mm per Cartesian command


class GraspPhase(enum.Enum):
    INIT = "Init"
    ALIGN = "Align"
    CLOSE_FOR_PROBE = "CloseForProbe"
    DESCEND = "Descend"
    PRE_GRASP_UP = "PreGraspUp"
    OPEN_AT_PRE_GRASP = "OpenAtPreGrasp"
    DESCEND_TO_GRASP = "DescendToGrasp"
    CLOSE_TO_GRASP = "CloseToGrasp"
    LIFT = "Lift"
    DONE = "Done"
    FAULT = "Fault"


PHASE_ORDER = [p for p in GraspPhase if p is not GraspPhase.FAULT]


class GraspFault(RuntimeError):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


@dataclass(frozen=True)
class ControllerConfig:
    threshold: CollisionThreshold = field(default_factory=CollisionThreshold)
    z_step: float = 5.0  # mm per descend iteration
    z_g: float = 30.0  # mm pre-grasp clearance
    align_tol: float = 1.0  # px
    dodge_gain: float = 1.0  # mm per px
    dodge_deadband: float = 3.0  # px
    max_descend: float = 300.0  # mm
    hough_band: tuple[int, int] = DEFAULT_BAND

    def __post_init__(self):
        for name in ("z_step", "z_g", "align_tol", "dodge_gain", "dodge_deadband", "max_descend"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.align_tol < 1:
            raise ValueError("align_tol must be at least 1 px")


@dataclass(frozen=True, eq=False)
class CartesianMove:
    delta: np.ndarray  # mm, base frame

    def __post_init__(self):
        d = np.array(self.delta, dtype=float).reshape(3)
        if not np.all(np.isfinite(d)):
            raise ValueError("move must be finite")
        if np.linalg.norm(d) > MAX_MOVE + 1e-9:
            raise ValueError(f"move of {np.linalg.norm(d):.2f} mm exceeds the {MAX_MOVE} mm clamp")
        d.setflags(write=False)
        object.__setattr__(self, "delta", d)

    @classmethod
    def clamped(cls, delta) -> CartesianMove:
        d = np.asarray(delta, dtype=float)
        n = float(np.linalg.norm(d))
        return cls(d * (MAX_MOVE / n) if n > MAX_MOVE else d)

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.delta))


def split_move(delta) -> list[CartesianMove]:
    """Break a long displacement into commands within the safety clamp."""
    d = np.asarray(delta, dtype=float)
    n = float(np.linalg.norm(d))
    k = max(1, math.ceil(n / MAX_MOVE - 1e-12))
    return [CartesianMove(d / k) for _ in range(k)]


def align(detection: CircleDetection, rig: GripperRig, config: ControllerConfig | None = None,
          t_base_a: Transform | None = None) -> CartesianMove:
    """Horizontal move that brings the detected object under the grasp center."""
    config = config or ControllerConfig()
    c = polygon_center(detection)
    if math.hypot(c.u - FRAME_CENTER[0], c.v - FRAME_CENTER[1]) <= config.align_tol:
        return CartesianMove(np.zeros(3))
    u, v = undistort(c.u, c.v, rig.distortion_k)
    xy = pixel_to_center(PixelPoint(u, v), rig.pixel_scale)
    return CartesianMove(center_direction_to_base(xy, t_base_a or Transform.identity(), rig))


def dodge(c: CollisionVector, config: ControllerConfig, rig: GripperRig,
          t_base_a: Transform | None = None) -> CartesianMove:
    """Escape move along the collision direction, proportional to its size."""
    if c.r < config.dodge_deadband:
        return CartesianMove(np.zeros(3))
    magnitude = min(config.dodge_gain * c.r, MAX_MOVE)
    direction = center_direction_to_base(image_direction(c.theta), t_base_a or Transform.identity(), rig)
    return CartesianMove(magnitude * direction)


class GripperSession:
    """Drives the simulated gripper tick by tick and consumes camera frames.

    Frames are processed only while the robot and fingers are at rest, so
    commanded self-motion is never read as a collision.
    """

    def __init__(self, world: WorldState, rig: GripperRig, config: ControllerConfig | None = None,
                 camera: CameraModel | None = None, frame_sink=None):
        self.world = world
        self.rig = rig
        self.config = config or ControllerConfig()
        self.camera = camera or CameraModel()
        self.clock = CameraClock(next_index=-(-world.tick // 100))
        self.monitor = CollisionMonitor(self.config.threshold)
        self.frame_sink = frame_sink
        self.events: list[dict] = []
        self.vectors: list[CollisionVector] = []

    @property
    def t(self) -> float:
        return self.world.clock

    def log(self, event: str, **fields):
        self.events.append({"event": event, "t": round(self.t, 6), **fields})

    def _tick(self) -> FrameBuffer | None:
        self.world = step(self.world)
        frame = capture_if_due(self.clock, self.world.clock, self.world, self.rig, self.camera)
        if frame is not None and self.frame_sink is not None:
            self.frame_sink(frame)
        return frame

    def next_frame(self) -> FrameBuffer:
        while True:
            frame = self._tick()
            if frame is not None:
                return frame

    def wait(self, seconds: float):
        for _ in range(int(round(seconds / DT))):
            self._tick()

    def move(self, delta):
        for mv in split_move(delta):
            if mv.magnitude == 0:
                continue
            self.log("move", delta=[float(x) for x in mv.delta])
            self.world = self.world.command_move(mv.delta)
            while self.world.move_target is not None:
                self._tick()

    def actuate(self, state: FingerState):
        self.log("gripper", state=state.value)
        self.world = self.world.command_fingers(state)
        while not self.world.settled:
            self._tick()

    def observe(self):
        frame = self.next_frame()
        observations, missing = extract_marker_centers(frame, self.rig.marker_side)
        return frame, observations, missing

    def latch(self):
        """Latch the reference position matrix from the next complete frame."""
        for _ in range(self.monitor.max_incomplete):
            frame, observations, _ = self.observe()
            try:
                reference = PositionMatrix.from_observations(observations, frame.timestamp)
            except IncompleteObservation:
                continue
            self.monitor.latch(reference)
            self.log("latch", rows=[[float(a) for a in row] for row in reference.rows])
            return reference
        raise MarkerLoss("could not latch a complete reference frame")

    def sense(self) -> CollisionVector:
        frame, observations, _ = self.observe()
        vec = self.monitor.update(observations, frame.timestamp)
        if vec is not None and vec.timestamp == frame.timestamp:
            self.vectors.append(vec)
            self.log("collision_vector", **{k: v for k, v in vec.to_event(self.config.threshold).items() if k != "t"})
        return vec


@dataclass
class GraspOutcome:
    phase: GraspPhase
    fault: str | None = None
    contact_depth: float | None = None  # mm descended when the collision fired
    descend_iterations: int = 0
    phases: list[tuple[float, GraspPhase]] = field(default_factory=list)
    moves: list[list[float]] = field(default_factory=list)
    collisions: list[CollisionVector] = field(default_factory=list)
    detection: CircleDetection | None = None
    z_history: list[float] = field(default_factory=list)  # grasp-center z after each move
    world: WorldState | None = None

    @property
    def ok(self) -> bool:
        return self.phase is GraspPhase.DONE


def run_grasp(world: WorldState, config: ControllerConfig | None = None, rig: GripperRig | None = None,
              session: GripperSession | None = None) -> GraspOutcome:
    """Observe, align, probe downward until contact, re-grasp and lift."""
    rig = rig or GripperRig()
    config = config or ControllerConfig()
    s = session or GripperSession(world, rig, config)
    out = GraspOutcome(GraspPhase.INIT)

    def enter(phase: GraspPhase):
        out.phase = phase
        out.phases.append((s.t, phase))
        s.log("phase", phase=phase.value)

    def move(delta):
        s.move(delta)
        out.moves.append([float(x) for x in delta])
        out.z_history.append(float(grasp_center(s.world, rig)[2]))

    try:
        enter(GraspPhase.INIT)
        s.actuate(FingerState.OPEN)

        enter(GraspPhase.ALIGN)
        frame = s.next_frame()
        try:
            detections = hough_circles(frame, *config.hough_band)
        except NoCircle as exc:
            raise GraspFault("NoCircle", str(exc)) from exc
        out.detection = detections[0]
        s.log("circle", u=detections[0].center.u, v=detections[0].center.v, radius=detections[0].radius,
              score=detections[0].accumulator_score)
        move(align(detections[0], rig, config, s.world.gripper_pose).delta)

        enter(GraspPhase.CLOSE_FOR_PROBE)
        s.actuate(FingerState.CLOSED)
        s.latch()

        enter(GraspPhase.DESCEND)
        descent = 0.0
        while True:
            if descent + config.z_step > config.max_descend + 1e-9:
                raise GraspFault("MaxDescent", f"no collision within {config.max_descend} mm")
            move((0.0, 0.0, -config.z_step))
            descent += config.z_step
            out.descend_iterations += 1
            vec = s.sense()
            if vec is not None and is_collision(vec, config.threshold):
                out.collisions.append(vec)
                break
        out.contact_depth = descent
        s.log("contact", depth=descent)

        enter(GraspPhase.PRE_GRASP_UP)
        move((0.0, 0.0, config.z_g))
        enter(GraspPhase.OPEN_AT_PRE_GRASP)
        s.actuate(FingerState.OPEN)
        enter(GraspPhase.DESCEND_TO_GRASP)
        move((0.0, 0.0, -config.z_g))
        enter(GraspPhase.CLOSE_TO_GRASP)
        s.world = _attach_if_enclosed(s.world, rig)
        s.actuate(FingerState.CLOSED)
        enter(GraspPhase.LIFT)
        move((0.0, 0.0, descent))
        enter(GraspPhase.DONE)
    except (GraspFault, MarkerLoss) as exc:
        out.fault = exc.reason if isinstance(exc, GraspFault) else "MarkerLoss"
        log.warning("grasp fault: %s", exc)
        enter(GraspPhase.FAULT)
        s.log("fault", reason=out.fault)
    out.world = s.world
    return out


def _attach_if_enclosed(world: WorldState, rig: GripperRig) -> WorldState:
    obj = world.object
    if obj is None:
        return world
    c = grasp_center(world, rig)
    inside = math.hypot(c[0] - obj.center[0], c[1] - obj.center[1]) <= obj.radius and c[2] <= obj.top_z
    if not inside:
        return world
    return replace(world, object=replace(obj, attached=True))


@dataclass
class DodgeRecord:
    vector: CollisionVector
    move: CartesianMove


def monitor_and_dodge(session: GripperSession, duration: float) -> list[DodgeRecord]:
    """Post-grasp monitoring: one dodge per collision event.

    An event ends once the collision vector falls below half the threshold;
    the reference is then re-latched and monitoring re-armed.
    """
    cfg = session.config
    end = session.t + duration
    session.latch()
    armed = True
    dodges = []
    while session.t < end - 1e-12:
        vec = session.sense()
        if vec is None:
            continue
        if armed and is_collision(vec, cfg.threshold):
            mv = dodge(vec, cfg, session.rig, session.world.gripper_pose)
            session.log("dodge", theta=vec.theta, r=vec.r, delta=[float(x) for x in mv.delta])
            dodges.append(DodgeRecord(vec, mv))
            session.move(mv.delta)
            armed = False
        elif not armed and vec.r < cfg.threshold.value / 2:
            session.latch()
            armed = True
    return dodges
