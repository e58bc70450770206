"""Position matrices, the collision-vector encoder and the collision monitor."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MARKER_IDS = (1, 2, 3)
DEFAULT_THRESHOLD = 6.0  # px


class IncompleteObservation(ValueError):
    """A position matrix is missing one or more marker rows."""


class MarkerLoss(RuntimeError):
    """Markers stayed unobserved for too many consecutive frames."""


@dataclass(frozen=True, eq=False)
class PositionMatrix:
    """Pixel positions of the three fingertip markers, one (y, x) row per id."""

    rows: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.shape != (3, 2):
            raise IncompleteObservation(f"expected 3x2 marker rows, got shape {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise IncompleteObservation("position matrix has missing (non-finite) rows")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_observations(cls, observations, timestamp: float | None = None) -> PositionMatrix:
        """Build from marker observations (anything with ``id`` and ``centroid``)."""
        by_id = {}
        for obs in observations:
            by_id[obs.id] = (obs.centroid.v, obs.centroid.u)
        missing = [i for i in MARKER_IDS if i not in by_id]
        if missing:
            raise IncompleteObservation(f"markers {missing} not observed")
        if timestamp is None:
            stamps = [getattr(o, "frame_timestamp", 0.0) for o in observations]
            timestamp = max(stamps) if stamps else 0.0
        return cls(np.array([by_id[i] for i in MARKER_IDS]), timestamp)


@dataclass(frozen=True)
class CollisionThreshold:
    value: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError("collision threshold must be strictly positive")


@dataclass(frozen=True)
class CollisionVector:
    dy: float
    dx: float
    r: float
    theta: float  # degrees in [0, 360)
    timestamp: float = 0.0

    @classmethod
    def from_components(cls, dy: float, dx: float, timestamp: float = 0.0) -> CollisionVector:
        r, theta = to_polar(dy, dx)
        return cls(float(dy), float(dx), r, theta, timestamp)

    def to_event(self, threshold: CollisionThreshold | None = None) -> dict:
        th = threshold or CollisionThreshold()
        return {
            "t": round(self.timestamp, 6),
            "dy": self.dy,
            "dx": self.dx,
            "r": self.r,
            "theta": self.theta,
            "collision": is_collision(self, th),
        }


def canonical_angle(dy: float, dx: float) -> float:
    """Direction of (dy, dx) in degrees: 0 along +dy, increasing toward +dx."""
    if dy == 0 and dx == 0:
        return 0.0
    theta = math.degrees(math.atan2(dx, dy)) % 360.0
    # -tiny % 360 rounds to 360.0
    return 0.0 if theta >= 360.0 else theta


def to_polar(dy: float, dx: float) -> tuple[float, float]:
    r = math.hypot(dy, dx)
    if r <= 1e-9:
        return r, 0.0
    return r, canonical_angle(dy, dx)


def encode(reference: PositionMatrix, current: PositionMatrix) -> CollisionVector:
    """Sum of per-marker displacements from the reference matrix."""
    for m in (reference, current):
        if not isinstance(m, PositionMatrix):
            raise IncompleteObservation("encode needs complete position matrices")
    dy, dx = (current.rows - reference.rows).sum(axis=0)
    return CollisionVector.from_components(float(dy), float(dx), current.timestamp)


def is_collision(c: CollisionVector, th: CollisionThreshold) -> bool:
    return c.r >= th.value


def angle_diff(a: float, b: float) -> float:
    """Smallest absolute difference between two angles in degrees."""
    d = (a - b) % 360.0
    return min(d, 360.0 - d)


class CollisionMonitor:
    """Holds the latched reference and the latest collision vector.

    Written by the frame consumer only, read by the controller.  An incomplete
    frame keeps the previous vector; ``max_incomplete`` consecutive incomplete
    frames raise ``MarkerLoss``.
    """

    def __init__(self, threshold: CollisionThreshold | None = None, max_incomplete: int = 3):
        self.threshold = threshold or CollisionThreshold()
        self.max_incomplete = max_incomplete
        self.reference: PositionMatrix | None = None
        self.latest: CollisionVector | None = None
        self.incomplete = 0

    def latch(self, reference: PositionMatrix):
        self.reference = reference
        self.latest = CollisionVector(0.0, 0.0, 0.0, 0.0, reference.timestamp)
        self.incomplete = 0

    def update(self, observations, timestamp: float) -> CollisionVector | None:
        try:
            current = PositionMatrix.from_observations(observations, timestamp)
        except IncompleteObservation:
            self.incomplete += 1
            if self.incomplete >= self.max_incomplete:
                raise MarkerLoss(f"{self.incomplete} consecutive incomplete frames at t={timestamp:.3f}s")
            return self.latest
        self.incomplete = 0
        if self.reference is None:
            self.latch(current)
        self.latest = encode(self.reference, current)
        return self.latest

    def snapshot(self) -> CollisionVector | None:
        return self.latest

    def colliding(self) -> bool:
        return self.latest is not None and is_collision(self.latest, self.threshold)
