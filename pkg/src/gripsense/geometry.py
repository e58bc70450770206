"""Rigid transforms and the gripper frame chain.

Frames: robot base, end-effector (a), camera (b), grasp center (c), plus the
two image-plane frames (pixel, center).  The image-plane frames are carried
as 3D transforms whose z lies on the grasp plane, so one ``Transform`` type
serves the whole chain.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

ORTHO_TOL = 1e-9

FRAME_WIDTH = 800
FRAME_HEIGHT = 600
FRAME_CENTER = (FRAME_WIDTH / 2, FRAME_HEIGHT / 2)


class FrameId(enum.Enum):
    BASE = "base"
    END_EFFECTOR = "a"
    CAMERA = "b"
    GRASP_CENTER = "c"
    PIXEL = "pixel"
    CENTER = "center"

    @property
    def is_planar(self) -> bool:
        return self in (FrameId.PIXEL, FrameId.CENTER)


@dataclass(frozen=True, eq=False)
class Transform:
    """Rotation (3x3 orthonormal) plus translation in millimeters."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rot = np.array(self.rotation, dtype=float).reshape(3, 3)
        trans = np.array(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(rot)) or not np.all(np.isfinite(trans)):
            raise ValueError("transform entries must be finite")
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > ORTHO_TOL:
            raise ValueError("rotation is not orthonormal")
        rot.setflags(write=False)
        trans.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @classmethod
    def identity(cls) -> Transform:
        return cls()

    @classmethod
    def from_translation(cls, x: float, y: float, z: float) -> Transform:
        return cls(np.eye(3), np.array([x, y, z], dtype=float))

    @classmethod
    def rot_z(cls, degrees: float) -> Transform:
        a = math.radians(degrees)
        c, s = math.cos(a), math.sin(a)
        return cls(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> Transform:
        m = np.asarray(m, dtype=float)
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> Transform:
        rt = self.rotation.T
        return Transform(rt, -rt @ self.translation)

    def apply(self, points) -> np.ndarray:
        """Map points (shape (3,) or (n, 3)) into the parent frame."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def __matmul__(self, other: Transform) -> Transform:
        return compose(self, other)

    def allclose(self, other: Transform, tol: float = ORTHO_TOL) -> bool:
        return bool(np.max(np.abs(self.matrix() - other.matrix())) <= tol)

    def __repr__(self):
        return f"Transform(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"


def compose(lhs: Transform, rhs: Transform) -> Transform:
    """Homogeneous product ``lhs @ rhs``."""
    return Transform(lhs.rotation @ rhs.rotation, lhs.rotation @ rhs.translation + lhs.translation)


@dataclass(frozen=True)
class PixelPoint:
    u: float
    v: float

    def in_frame(self, width: int = FRAME_WIDTH, height: int = FRAME_HEIGHT) -> bool:
        return 0 <= self.u < width and 0 <= self.v < height


@dataclass(frozen=True, eq=False)
class GripperRig:
    """Fixed structure of the gripper and its eye-in-palm camera.

    The default chain puts the camera coaxial with the end-effector z-axis and
    the grasp center 120 mm below the end-effector.  Image columns (u) follow
    +x of the grasp-center frame and rows (v) follow +y.
    """

    t_a_b: Transform = field(default_factory=Transform.identity)
    t_b_pixel: Transform = field(default_factory=lambda: Transform.from_translation(0.0, 0.0, -120.0))
    t_pixel_center: Transform = field(default_factory=Transform.identity)
    t_center_c: Transform = field(default_factory=Transform.identity)
    pixel_scale: float = 0.5  # mm per px at the grasp plane
    fingertip_spacing: float = 212.5  # mm, open fingertips
    finger_tilt: float = 30.0  # deg from vertical
    marker_offset: float = 3.5  # mm back from the fingertip
    closed_tip_radius: float = 20.0  # mm, fingertip ring radius when closed
    marker_side: int = 16  # px
    distortion_k: float = 1e-7  # px^-2

    def __post_init__(self):
        if not math.isfinite(self.pixel_scale) or self.pixel_scale <= 0:
            raise ValueError("pixel_scale must be finite and positive")
        if self.marker_side < 8:
            raise ValueError("marker_side must be at least 8 px")

    @property
    def t_a_c(self) -> Transform:
        return self.t_a_b @ self.t_b_pixel @ self.t_pixel_center @ self.t_center_c

    @property
    def open_tip_radius(self) -> float:
        # circumradius of the equilateral fingertip triangle
        return self.fingertip_spacing / math.sqrt(3.0)

    def tip_radius(self, bend: float) -> float:
        """Fingertip ring radius (mm) for a bend fraction in [0, 1]."""
        return self.open_tip_radius + bend * (self.closed_tip_radius - self.open_tip_radius)

    def marker_radius_px(self, bend: float) -> float:
        offset = self.marker_offset * math.sin(math.radians(self.finger_tilt))
        return (self.tip_radius(bend) - offset) / self.pixel_scale


def base_to_center(t_base_a: Transform, rig: GripperRig) -> Transform:
    """Long-form chain base -> a -> b -> pixel -> center -> c."""
    t_base_b = t_base_a @ rig.t_a_b
    return t_base_b @ rig.t_b_pixel @ rig.t_pixel_center @ rig.t_center_c


def pixel_to_center(p: PixelPoint, scale: float) -> np.ndarray:
    """Millimeter offset of a pixel from the image center on the grasp plane."""
    if not math.isfinite(scale) or scale <= 0:
        raise ValueError(f"scale must be finite and positive, got {scale!r}")
    return np.array([(p.u - FRAME_CENTER[0]) * scale, (p.v - FRAME_CENTER[1]) * scale])


def center_to_pixel(xy, scale: float) -> PixelPoint:
    return PixelPoint(FRAME_CENTER[0] + xy[0] / scale, FRAME_CENTER[1] + xy[1] / scale)


def image_direction(theta_deg: float) -> np.ndarray:
    """Unit (x, y) vector in the grasp-center frame for an image polar angle.

    Angles are zero along +v (image rows) and grow toward +u (columns).
    """
    a = math.radians(theta_deg)
    return np.array([math.sin(a), math.cos(a)])


def center_direction_to_base(xy, t_base_a: Transform, rig: GripperRig) -> np.ndarray:
    """Rotate a planar grasp-center-frame vector into the base frame."""
    t = base_to_center(t_base_a, rig)
    return t.rotation @ np.array([xy[0], xy[1], 0.0])
