"""Synthetic eye-in-palm camera.

Renders the circular object and the three fingertip markers into an 800x600
grayscale frame.  Markers are anti-aliased squares (exact area coverage) with
a point-symmetric corner-notch pattern carrying the id, so the notches never
move the intensity centroid.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .collision import MARKER_IDS
from .geometry import FRAME_CENTER, FRAME_HEIGHT, FRAME_WIDTH, GripperRig, PixelPoint, base_to_center
from .sim import CAMERA_RATE, WorldState, marker_positions, object_displacement

FRAME_PERIOD = 1.0 / CAMERA_RATE
NOTCH = 2  # px

# corner notch sets, each symmetric under a half-turn about the marker center
NOTCH_PATTERNS = {
    1: frozenset({"tl", "br"}),
    2: frozenset({"tr", "bl"}),
    3: frozenset({"tl", "tr", "bl", "br"}),
}


@dataclass(frozen=True)
class CameraModel:
    background: int = 32
    object: int = 96
    rim: int = 192
    marker: int = 255
    rim_width: float = 2.0
    noise_sigma: float = 0.0


@dataclass(frozen=True, eq=False)
class FrameBuffer:
    pixels: np.ndarray  # (height, width) uint8, row-major
    timestamp: float = 0.0
    hidden_markers: tuple[int, ...] = ()

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.uint8)
        if px.shape != (FRAME_HEIGHT, FRAME_WIDTH):
            raise ValueError(f"frame must be {FRAME_HEIGHT}x{FRAME_WIDTH}, got {px.shape}")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass
class CameraClock:
    """20 fps capture schedule; instants are integer multiples of 1/20 s."""

    rate: int = CAMERA_RATE
    next_index: int = 0

    @property
    def next_capture(self) -> float:
        return self.next_index / self.rate

    def due(self, now: float) -> bool:
        return now >= self.next_capture - 1e-9


def distort(u: float, v: float, k: float) -> tuple[float, float]:
    """Single-term radial distortion about the frame center."""
    du, dv = u - FRAME_CENTER[0], v - FRAME_CENTER[1]
    s = 1.0 + k * (du * du + dv * dv)
    return FRAME_CENTER[0] + du * s, FRAME_CENTER[1] + dv * s


def undistort(u: float, v: float, k: float, iterations: int = 8) -> tuple[float, float]:
    """Invert ``distort`` by fixed-point iteration on the radius."""
    du, dv = u - FRAME_CENTER[0], v - FRAME_CENTER[1]
    rd = math.hypot(du, dv)
    if rd == 0 or k == 0:
        return u, v
    r = rd
    for _ in range(iterations):
        r = rd / (1.0 + k * r * r)
    s = r / rd
    return FRAME_CENTER[0] + du * s, FRAME_CENTER[1] + dv * s


def _coverage_1d(lo: float, hi: float, idx: np.ndarray) -> np.ndarray:
    # pixel i spans [i - 0.5, i + 0.5]
    return np.clip(np.minimum(hi, idx + 0.5) - np.maximum(lo, idx - 0.5), 0.0, 1.0)


def _box_coverage(u0, u1, v0, v1, us, vs) -> np.ndarray:
    return np.outer(_coverage_1d(v0, v1, vs), _coverage_1d(u0, u1, us))


def marker_coverage(center: PixelPoint, side: float, marker_id: int, us, vs) -> np.ndarray:
    """Fractional area of each pixel covered by a notched marker square."""
    h = side / 2.0
    u0, u1, v0, v1 = center.u - h, center.u + h, center.v - h, center.v + h
    cov = _box_coverage(u0, u1, v0, v1, us, vs)
    corners = {
        "tl": (u0, v0), "tr": (u1 - NOTCH, v0),
        "bl": (u0, v1 - NOTCH), "br": (u1 - NOTCH, v1 - NOTCH),
    }
    for name in NOTCH_PATTERNS[marker_id]:
        cu, cv = corners[name]
        cov -= _box_coverage(cu, cu + NOTCH, cv, cv + NOTCH, us, vs)
    return np.clip(cov, 0.0, 1.0)


def object_pixel_geometry(world: WorldState, rig: GripperRig):
    """Projected (center, radius) of the object in pixels, or None."""
    obj = world.object
    if obj is None:
        return None
    t = base_to_center(world.gripper_pose, rig).inverse()
    local = t.apply(np.array(obj.center, dtype=float))
    u = FRAME_CENTER[0] + local[0] / rig.pixel_scale
    v = FRAME_CENTER[1] + local[1] / rig.pixel_scale
    if obj.attached:
        dy, dx = object_displacement(world)
        u, v = u + dx, v + dy
    u, v = distort(u, v, rig.distortion_k)
    return PixelPoint(u, v), obj.radius / rig.pixel_scale


def projected_markers(world: WorldState, rig: GripperRig) -> dict[int, PixelPoint]:
    """Distorted marker centers keyed by id (before visibility checks)."""
    rows = marker_positions(world, rig).rows
    out = {}
    for mid, (y, x) in zip(MARKER_IDS, rows):
        u, v = distort(x, y, rig.distortion_k)
        out[mid] = PixelPoint(u, v)
    return out


def contact_in_view(event, world: WorldState, rig: GripperRig) -> bool:
    """Whether the camera sees the point where an object push lands.

    The push lands on the rim opposite its direction.  The camera looks down
    the tool axis, so a contact below the object's top face is hidden by it.
    """
    if event.target != "object" or world.object is None:
        return True
    if event.contact_height < 0:
        return False
    geom = object_pixel_geometry(world, rig)
    a = math.radians(event.direction + 180.0)
    u = geom[0].u + geom[1] * math.sin(a)
    v = geom[0].v + geom[1] * math.cos(a)
    return PixelPoint(u, v).in_frame()


def draw_disk(img: np.ndarray, center: PixelPoint, radius: float, camera: CameraModel):
    r0, r1 = max(int(math.floor(center.v - radius)), 0), min(int(math.ceil(center.v + radius)) + 1, img.shape[0])
    c0, c1 = max(int(math.floor(center.u - radius)), 0), min(int(math.ceil(center.u + radius)) + 1, img.shape[1])
    if r0 >= r1 or c0 >= c1:
        return
    vs, us = np.mgrid[r0:r1, c0:c1]
    d = np.hypot(us - center.u, vs - center.v)
    patch = img[r0:r1, c0:c1]
    patch[d <= radius] = camera.object
    patch[(d <= radius) & (d > radius - camera.rim_width)] = camera.rim


def draw_marker(img: np.ndarray, center: PixelPoint, side: float, marker_id: int, value: float):
    h = side / 2.0 + 1
    c0, c1 = max(int(math.floor(center.u - h)), 0), min(int(math.ceil(center.u + h)) + 1, img.shape[1])
    r0, r1 = max(int(math.floor(center.v - h)), 0), min(int(math.ceil(center.v + h)) + 1, img.shape[0])
    cov = marker_coverage(center, side, marker_id, np.arange(c0, c1), np.arange(r0, r1))
    patch = img[r0:r1, c0:c1]
    img[r0:r1, c0:c1] = patch * (1.0 - cov) + value * cov


def render(world: WorldState, rig: GripperRig, camera: CameraModel | None = None) -> FrameBuffer:
    """Deterministic frame of the current world; hidden markers are listed, not drawn."""
    camera = camera or CameraModel()
    img = np.full((FRAME_HEIGHT, FRAME_WIDTH), float(camera.background))
    geom = object_pixel_geometry(world, rig)
    if geom is not None:
        draw_disk(img, geom[0], geom[1], camera)
    hidden = []
    h = rig.marker_side / 2.0
    for mid, c in projected_markers(world, rig).items():
        inside = h <= c.u <= FRAME_WIDTH - 1 - h and h <= c.v <= FRAME_HEIGHT - 1 - h
        if mid in world.occluded or not inside:
            hidden.append(mid)
            continue
        draw_marker(img, c, rig.marker_side, mid, camera.marker)
    if camera.noise_sigma > 0:
        rng = np.random.default_rng([world.rng_seed, world.tick, 0xCA])
        img += rng.normal(0.0, camera.noise_sigma, img.shape)
    pixels = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return FrameBuffer(pixels, world.clock, tuple(hidden))


def capture_if_due(clock: CameraClock, now: float, world: WorldState, rig: GripperRig,
                   camera: CameraModel | None = None) -> FrameBuffer | None:
    """Render a frame when ``now`` has reached the next capture instant."""
    if now < 0:
        raise ValueError("capture time must be non-negative")
    if not clock.due(now):
        return None
    frame = render(world, rig, camera)
    stamped = FrameBuffer(frame.pixels, clock.next_capture, frame.hidden_markers)
    clock.next_index += 1
    return stamped


def write_pgm(frame: FrameBuffer, path) -> Path:
    path = Path(path)
    header = f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii")
    path.write_bytes(header + frame.pixels.tobytes())
    return path


def read_pgm(path, timestamp: float = 0.0) -> FrameBuffer:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    # magic, width, height, maxval; '#' comments allowed between tokens
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end].decode("ascii"))
        pos = end
    if tokens[0] != "P5":
        raise ValueError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    width, height, maxval = map(int, tokens[1:])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM supported")
    pixels = np.frombuffer(data[pos + 1:pos + 1 + width * height], dtype=np.uint8)
    return FrameBuffer(pixels.reshape(height, width), timestamp)


def dump_frame(frame: FrameBuffer, directory) -> Path:
    os.makedirs(directory, exist_ok=True)
    ms = int(round(frame.timestamp * 1000))
    return write_pgm(frame, Path(directory) / f"frame_{ms:08d}.pgm")
