"""Marker centroid extraction and a gradient-voting Hough circle transform."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .collision import MARKER_IDS
from .geometry import PixelPoint
from .imaging import NOTCH_PATTERNS, FrameBuffer

MARKER_THRESHOLD = 200
MIN_MARKER_AREA = 16
EDGE_THRESHOLD = 128.0
VOTE_FRACTION = 0.4
BIN = 2  # px, both spatial and radial
DEFAULT_BAND = (40, 200)
REFINE_STEPS = 3

_EIGHT = np.ones((3, 3), dtype=bool)


class NoCircle(LookupError):
    """No accumulator bin reached the vote threshold."""


@dataclass(frozen=True)
class MissingMarker:
    id: int


@dataclass(frozen=True)
class MarkerObservation:
    id: int
    centroid: PixelPoint
    frame_timestamp: float = 0.0


@dataclass(frozen=True)
class CircleDetection:
    center: PixelPoint
    radius: float
    accumulator_score: int
    peak_bin: tuple[int, int, int] = (0, 0, 0)  # (r_bin, cy_bin, cx_bin)


def _bilinear(img: np.ndarray, u: float, v: float) -> float:
    h, w = img.shape
    u = min(max(u, 0.0), w - 1.0)
    v = min(max(v, 0.0), h - 1.0)
    u0, v0 = int(math.floor(u)), int(math.floor(v))
    u1, v1 = min(u0 + 1, w - 1), min(v0 + 1, h - 1)
    fu, fv = u - u0, v - v0
    top = img[v0, u0] * (1 - fu) + img[v0, u1] * fu
    bottom = img[v1, u0] * (1 - fu) + img[v1, u1] * fu
    return float(top * (1 - fv) + bottom * fv)


def read_marker_id(img: np.ndarray, center: PixelPoint, side: float, marker_level: float = 255.0) -> int | None:
    """Decode the corner-notch pattern around a marker centroid.

    A notch shows the scene underneath, and every non-marker intensity lies
    below the marker threshold, so the cut sits between that threshold and
    the marker level.  A cut tied to the local background fails when a
    marker straddles the object's bright rim.
    """
    inset = side / 2.0 - 1.0
    probes = {
        "tl": (center.u - inset, center.v - inset), "tr": (center.u + inset, center.v - inset),
        "bl": (center.u - inset, center.v + inset), "br": (center.u + inset, center.v + inset),
    }
    cut = MARKER_THRESHOLD + 0.25 * (marker_level - MARKER_THRESHOLD)
    notched = frozenset(k for k, (u, v) in probes.items() if _bilinear(img, u, v) < cut)
    for mid, pattern in NOTCH_PATTERNS.items():
        if pattern == notched:
            return mid
    return None


def extract_marker_centers(frame: FrameBuffer, side: float = 16) -> tuple[list[MarkerObservation], list[MissingMarker]]:
    """Sub-pixel marker centroids sorted by id, plus the ids that were not found.

    Components are 8-connected pixels at or above ``MARKER_THRESHOLD``.  The
    centroid weights each pixel of the one-pixel-dilated component by its
    intensity above the local background (median of the surrounding ring), so
    partially covered edge pixels count in proportion to their coverage.
    """
    img = frame.pixels.astype(float)
    labels, n = ndimage.label(frame.pixels >= MARKER_THRESHOLD, structure=_EIGHT)
    found: dict[int, tuple[float, MarkerObservation]] = {}
    for k, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        r0, r1 = max(sl[0].start - 3, 0), min(sl[0].stop + 3, img.shape[0])
        c0, c1 = max(sl[1].start - 3, 0), min(sl[1].stop + 3, img.shape[1])
        comp = labels[r0:r1, c0:c1] == k
        area = int(comp.sum())
        if area < MIN_MARKER_AREA:
            continue
        grown = ndimage.binary_dilation(comp, structure=_EIGHT)
        ring = ndimage.binary_dilation(grown, structure=_EIGHT) & ~grown
        window = img[r0:r1, c0:c1]
        background = float(np.median(window[ring])) if ring.any() else 0.0
        w = np.where(grown, window - background, 0.0)
        total = w.sum()
        if total <= 0:
            continue
        vs, us = np.mgrid[r0:r1, c0:c1]
        centroid = PixelPoint(float((w * us).sum() / total), float((w * vs).sum() / total))
        mid = read_marker_id(img, centroid, side)
        if mid is None:
            continue
        if mid not in found or area > found[mid][0]:
            found[mid] = (area, MarkerObservation(mid, centroid, frame.timestamp))
    observations = [found[i][1] for i in sorted(found)]
    missing = [MissingMarker(i) for i in MARKER_IDS if i not in found]
    return observations, missing


def sobel(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel derivatives (d/du, d/dv); the one-pixel border is zero."""
    a = img.astype(float)
    gx = np.zeros_like(a)
    gy = np.zeros_like(a)
    gx[1:-1, 1:-1] = (a[:-2, 2:] + 2 * a[1:-1, 2:] + a[2:, 2:]) - (a[:-2, :-2] + 2 * a[1:-1, :-2] + a[2:, :-2])
    gy[1:-1, 1:-1] = (a[2:, :-2] + 2 * a[2:, 1:-1] + a[2:, 2:]) - (a[:-2, :-2] + 2 * a[:-2, 1:-1] + a[:-2, 2:])
    return gx, gy


def edge_points(frame: FrameBuffer, threshold: float = EDGE_THRESHOLD):
    """Edge pixel coordinates and unit gradient directions."""
    gx, gy = sobel(frame.pixels)
    mag = np.hypot(gx, gy)
    vs, us = np.nonzero(mag >= threshold)
    m = mag[vs, us]
    return us.astype(float), vs.astype(float), gx[vs, us] / m, gy[vs, us] / m


def max_votes(radius: float) -> float:
    """Neighborhood votes cast by an ideal rendered rimmed disk of ``radius``.

    The rim gives two intensity steps and the Sobel operator responds over
    two pixels at each, so four edge rings of length 2*pi*r vote at the center.
    """
    return 4 * 2.0 * math.pi * radius


def vote_threshold(r_min: float) -> float:
    return VOTE_FRACTION * max_votes(r_min)


def _votes(frame: FrameBuffer, r_min: int, r_max: int, edge_threshold: float):
    us, vs, nu, nv = edge_points(frame, edge_threshold)
    radii = np.arange(r_min, r_max + 1, dtype=float)
    cx_parts, cy_parts, r_parts = [], [], []
    for sign in (1.0, -1.0):
        cx = us[:, None] + sign * radii[None, :] * nu[:, None]
        cy = vs[:, None] + sign * radii[None, :] * nv[:, None]
        cx_parts.append(cx.ravel())
        cy_parts.append(cy.ravel())
        r_parts.append(np.broadcast_to(radii, cx.shape).ravel())
    cx, cy, r = np.concatenate(cx_parts), np.concatenate(cy_parts), np.concatenate(r_parts)
    keep = (cx >= 0) & (cx < frame.width) & (cy >= 0) & (cy < frame.height)
    return cx[keep], cy[keep], r[keep]


def box_sum3(acc: np.ndarray) -> np.ndarray:
    """Sum over each cell's 3x3x3 neighborhood (zero outside the array)."""
    out = acc.astype(np.int32)
    for axis in range(3):
        padded = np.pad(out, [(1, 1) if i == axis else (0, 0) for i in range(3)])
        n = out.shape[axis]
        out = (padded.take(range(0, n), axis=axis) + padded.take(range(1, n + 1), axis=axis)
               + padded.take(range(2, n + 2), axis=axis))
    return out


def hough_circles(frame: FrameBuffer, r_min: int = DEFAULT_BAND[0], r_max: int = DEFAULT_BAND[1],
                  edge_threshold: float = EDGE_THRESHOLD, min_separation: float | None = None) -> list[CircleDetection]:
    """Circles found by gradient-direction voting, strongest first.

    Each edge pixel votes at distance r along +/- its gradient for every r in
    the band, into (2 px, 2 px, 2 px) bins of (cx, cy, r).  A bin's score is the vote
    count of its 3x3x3 neighborhood, which absorbs the spread of a thick
    rendered edge across bin boundaries.  Bins scoring at or above
    the vote threshold are taken in order of score, then smallest radius, then
    lowest (cy, cx); a bin closer than ``min_separation`` to an accepted
    circle's center is suppressed.  Centers and radii start as the median of the votes in
    the 3x3x3 bin neighborhood of each peak and are then re-centered a few
    times on a window of the same size.
    """
    if not (4 <= r_min < r_max <= 300):
        raise ValueError(f"radius band must satisfy 4 <= r_min < r_max <= 300, got [{r_min}, {r_max}]")
    if min_separation is None:
        min_separation = float(r_min)
    cx, cy, r = _votes(frame, r_min, r_max, edge_threshold)
    if cx.size == 0:
        raise NoCircle("no edge pixels")
    nx, ny = (frame.width + BIN - 1) // BIN, (frame.height + BIN - 1) // BIN
    nr = (r_max - r_min) // BIN + 1
    bx = np.floor(cx / BIN).astype(np.int64)
    by = np.floor(cy / BIN).astype(np.int64)
    br = np.floor((r - r_min) / BIN).astype(np.int64)
    acc = np.bincount((br * ny + by) * nx + bx, minlength=nr * ny * nx).reshape(nr, ny, nx)
    scores = box_sum3(acc)
    thr = vote_threshold(r_min)
    cand_r, cand_y, cand_x = np.nonzero(scores >= thr)
    if cand_r.size == 0:
        raise NoCircle(f"no bin reached {thr:.1f} votes (max {scores.max()})")
    counts = scores[cand_r, cand_y, cand_x]
    order = np.lexsort((cand_x, cand_y, cand_r, -counts))
    detections: list[CircleDetection] = []
    for i in order:
        bcx, bcy, brr = int(cand_x[i]), int(cand_y[i]), int(cand_r[i])
        approx = ((bcx + 0.5) * BIN, (bcy + 0.5) * BIN)
        if any(math.hypot(approx[0] - d.center.u, approx[1] - d.center.v) < min_separation for d in detections):
            continue
        near = (np.abs(bx - bcx) <= 1) & (np.abs(by - bcy) <= 1) & (np.abs(br - brr) <= 1)
        est = np.array([np.median(cx[near]), np.median(cy[near]), np.median(r[near])])
        for _ in range(REFINE_STEPS):
            # re-center the window on the estimate so bin edges do not bias it
            near = (np.abs(cx - est[0]) <= BIN * 1.5) & (np.abs(cy - est[1]) <= BIN * 1.5) & (np.abs(r - est[2]) <= BIN * 1.5)
            est = np.array([np.median(cx[near]), np.median(cy[near]), np.median(r[near])])
        center = PixelPoint(float(est[0]), float(est[1]))
        detections.append(CircleDetection(center, float(est[2]), int(counts[i]), (brr, bcy, bcx)))
    return detections


def polygon_center(contour: CircleDetection) -> PixelPoint:
    """Center of the detected contour (the circle fit already provides it)."""
    return contour.center
