import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gripsense.collision import (CollisionMonitor, CollisionThreshold, CollisionVector, IncompleteObservation,
                                 MarkerLoss, PositionMatrix, angle_diff, canonical_angle, encode, is_collision,
                                 to_polar)
from gripsense.detect import MarkerObservation, extract_marker_centers
from gripsense.geometry import GripperRig, PixelPoint
from gripsense.imaging import render
from gripsense.sim import DisturbanceEvent

from helpers import at_time, grasped_world

REF = PositionMatrix(np.array([[300.0, 400.0], [250.0, 450.0], [250.0, 350.0]]))
finite = st.floats(-500, 500, allow_nan=False)


def shifted(rows_delta):
    return PositionMatrix(REF.rows + np.asarray(rows_delta, dtype=float))


def observed(world, rig):
    obs, _ = extract_marker_centers(render(world, rig), rig.marker_side)
    return PositionMatrix.from_observations(obs)


def test_encode_examples():
    c = encode(REF, REF)
    assert (c.dy, c.dx, c.r) == (0.0, 0.0, 0.0)
    c = encode(REF, shifted([[3, 4], [0, 0], [0, 0]]))
    assert c.r == pytest.approx(5.0)
    assert c.theta == pytest.approx(canonical_angle(3, 4))
    c = encode(REF, shifted([[1, 0], [2, 0], [-1, 0]]))
    assert (c.dy, c.dx) == (2.0, 0.0) and c.r == 2.0


def test_polar_examples():
    assert to_polar(1, 0) == (1.0, 0.0)
    assert to_polar(0, 1) == (1.0, 90.0)
    assert to_polar(0, 0) == (0.0, 0.0)
    assert to_polar(-1, 0)[1] == pytest.approx(180.0)
    assert to_polar(0, -1)[1] == pytest.approx(270.0)


def test_threshold_boundary():
    th = CollisionThreshold(6.0)
    assert not is_collision(CollisionVector.from_components(0, 0), th)
    assert is_collision(CollisionVector.from_components(6, 0), th)
    assert not is_collision(CollisionVector.from_components(5.99, 0), th)
    with pytest.raises(ValueError):
        CollisionThreshold(0.0)


def test_incomplete_matrix_rejected():
    with pytest.raises(IncompleteObservation):
        PositionMatrix(np.zeros((2, 2)))
    with pytest.raises(IncompleteObservation):
        PositionMatrix(np.array([[1.0, 2.0], [np.nan, 1.0], [0.0, 0.0]]))
    obs = [MarkerObservation(1, PixelPoint(1, 2)), MarkerObservation(3, PixelPoint(3, 4))]
    with pytest.raises(IncompleteObservation):
        PositionMatrix.from_observations(obs)


def test_event_fields():
    ev = CollisionVector.from_components(0.0, 7.0, 1.25).to_event(CollisionThreshold(6))
    assert ev == {"t": 1.25, "dy": 0.0, "dx": 7.0, "r": 7.0, "theta": 90.0, "collision": True}


def test_finger_one_poke_through_renderer():
    rig = GripperRig()
    base = grasped_world(rig)
    ref = observed(base, rig)
    poked = at_time(replace(base, disturbances=(DisturbanceEvent.finger_poke(1, 5.0, 0.0, 1.0),)), 0.5)
    c = encode(ref, observed(poked, rig))
    assert angle_diff(c.theta, 180.0) <= 5.0
    assert c.r == pytest.approx(10.0, abs=0.5)


def test_magnitude_monotonicity_rendered():
    rig = GripperRig()
    base = grasped_world(rig)
    ref = observed(base, rig)
    rs = []
    for m in (3.0, 6.0):
        w = at_time(replace(base, disturbances=(DisturbanceEvent("object", 70.0, m, 0.0, 1.0),)), 0.5)
        rs.append(encode(ref, observed(w, rig)).r)
    assert rs[1] / rs[0] == pytest.approx(2.0, rel=0.1)


def test_monitor_holds_then_faults():
    mon = CollisionMonitor(CollisionThreshold(6), max_incomplete=3)
    full = [MarkerObservation(i + 1, PixelPoint(x, y)) for i, (y, x) in enumerate(REF.rows)]
    mon.latch(REF)
    moved = [MarkerObservation(1, PixelPoint(full[0].centroid.u, full[0].centroid.v + 7))] + full[1:]
    v = mon.update(moved, 0.05)
    assert v.r == pytest.approx(7.0) and mon.colliding()
    assert mon.update(full[:2], 0.10) is v
    assert mon.update(full[:2], 0.15) is v
    with pytest.raises(MarkerLoss):
        mon.update(full[:2], 0.20)


def test_monitor_recovers_counter():
    mon = CollisionMonitor(max_incomplete=3)
    full = [MarkerObservation(i + 1, PixelPoint(x, y)) for i, (y, x) in enumerate(REF.rows)]
    mon.update(full, 0.0)
    for k in range(5):
        mon.update(full[:1], 0.05 * (2 * k + 1))
        mon.update(full[:1], 0.05 * (2 * k + 1))
        mon.update(full, 0.05 * (2 * k + 2))
    assert mon.snapshot().r == 0.0


@given(finite, finite)
def test_polar_invariants(dy, dx):
    r, theta = to_polar(dy, dx)
    assert r == pytest.approx(math.hypot(dy, dx), abs=1e-9)
    assert 0.0 <= theta < 360.0
    if r > 1e-6:
        assert math.cos(math.radians(theta)) * r == pytest.approx(dy, abs=1e-6)
        assert math.sin(math.radians(theta)) * r == pytest.approx(dx, abs=1e-6)


@given(st.lists(finite, min_size=6, max_size=6), st.lists(finite, min_size=6, max_size=6))
def test_encode_additive(a, b):
    a, b = np.reshape(a, (3, 2)), np.reshape(b, (3, 2))
    ca, cb, cab = encode(REF, shifted(a)), encode(REF, shifted(b)), encode(REF, shifted(a + b))
    assert cab.dy == pytest.approx(ca.dy + cb.dy, abs=1e-6)
    assert cab.dx == pytest.approx(ca.dx + cb.dx, abs=1e-6)


@given(st.lists(st.floats(-50, 50), min_size=6, max_size=6), st.floats(0.01, 100))
def test_encode_scaling(d, s):
    d = np.reshape(d, (3, 2))
    c1, c2 = encode(REF, shifted(d)), encode(REF, shifted(s * d))
    assert c2.r == pytest.approx(s * c1.r, rel=1e-6, abs=1e-6)
    if c1.r > 1e-3:
        assert angle_diff(c1.theta, c2.theta) < 1e-6


@given(st.lists(st.floats(-50, 50), min_size=6, max_size=6), st.floats(0, 360))
def test_encode_rotation_equivariant(d, phi):
    d = np.reshape(d, (3, 2))
    a = math.radians(phi)
    # theta is measured from +dy toward +dx, so rotate (dy, dx) in that sense
    rot = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    rotated = (rot @ d.T).T
    c1, c2 = encode(REF, shifted(d)), encode(REF, shifted(rotated))
    assert c2.r == pytest.approx(c1.r, abs=1e-6)
    if c1.r > 1e-3:
        assert angle_diff(c2.theta, (c1.theta + phi) % 360) < 1e-4


@given(st.floats(0, 720), st.floats(0, 720))
def test_angle_diff_bounds(a, b):
    d = angle_diff(a, b)
    assert 0 <= d <= 180
    assert d == pytest.approx(angle_diff(b, a), abs=1e-9)
