import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gripsense.mechanics import DegenerateBasis, Disturbance, FingerBasis, decompose, is_resistible

forces = st.floats(-1e3, 1e3, allow_nan=False)
THREE, TWO = FingerBasis.three_finger(), FingerBasis.two_finger()


def test_three_finger_basis_geometry():
    n = THREE.normals
    np.testing.assert_allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-12)
    for i in range(3):
        cos = float(n[i] @ n[(i + 1) % 3])
        assert math.degrees(math.acos(cos)) == pytest.approx(120.0, abs=1e-9)
    np.testing.assert_allclose(THREE.frame_operator(), 1.5 * np.eye(2), atol=1e-12)


def test_vertical_disturbance_split():
    d = decompose(Disturbance(0, 1), THREE)
    np.testing.assert_allclose(d.coefficients, [-1 / 3, -1 / 3, 2 / 3], atol=1e-12)
    np.testing.assert_allclose(d.residual, [0, 0], atol=1e-12)
    np.testing.assert_allclose(d.recombine(THREE), [0, 1], atol=1e-12)


def test_zero_disturbance():
    for basis in (THREE, TWO):
        d = decompose(Disturbance(0, 0), basis)
        assert not d.coefficients.any() and not d.residual.any()


def test_two_finger_cannot_hold_y():
    d = decompose(Disturbance(1, 1), TWO)
    assert d.residual.tolist() == [0.0, 1.0]
    assert not is_resistible(Disturbance(0, 1), TWO)
    assert is_resistible(Disturbance(1, 0), TWO)
    assert is_resistible(Disturbance(3, -7), THREE)


def test_degenerate_and_bad_inputs():
    with pytest.raises(DegenerateBasis):
        decompose(Disturbance(1, 0), FingerBasis(np.zeros((2, 2))))
    with pytest.raises(DegenerateBasis):
        FingerBasis(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        Disturbance(float("nan"), 0)
    with pytest.raises(ValueError):
        is_resistible(Disturbance(0, 0), THREE, tol=0)


@given(forces, forces)
def test_matches_lstsq_min_norm(fx, fy):
    # independent route: numpy's SVD least squares on N^T a = f
    for basis in (THREE, TWO):
        a_ref = np.linalg.lstsq(basis.normals.T, [fx, fy], rcond=None)[0]
        d = decompose(Disturbance(fx, fy), basis)
        np.testing.assert_allclose(d.coefficients, a_ref, atol=1e-9 * (1 + abs(fx) + abs(fy)))


@given(forces, forces)
def test_three_finger_tight_frame(fx, fy):
    d = decompose(Disturbance(fx, fy), THREE)
    np.testing.assert_allclose(d.coefficients, (2 / 3) * THREE.normals @ [fx, fy], atol=1e-9)
    np.testing.assert_allclose(d.recombine(THREE) + d.residual, [fx, fy], atol=1e-9)
    assert np.hypot(*d.residual) < 1e-9


@given(forces, forces)
def test_two_finger_residual_law(fx, fy):
    assert decompose(Disturbance(fx, fy), TWO).residual.tolist() == [0.0, fy]


@given(forces, forces, forces, forces, st.floats(-10, 10), st.floats(-10, 10))
def test_linearity(fx, fy, gx, gy, alpha, beta):
    for basis in (THREE, TWO):
        lhs = decompose(Disturbance(alpha * fx + beta * gx, alpha * fy + beta * gy), basis)
        f, g = decompose(Disturbance(fx, fy), basis), decompose(Disturbance(gx, gy), basis)
        np.testing.assert_allclose(lhs.coefficients, alpha * f.coefficients + beta * g.coefficients, atol=1e-7)
        np.testing.assert_allclose(lhs.residual, alpha * f.residual + beta * g.residual, atol=1e-7)


@given(st.floats(0, 360), forces, forces)
def test_rank_one_basis_residual_perpendicular(phi, fx, fy):
    u = np.array([math.cos(math.radians(phi)), math.sin(math.radians(phi))])
    d = decompose(Disturbance(fx, fy), FingerBasis(np.array([u, -u])))
    assert abs(float(d.residual @ u)) < 1e-7
    np.testing.assert_allclose(d.recombine(FingerBasis(np.array([u, -u]))) + d.residual, [fx, fy], atol=1e-7)
