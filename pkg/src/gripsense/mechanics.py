"""Planar disturbance decomposition over finger contact normals.

A disturbance f is split into signed per-finger loads a_i along unit normals
n_i by the minimum-norm least-squares solution a = N S^+ f, where
S = sum n_i n_i^T is the frame operator.  Whatever S cannot reach (its null
space) is the residual.  For three fingers at 120 deg, S = 1.5 I, so every
disturbance is absorbed; two opposed fingers leave the perpendicular part.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

RANK_TOL = 1e-12

_S3 = math.sqrt(3.0) / 2.0


class DegenerateBasis(ValueError):
    pass


@dataclass(frozen=True)
class Disturbance:
    fx: float
    fy: float

    def __post_init__(self):
        if not (math.isfinite(self.fx) and math.isfinite(self.fy)):
            raise ValueError("disturbance components must be finite")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.fx, self.fy])


@dataclass(frozen=True, eq=False)
class FingerBasis:
    normals: np.ndarray  # (k, 2) unit vectors

    def __post_init__(self):
        n = np.atleast_2d(np.array(self.normals, dtype=float))
        if n.ndim != 2 or n.shape[1] != 2 or n.shape[0] == 0:
            raise DegenerateBasis("basis needs at least one planar normal")
        n.setflags(write=False)
        object.__setattr__(self, "normals", n)

    @classmethod
    def three_finger(cls) -> FingerBasis:
        # finger 3 owns the pure +y normal
        return cls(np.array([[-_S3, -0.5], [_S3, -0.5], [0.0, 1.0]]))

    @classmethod
    def two_finger(cls) -> FingerBasis:
        return cls(np.array([[1.0, 0.0], [-1.0, 0.0]]))

    def frame_operator(self) -> np.ndarray:
        return self.normals.T @ self.normals


@dataclass(frozen=True, eq=False)
class Decomposition:
    coefficients: np.ndarray
    residual: np.ndarray

    def recombine(self, basis: FingerBasis) -> np.ndarray:
        return self.coefficients @ basis.normals

    def to_dict(self) -> dict:
        return {
            "coefficients": [float(a) for a in self.coefficients],
            "residual": [float(r) for r in self.residual],
            "residual_norm": float(np.hypot(*self.residual)),
        }


def _pinv_and_projector(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pseudo-inverse of a symmetric PSD 2x2 matrix and the projector onto its range."""
    trace = float(s[0, 0] + s[1, 1])
    if trace <= 0:
        raise DegenerateBasis("all finger normals are zero")
    det = float(s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0])
    if det > RANK_TOL * trace * trace:
        inv = np.array([[s[1, 1], -s[0, 1]], [-s[1, 0], s[0, 0]]]) / det
        return inv, np.eye(2)
    # rank one: s = trace * u u^T
    return s / (trace * trace), s / trace


def decompose(f: Disturbance, basis: FingerBasis) -> Decomposition:
    """Minimum-norm per-finger loads and the unresistable remainder."""
    s = basis.frame_operator()
    pinv, proj = _pinv_and_projector(s)
    fv = f.vector
    coeffs = basis.normals @ (pinv @ fv)
    residual = fv - proj @ fv
    return Decomposition(coeffs, residual)


def is_resistible(f: Disturbance, basis: FingerBasis, tol: float = 1e-9) -> bool:
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    r = decompose(f, basis).residual
    return bool(math.hypot(r[0], r[1]) < tol)
