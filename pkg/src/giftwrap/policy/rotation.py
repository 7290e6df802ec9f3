"""6D rotation representation: first two matrix columns, recovered by Gram-Schmidt.

Continuous parameterization for regressing orientations; the planar stack only
exercises rotations about z but the full 3D round trip is supported.
"""

from __future__ import annotations

import numpy as np


def rot6d_from_matrix(R: np.ndarray) -> np.ndarray:
    """Flatten the first two columns of a rotation matrix into a 6-vector."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise ValueError(f"expected 3x3 rotation matrix, got {R.shape}")
    return np.concatenate([R[:, 0], R[:, 1]])


def matrix_from_rot6d(v: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Gram-Schmidt the two encoded columns and complete with their cross product.

    Raises ValueError on degenerate input (near-zero first column, or columns
    near parallel).
    """
    v = np.asarray(v, dtype=np.float64).reshape(6)
    a, b = v[:3], v[3:]
    na = np.linalg.norm(a)
    if na < eps:
        raise ValueError("degenerate 6D rotation: first column near zero")
    c0 = a / na
    b_orth = b - np.dot(c0, b) * c0
    nb = np.linalg.norm(b_orth)
    if nb < eps:
        raise ValueError("degenerate 6D rotation: columns near parallel")
    c1 = b_orth / nb
    c2 = np.cross(c0, c1)
    return np.stack([c0, c1, c2], axis=1)


def rotz(angle: float) -> np.ndarray:
    """Rotation about the z axis (the only rotation the planar sim produces)."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def yaw_from_matrix(R: np.ndarray) -> float:
    """Extract the z-rotation angle; inverse of rotz for planar rotations."""
    return float(np.arctan2(R[1, 0], R[0, 0]))


def average_rot6d(vs: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted average in 6D space followed by re-orthonormalization.

    Used by temporal ensembling: averaging identical inputs is exact, and the
    Gram-Schmidt decode keeps the result a valid rotation.
    """
    vs = np.asarray(vs, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    mean = np.average(vs, axis=0, weights=weights)
    return rot6d_from_matrix(matrix_from_rot6d(mean))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation matrix (QR of a Gaussian, sign-fixed)."""
    A = rng.normal(size=(3, 3))
    Q, Rr = np.linalg.qr(A)
    Q = Q * np.sign(np.diag(Rr))
    if np.linalg.det(Q) < 0:
        Q[:, 2] = -Q[:, 2]
    return Q
