import numpy as np
import pytest

from giftwrap.policy.rotation import (
    average_rot6d,
    matrix_from_rot6d,
    random_rotation,
    rot6d_from_matrix,
    rotz,
)


def test_identity_encoding():
    v = rot6d_from_matrix(np.eye(3))
    assert np.allclose(v, [1, 0, 0, 0, 1, 0])
    assert np.allclose(matrix_from_rot6d(v), np.eye(3))


def test_quarter_turn_about_z():
    R = rotz(np.pi / 2)
    v = rot6d_from_matrix(R)
    assert np.allclose(v, [0, 1, 0, -1, 0, 0], atol=1e-12)
    assert np.allclose(matrix_from_rot6d(v), R)


def test_random_round_trip(rng):
    worst = 0.0
    for _ in range(500):
        R = random_rotation(rng)
        R2 = matrix_from_rot6d(rot6d_from_matrix(R))
        worst = max(worst, np.linalg.norm(R2 - R))
    assert worst < 1e-6


def test_decode_orthonormalizes_noisy_input(rng):
    v = rot6d_from_matrix(random_rotation(rng)) + rng.normal(0, 0.05, 6)
    R = matrix_from_rot6d(v)
    assert np.allclose(R.T @ R, np.eye(3), atol=1e-9)
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-9)


def test_degenerate_inputs_raise():
    with pytest.raises(ValueError):
        matrix_from_rot6d(np.zeros(6))
    with pytest.raises(ValueError):
        matrix_from_rot6d(np.array([1, 0, 0, 2, 0, 0], dtype=float))


def test_average_of_identical_rotations_is_exact(rng):
    v = rot6d_from_matrix(random_rotation(rng))
    out = average_rot6d(np.stack([v, v, v]), np.array([0.2, 0.5, 0.3]))
    assert np.allclose(out, v, atol=1e-12)
