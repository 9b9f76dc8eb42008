"""Small vector and rotation helpers shared by the geometry modules.

Unit vectors on the sphere are plain ``numpy`` arrays whose last axis has
length 3. Functions here broadcast over any leading axes.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

# Canonical forward-looking camera: optical axis (+z) along vehicle +x,
# image right (+x) along vehicle -y, image down (+y) along vehicle -z.
FORWARD_CAMERA = np.array(
    [[0.0, -1.0, 0.0],
     [0.0, 0.0, -1.0],
     [1.0, 0.0, 0.0]]
)


def unit(v, eps: float = 0.0) -> np.ndarray:
    """Normalize ``v`` along the last axis.

    Raises:
        DomainError: if any vector has norm ``<= eps``.
    """
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n <= eps):
        raise DomainError("cannot normalize a zero vector")
    return v / n


def dot(a, b) -> np.ndarray:
    return np.einsum("...i,...i->...", np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))


def angle_between(a, b) -> np.ndarray:
    """Unsigned angle between vectors, robust near 0 and pi."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.arctan2(np.linalg.norm(np.cross(a, b), axis=-1), dot(a, b))


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def axis_angle(axis, angle: float) -> np.ndarray:
    """Rotation matrix for a right-handed rotation of ``angle`` about ``axis``."""
    k = unit(axis)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def is_rotation(R, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return bool(
        np.max(np.abs(R @ R.T - np.eye(3))) <= tol
        and abs(np.linalg.det(R) - 1.0) <= tol
    )


def camera_rotation(yaw: float = 0.0, pitch: float = 0.0, roll: float = 0.0) -> np.ndarray:
    """Vehicle-to-camera rotation for a camera mounted with the given angles.

    Angles are in radians and relative to :data:`FORWARD_CAMERA`: ``yaw``
    turns the optical axis left about the vehicle up axis, ``pitch`` tilts it
    down, ``roll`` spins the image about the optical axis.
    """
    cam_to_vehicle = rot_z(yaw) @ rot_y(pitch) @ FORWARD_CAMERA.T @ rot_z(roll)
    return cam_to_vehicle.T
