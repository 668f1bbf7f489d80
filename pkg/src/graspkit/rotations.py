"""Quaternion and rotation-matrix helpers.

Quaternions use the Hamilton product and (w, x, y, z) component order.
Rotation matrices are right-handed, acting on column vectors.
"""

from __future__ import annotations

import math

import numpy as np


def quat_mul(a, b) -> np.ndarray:
    """Hamilton product a (x) b in (w, x, y, z) order."""
    aw, ax, ay, az = np.asarray(a, dtype=np.float64)
    bw, bx, by, bz = np.asarray(b, dtype=np.float64)
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=np.float64)
    return np.array([w, -x, -y, -z])


def quat_normalize(q) -> np.ndarray:
    arr = np.asarray(q, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise ValueError("cannot normalize zero quaternion")
    return arr / norm


def quat_rotate(q, v) -> np.ndarray:
    """Rotate vector ``v`` by unit quaternion ``q`` via q v q*."""
    vq = np.array([0.0, *np.asarray(v, dtype=np.float64)])
    w, x, y, z = quat_mul(quat_mul(q, vq), quat_conjugate(q))
    return np.array([x, y, z])


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix of a (not necessarily pre-normalized) quaternion."""
    w, x, y, z = quat_normalize(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(m) -> np.ndarray:
    """Unit quaternion (w >= 0) of a rotation matrix; Shepperd's branching."""
    r = np.asarray(m, dtype=np.float64)
    trace = r[0, 0] + r[1, 1] + r[2, 2]
    if trace > 0.0:
        s = math.sqrt(trace + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
        )
    elif r[0, 0] >= r[1, 1] and r[0, 0] >= r[2, 2]:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q = np.array(
            [(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s]
        )
    elif r[1, 1] >= r[2, 2]:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        q = np.array(
            [(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        q = np.array(
            [(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s]
        )
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


def axis_angle_quat(axis, degrees: float) -> np.ndarray:
    """Unit quaternion for a rotation of ``degrees`` about ``axis``."""
    ax = np.asarray(axis, dtype=np.float64)
    norm = float(np.linalg.norm(ax))
    if norm == 0.0:
        raise ValueError("rotation axis must be nonzero")
    half = math.radians(degrees) / 2.0
    return np.array([math.cos(half), *(math.sin(half) * ax / norm)])


def axis_angle_matrix(axis, degrees: float) -> np.ndarray:
    return quat_to_matrix(axis_angle_quat(axis, degrees))


def is_rotation_matrix(m, tol: float = 1e-6) -> bool:
    r = np.asarray(m, dtype=np.float64)
    if r.shape != (3, 3):
        return False
    ortho = np.abs(r.T @ r - np.eye(3)).max() <= tol
    return bool(ortho and abs(np.linalg.det(r) - 1.0) <= tol)
