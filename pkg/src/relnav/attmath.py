"""Rotation kernel: quaternions, MRPs, direction cosine matrices.

Conventions
-----------
Quaternions are scalar-first ``(w, x, y, z)`` and follow the Shuster
(passive) convention used throughout spacecraft attitude estimation:

* ``quat_to_dcm(q_BA)`` returns ``R_BA``, mapping A-frame coordinates into
  B-frame coordinates.
* ``quat_mul(a, b)`` composes so that ``dcm(a (x) b) = dcm(a) @ dcm(b)``.
* Kinematics read ``q_dot = 0.5 * Omega(w) q`` with ``w`` the rate of B
  relative to A expressed in B.

Attitude errors are multiplicative on the left, ``q = dq (x) q_ref``, and
error MRPs carry the factor of 4 so that ``|p|`` is close to the rotation
angle in radians for small errors.

Functions accept plain arrays; the leading dimensions broadcast so that the
filter can push a whole set of sigma points through in one call.
"""

from __future__ import annotations

import numpy as np

MRP_EPS = 1e-9
SMALL_ANGLE = 1e-6


class SingularMrp(ValueError):
    """Raised when an MRP chart is evaluated at its singular point."""


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix ``[v]x`` so that ``skew(v) @ u == cross(v, u)``."""
    v = np.asarray(v, dtype=float)
    z = np.zeros(v.shape[:-1])
    x, y, w = v[..., 0], v[..., 1], v[..., 2]
    return np.stack(
        [
            np.stack([z, -w, y], axis=-1),
            np.stack([w, z, -x], axis=-1),
            np.stack([-y, x, z], axis=-1),
        ],
        axis=-2,
    )


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_conj(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.concatenate([q[..., :1], -q[..., 1:]], axis=-1)


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Compose two rotations; ``dcm(quat_mul(a, b)) == dcm(a) @ dcm(b)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, av = a[..., :1], a[..., 1:]
    bw, bv = b[..., :1], b[..., 1:]
    w = aw * bw - np.sum(av * bv, axis=-1, keepdims=True)
    v = aw * bv + bw * av - np.cross(av, bv)
    return np.concatenate([w, v], axis=-1)


def quat_to_dcm(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    w = q[..., 0]
    v = q[..., 1:]
    eye = np.broadcast_to(np.eye(3), q.shape[:-1] + (3, 3))
    vv = np.einsum("...i,...j->...ij", v, v)
    scal = (w**2 - np.sum(v * v, axis=-1))[..., None, None]
    return scal * eye + 2.0 * vv - 2.0 * w[..., None, None] * skew(v)


def dcm_to_quat(R: np.ndarray) -> np.ndarray:
    """Inverse of :func:`quat_to_dcm` (Shepperd's method), scalar part >= 0."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    cand = np.array([tr, R[0, 0], R[1, 1], R[2, 2]])
    k = int(np.argmax(cand))
    if k == 0:
        w = 0.5 * np.sqrt(1.0 + tr)
        q = np.array([w, (R[1, 2] - R[2, 1]) / (4 * w),
                      (R[2, 0] - R[0, 2]) / (4 * w), (R[0, 1] - R[1, 0]) / (4 * w)])
    elif k == 1:
        x = 0.5 * np.sqrt(1.0 + 2 * R[0, 0] - tr)
        q = np.array([(R[1, 2] - R[2, 1]) / (4 * x), x,
                      (R[0, 1] + R[1, 0]) / (4 * x), (R[0, 2] + R[2, 0]) / (4 * x)])
    elif k == 2:
        y = 0.5 * np.sqrt(1.0 + 2 * R[1, 1] - tr)
        q = np.array([(R[2, 0] - R[0, 2]) / (4 * y), (R[0, 1] + R[1, 0]) / (4 * y),
                      y, (R[1, 2] + R[2, 1]) / (4 * y)])
    else:
        z = 0.5 * np.sqrt(1.0 + 2 * R[2, 2] - tr)
        q = np.array([(R[0, 1] - R[1, 0]) / (4 * z), (R[0, 2] + R[2, 0]) / (4 * z),
                      (R[1, 2] + R[2, 1]) / (4 * z), z])
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    """Quaternion of a frame rotated by ``angle`` about ``axis``."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return np.concatenate([[np.cos(angle / 2)], np.sin(angle / 2) * axis])


def quat_from_rotvec(theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    ang = np.linalg.norm(theta, axis=-1, keepdims=True)
    half = 0.5 * ang
    # sin(x/2)/x, with its series below the small-angle threshold
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(ang < SMALL_ANGLE, 0.5 - ang**2 / 48.0, np.sin(half) / ang)
    return np.concatenate([np.cos(half), k * theta], axis=-1)


def quat_to_rotvec(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    q = np.where(q[..., :1] < 0, -q, q)
    vn = np.linalg.norm(q[..., 1:], axis=-1, keepdims=True)
    ang = 2.0 * np.arctan2(vn, q[..., :1])
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(vn < 1e-12, 2.0 / np.maximum(q[..., :1], 1e-300), ang / vn)
    return k * q[..., 1:]


def mrp_from_error_quat(dq: np.ndarray) -> np.ndarray:
    """Regular MRP ``p = 4 v / (1 + w)``; singular at a 360 deg error."""
    dq = np.asarray(dq, dtype=float)
    den = 1.0 + dq[..., :1]
    if np.any(den <= MRP_EPS):
        raise SingularMrp("error quaternion too close to a 360 deg rotation")
    return 4.0 * dq[..., 1:] / den


def shadow_mrp(dq: np.ndarray) -> np.ndarray:
    """Shadow MRP ``p_s = 4 v / (w - 1)``; singular at zero rotation."""
    dq = np.asarray(dq, dtype=float)
    den = dq[..., :1] - 1.0
    if np.any(np.abs(den) <= MRP_EPS):
        raise SingularMrp("shadow MRP undefined for the identity rotation")
    return 4.0 * dq[..., 1:] / den


def min_norm_mrp(dq: np.ndarray) -> np.ndarray:
    """Pick whichever of the regular and shadow MRPs is shorter.

    Both charts have norm 4 when ``w == 0``; ties go to the regular set.
    Equivalent to flipping the quaternion sign so that ``w >= 0``.
    """
    dq = np.asarray(dq, dtype=float)
    w = dq[..., :1]
    # |4v/(1+w)| <= |4v/(w-1)|  <=>  w >= 0
    sign = np.where(w >= 0.0, 1.0, -1.0)
    return 4.0 * sign * dq[..., 1:] / (1.0 + sign * w)


def quat_from_mrp(p: np.ndarray) -> np.ndarray:
    """Inverse of :func:`mrp_from_error_quat` (factor-of-4 convention)."""
    p = np.asarray(p, dtype=float)
    pp = np.sum(p * p, axis=-1, keepdims=True)
    den = 16.0 + pp
    return np.concatenate([(16.0 - pp) / den, 8.0 * p / den], axis=-1)


def rodrigues_exp(theta_vec: np.ndarray) -> np.ndarray:
    """Matrix exponential ``exp([theta]x)`` of a skew-symmetric matrix."""
    theta_vec = np.asarray(theta_vec, dtype=float)
    th = float(np.linalg.norm(theta_vec))
    K = skew(theta_vec)
    if th < SMALL_ANGLE:
        return np.eye(3) + K + 0.5 * K @ K
    Kh = K / th
    return np.eye(3) + np.sin(th) * Kh + (1.0 - np.cos(th)) * Kh @ Kh


def angle_between(a: np.ndarray, b: np.ndarray) -> float:
    """Attitude distance ``2 acos(|<a, b>|)`` in radians, within [0, pi]."""
    d = abs(float(np.dot(a, b)))
    return 2.0 * float(np.arccos(min(d, 1.0)))


def dcm_to_euler321(R: np.ndarray) -> np.ndarray:
    """Yaw-pitch-roll (3-2-1) angles of a DCM, returned as ``(roll, pitch, yaw)``."""
    R = np.asarray(R, dtype=float)
    yaw = np.arctan2(R[0, 1], R[0, 0])
    pitch = -np.arcsin(np.clip(R[0, 2], -1.0, 1.0))
    roll = np.arctan2(R[1, 2], R[2, 2])
    return np.array([roll, pitch, yaw])
