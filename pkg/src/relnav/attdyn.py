"""Relative and absolute attitude dynamics with RK4 integration.

The relative state is ``(q_TS, w_ST)``: the target-from-servicer quaternion
and the servicer-relative-to-target rate expressed in the target frame.
The target's own inertial rate follows as ``w_T = R_TS w_S - w_ST``, so the
quaternion propagates with ``w_TS = -w_ST``.

Every function broadcasts over leading axes so a full set of UKF sigma
points can be advanced together.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .attmath import quat_normalize, quat_to_dcm

TANGO_INERTIA = np.diag([2.69, 3.46, 3.11])


def make_inertia(diag) -> np.ndarray:
    d = np.asarray(diag, dtype=float)
    if d.shape != (3,) or np.any(d <= 0):
        raise ValueError("inertia needs three positive principal moments")
    a, b, c = d
    if a + b < c or a + c < b or b + c < a:
        raise ValueError("principal moments violate the triangle inequality")
    return np.diag(d)


@dataclass(frozen=True)
class ServicerAttitudeFeed:
    """Servicer body rate and its derivative, both in servicer axes."""

    w: np.ndarray
    wdot: np.ndarray


FeedFn = Callable[[float], ServicerAttitudeFeed]


def omega_matrix(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    x, y, z = w[..., 0], w[..., 1], w[..., 2]
    zero = np.zeros_like(x)
    return np.stack(
        [
            np.stack([zero, -x, -y, -z], axis=-1),
            np.stack([x, zero, z, -y], axis=-1),
            np.stack([y, -z, zero, x], axis=-1),
            np.stack([z, y, -x, zero], axis=-1),
        ],
        axis=-2,
    )


def quat_rate(q: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``q_dot = 0.5 Omega(w) q`` for the rate of the body frame in body axes."""
    return 0.5 * np.einsum("...ij,...j->...i", omega_matrix(w), q)


def rel_ang_accel(q_ts, w_st, feed: ServicerAttitudeFeed, inertia, torque=None):
    """Time derivative of ``w_ST`` in target axes.

    Implements ``R_TS wdot_S - I^-1 (m - w_T x I w_T) - w_T x w_ST``.
    """
    R = quat_to_dcm(q_ts)
    Rw = np.einsum("...ij,j->...i", R, feed.w)
    Rwd = np.einsum("...ij,j->...i", R, feed.wdot)
    w_t = Rw - w_st
    Iw = w_t @ inertia.T
    m = np.zeros(3) if torque is None else torque
    euler = (m - np.cross(w_t, Iw)) @ np.linalg.inv(inertia).T
    return Rwd - euler - np.cross(w_t, w_st)


def _rel_deriv(q, w, feed, inertia, torque):
    return quat_rate(q, -w), rel_ang_accel(q, w, feed, inertia, torque)


def rk4_attitude_step(q_ts, w_st, feed_fn: FeedFn, t: float, inertia, dt: float, torque=None):
    """One RK4 step of the joint relative kinematics and dynamics.

    ``feed_fn(t)`` supplies the servicer rate at the stage times.  The
    quaternion is renormalised at the end of the step only.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    f0, fh, f1 = feed_fn(t), feed_fn(t + 0.5 * dt), feed_fn(t + dt)
    k1q, k1w = _rel_deriv(q_ts, w_st, f0, inertia, torque)
    k2q, k2w = _rel_deriv(q_ts + 0.5 * dt * k1q, w_st + 0.5 * dt * k1w, fh, inertia, torque)
    k3q, k3w = _rel_deriv(q_ts + 0.5 * dt * k2q, w_st + 0.5 * dt * k2w, fh, inertia, torque)
    k4q, k4w = _rel_deriv(q_ts + dt * k3q, w_st + dt * k3w, f1, inertia, torque)
    q_new = q_ts + dt / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
    w_new = w_st + dt / 6 * (k1w + 2 * k2w + 2 * k3w + k4w)
    return quat_normalize(q_new), w_new


def euler_rate(w, inertia, torque) -> np.ndarray:
    Iw = inertia @ w
    return np.linalg.solve(inertia, torque - np.cross(w, Iw))


def propagate_rigid_body_truth(q_abs, w_body, inertia, external_torque, dt: float):
    """RK4 step of ``I wdot = m - w x I w`` with quaternion kinematics.

    ``q_abs`` maps inertial to body axes; the torque is held constant over
    the step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    m = np.asarray(external_torque, dtype=float)

    def f(q, w):
        return quat_rate(q, w), euler_rate(w, inertia, m)

    k1q, k1w = f(q_abs, w_body)
    k2q, k2w = f(q_abs + 0.5 * dt * k1q, w_body + 0.5 * dt * k1w)
    k3q, k3w = f(q_abs + 0.5 * dt * k2q, w_body + 0.5 * dt * k2w)
    k4q, k4w = f(q_abs + dt * k3q, w_body + dt * k3w)
    q_new = q_abs + dt / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
    w_new = w_body + dt / 6 * (k1w + 2 * k2w + 2 * k3w + k4w)
    return quat_normalize(q_new), w_new
