"""Unscented quaternion filter for relative pose.

The 12-element state is ``x = [a_ref * roe (m), dp, w_ST]``: relative
orbital elements scaled to meters by a fixed reference semi-major axis, a
three-parameter attitude error (MRP, factor-4 convention) about the
reference quaternion ``q_ref = q_TS``, and the servicer-relative-to-target
angular velocity in target axes.  The MRP is folded into ``q_ref`` and
zeroed after every time and measurement update.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import chi2

from .attdyn import ServicerAttitudeFeed, rk4_attitude_step
from .attmath import min_norm_mrp, quat_conj, quat_from_mrp, quat_mul, quat_normalize, quat_to_dcm
from .meas import CameraModel, MeasurementFrame, build_R, predict_pixels
from .orbitmech import EquinoctialElements, RtnState, roe_rtn_matrix, rtn_to_roe, stm_ns_roe

log = logging.getLogger(__name__)

NX = 12
ROE, MRP, OMEGA = slice(0, 6), slice(6, 9), slice(9, 12)

# servicer body axes in RTN coordinates: x = N, y = -R, z = -T
R_S_RTN = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])


class CholeskyFailure(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class UkfParams:
    alpha: float = 0.1
    beta: float = 2.0
    kappa: float = 3.0 - NX
    gate_prob: float = 0.99
    a_scale: float = 1000.0
    substeps: int = 5
    gating: bool = True

    @property
    def lam(self) -> float:
        return self.alpha**2 * (NX + self.kappa) - NX

    def weights(self):
        lam = self.lam
        c = NX + lam
        if c <= 0:
            raise ValueError("n + lambda must be positive")
        wm = np.full(2 * NX + 1, 0.5 / c)
        wc = wm.copy()
        wm[0] = lam / c
        wc[0] = lam / c + 1 - self.alpha**2 + self.beta
        return wm, wc

    def threshold(self, dof: int) -> float:
        return float(chi2.ppf(self.gate_prob, dof))


@dataclass
class FilterState:
    x: np.ndarray
    q_ref: np.ndarray
    P: np.ndarray
    t: float
    a_ref: float

    @property
    def roe(self) -> np.ndarray:
        """Dimensionless ROE."""
        return self.x[ROE] / self.a_ref

    @property
    def w_st(self) -> np.ndarray:
        return self.x[OMEGA]

    def copy(self) -> "FilterState":
        return FilterState(self.x.copy(), self.q_ref.copy(), self.P.copy(), self.t, self.a_ref)


@dataclass
class ServicerKnowledge:
    """What the filter knows about the servicer at one epoch."""

    elements: EquinoctialElements
    R_s_rtn: np.ndarray = field(default_factory=lambda: R_S_RTN.copy())
    feed: object = None  # callable t -> ServicerAttitudeFeed

    def rtn_matrix(self) -> np.ndarray:
        return roe_rtn_matrix(self.elements)


@dataclass
class InnovationReport:
    d2: np.ndarray
    dof: np.ndarray
    accepted: np.ndarray
    groups: list
    residual: np.ndarray
    dx: np.ndarray

    @property
    def n_rejected(self) -> int:
        return int((~self.accepted).sum())


def condition_covariance(P: np.ndarray) -> np.ndarray:
    P = 0.5 * (P + P.T)
    try:
        np.linalg.cholesky(P)
        return P
    except np.linalg.LinAlgError:
        pass
    eps = 1e-12 * max(np.trace(P), 1e-30) / NX
    P2 = P + eps * np.eye(NX)
    try:
        np.linalg.cholesky(P2)
        return P2
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(P)
        floor = 1e-10 * max(np.abs(vals).max(), 1e-30)
        log.warning("covariance not PSD (min eig %.3e); flooring eigenvalues", vals.min())
        return (vecs * np.maximum(vals, floor)) @ vecs.T


def sigma_points(state: FilterState, params: UkfParams):
    """``2n+1`` points as (vectors, quaternions); MRPs perturb ``q_ref`` on the left."""
    c = NX + params.lam
    P = condition_covariance(state.P)
    try:
        L = np.linalg.cholesky(c * P)
    except np.linalg.LinAlgError as exc:
        raise CholeskyFailure(str(exc)) from exc
    X = np.empty((2 * NX + 1, NX))
    X[0] = state.x
    X[1 : NX + 1] = state.x + L.T
    X[NX + 1 :] = state.x - L.T
    q = quat_normalize(quat_mul(quat_from_mrp(X[:, MRP]), state.q_ref))
    return X, q


def _fold_mrp(x: np.ndarray, q_ref: np.ndarray):
    q = quat_normalize(quat_mul(quat_from_mrp(x[MRP]), q_ref))
    x = x.copy()
    x[MRP] = 0.0
    return x, q


def time_update(state: FilterState, knowledge: ServicerKnowledge, inertia, Q, dt: float,
                params: UkfParams) -> FilterState:
    """Propagate the sigma points over ``dt`` and re-form mean and covariance."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    wm, wc = params.weights()
    X, q = sigma_points(state, params)
    phi = stm_ns_roe(knowledge.elements, dt)
    Xn = X.copy()
    Xn[:, ROE] = X[:, ROE] @ phi.T
    w = X[:, OMEGA]
    h = dt / params.substeps
    t = state.t
    for _ in range(params.substeps):
        q, w = rk4_attitude_step(q, w, knowledge.feed, t, inertia, h)
        t += h
    q0 = q[0]
    Xn[:, MRP] = min_norm_mrp(quat_mul(q, quat_conj(q0)))
    Xn[:, OMEGA] = w
    xm = wm @ Xn
    D = Xn - xm
    P = (D.T * wc) @ D + Q
    xm, q_ref = _fold_mrp(xm, q0)
    return FilterState(xm, q_ref, condition_covariance(P), state.t + dt, state.a_ref)


def measurement_model(X, q, knowledge: ServicerKnowledge, cam: CameraModel, kps, a_ref):
    """Pixels, camera-frame translation and camera-relative attitude per point."""
    M = knowledge.rtn_matrix()[:3]
    rho = (X[:, ROE] / a_ref) @ M.T
    t_s = rho @ knowledge.R_s_rtn.T
    return predict_pixels(t_s, q, cam, kps)


def measurement_update(state: FilterState, frame: MeasurementFrame, knowledge: ServicerKnowledge,
                       cam: CameraModel, kps, params: UkfParams):
    wm, wc = params.weights()
    X, q = sigma_points(state, params)
    valid = np.flatnonzero(frame.kp_valid)
    pix, t_c, q_tc = measurement_model(X, q, knowledge, cam, kps[valid], state.a_ref)
    q_hat_E = q_tc[0]
    mrp_pts = min_norm_mrp(quat_mul(q_tc, quat_conj(q_hat_E)))
    Y = np.concatenate([pix.reshape(len(X), -1), t_c, mrp_pts], axis=1)
    y = np.concatenate(
        [
            frame.keypoints[valid].ravel(),
            frame.t_E,
            min_norm_mrp(quat_mul(frame.q_E, quat_conj(q_hat_E))),
        ]
    )
    ym = wm @ Y
    DY = Y - ym
    DX = X - wm @ X
    R = build_R(frame, params.a_scale)
    S = (DY.T * wc) @ DY + R
    Pxy = (DX.T * wc) @ DY
    z = y - ym

    nk = len(valid)
    groups = [np.arange(2 * j, 2 * j + 2) for j in range(nk)]
    groups.append(np.arange(2 * nk, 2 * nk + 3))
    groups.append(np.arange(2 * nk + 3, 2 * nk + 6))
    dof = np.array([len(g) for g in groups])
    d2 = np.array([z[g] @ np.linalg.solve(S[np.ix_(g, g)], z[g]) for g in groups])
    if params.gating:
        thr = np.array([params.threshold(int(d)) for d in dof])
        accepted = d2 <= thr
    else:
        accepted = np.ones(len(groups), dtype=bool)

    if not accepted.any():
        report = InnovationReport(d2, dof, accepted, groups, z, np.zeros(NX))
        return state.copy(), report
    idx = np.concatenate([g for g, ok in zip(groups, accepted) if ok])
    Ss = S[np.ix_(idx, idx)]
    K = np.linalg.solve(Ss, Pxy[:, idx].T).T
    dx = K @ z[idx]
    x = state.x + dx
    P = state.P - K @ Ss @ K.T
    x, q_ref = _fold_mrp(x, state.q_ref)
    new = FilterState(x, q_ref, condition_covariance(P), state.t, state.a_ref)
    return new, InnovationReport(d2, dof, accepted, groups, z, dx)


def initialize_filter(frame: MeasurementFrame, knowledge: ServicerKnowledge, cam: CameraModel,
                      P0: np.ndarray, a_ref: float | None = None, t0: float = 0.0) -> FilterState:
    """Filter state from the regression-head pose of one frame.

    The target is assumed not to tumble: its inertial rate is zero, so the
    relative rate equals the servicer rate seen in target axes and the
    relative velocity is the transport term ``w_S x t``.
    """
    a_ref = knowledge.elements.a if a_ref is None else a_ref
    R_cs = cam.R_cs
    t_s = R_cs.T @ (frame.t_E - cam.t_sc)
    q_ts = quat_normalize(quat_mul(frame.q_E, cam.q_cs))
    feed: ServicerAttitudeFeed = knowledge.feed(t0)
    v_inertial_s = np.cross(feed.w, t_s)
    # relative velocity seen from the rotating RTN frame
    R_rtn_s = knowledge.R_s_rtn.T
    rho = R_rtn_s @ t_s
    w_rtn = R_rtn_s @ feed.w
    rho_dot = R_rtn_s @ v_inertial_s - np.cross(w_rtn, rho)
    roe = rtn_to_roe(RtnState(rho, rho_dot), knowledge.elements).as_array()
    w_st = quat_to_dcm(q_ts) @ feed.w
    x = np.concatenate([a_ref * roe, np.zeros(3), w_st])
    P0 = np.asarray(P0, dtype=float)
    if P0.shape != (NX, NX) or np.any(np.linalg.eigvalsh(P0) < 0):
        raise ValueError("P0 must be a 12x12 PSD matrix")
    return FilterState(x, q_ts, P0.copy(), t0, a_ref)


def with_params(params: UkfParams, **kw) -> UkfParams:
    return replace(params, **kw)
