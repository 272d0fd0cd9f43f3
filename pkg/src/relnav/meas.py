"""Camera measurement model and a statistical stand-in for the pose CNN.

Frames: ``S`` servicer body, ``C`` camera, ``T`` target principal axes.
The filter state carries ``q_TS`` and the target position in servicer axes;
a frame delivers

* ``K`` keypoint pixels with 2x2 covariances (heatmap head),
* the target position in camera axes ``t_E`` and the attitude ``q_E = q_TC``
  with a 6x6 covariance in (translation, MRP) space (regression head).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .attmath import (
    quat_conj,
    quat_from_rotvec,
    quat_identity,
    quat_mul,
    quat_normalize,
    quat_to_dcm,
)

COV_FLOOR = 0.25  # px^2


class BehindCamera(ValueError):
    pass


class EmptyHeatmap(ValueError):
    pass


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera rigidly mounted on the servicer.

    ``q_cs`` rotates servicer axes into camera axes and ``t_sc`` is the
    servicer origin expressed in camera axes (``t_{S/C}^C``).
    """

    fx: float = 3003.4
    fy: float = 3003.4
    cx: float = 960.0
    cy: float = 600.0
    width: int = 1920
    height: int = 1200
    q_cs: np.ndarray = field(default_factory=quat_identity)
    t_sc: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if abs(np.linalg.norm(self.q_cs) - 1) > 1e-9:
            raise ValueError("extrinsic quaternion must be unit norm")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0, self.cx], [0, self.fy, self.cy], [0, 0, 1.0]])

    @property
    def R_cs(self) -> np.ndarray:
        return quat_to_dcm(self.q_cs)


def load_keypoints(path=None) -> np.ndarray:
    """Read a ``id x y z`` table; the bundled mock geometry by default."""
    if path is None:
        with resources.files("relnav.data").joinpath("tango_keypoints.txt").open() as fh:
            rows = np.loadtxt(fh, comments="#")
    else:
        rows = np.loadtxt(path, comments="#")
    rows = np.atleast_2d(rows)
    order = np.argsort(rows[:, 0], kind="stable")
    kps = rows[order, 1:4]
    if len(kps) < 4:
        raise ValueError("need at least four keypoints")
    return kps


# ---------------------------------------------------------------------------
# geometry


def servicer_to_camera(t_s, q_ts, cam: CameraModel):
    """Target position and attitude relative to the camera (broadcasts)."""
    t_c = np.einsum("ij,...j->...i", cam.R_cs, t_s) + cam.t_sc
    q_tc = quat_mul(q_ts, quat_conj(cam.q_cs))
    return t_c, q_tc


def project_keypoints(R_ct, t_c, cam: CameraModel, kps: np.ndarray, strict: bool = False):
    """Pinhole projection of target keypoints.

    ``R_ct`` maps target axes to camera axes and ``t_c`` is the target
    origin in camera axes; both may carry leading batch axes.  Returns
    pixels of shape ``(..., K, 2)`` and a boolean mask of keypoints in front
    of the camera (``strict=True`` raises instead).
    """
    pc = np.einsum("...ij,kj->...ki", R_ct, kps) + np.asarray(t_c)[..., None, :]
    z = pc[..., 2]
    valid = z > 1e-6
    if strict and not np.all(valid):
        raise BehindCamera(f"keypoints {np.flatnonzero(~valid)} behind the camera")
    zs = np.where(valid, z, 1.0)
    u = cam.fx * pc[..., 0] / zs + cam.cx
    v = cam.fy * pc[..., 1] / zs + cam.cy
    return np.stack([u, v], axis=-1), valid


def predict_pixels(t_s, q_ts, cam: CameraModel, kps: np.ndarray):
    t_c, q_tc = servicer_to_camera(t_s, q_ts, cam)
    R_ct = np.swapaxes(quat_to_dcm(q_tc), -1, -2)
    pix, _ = project_keypoints(R_ct, t_c, cam, kps)
    return pix, t_c, q_tc


# ---------------------------------------------------------------------------
# heatmaps


def heatmap_covariance(heatmap: np.ndarray):
    """Peak pixel ``(x, y)`` and the intensity-weighted covariance about it."""
    H = np.asarray(heatmap, dtype=float)
    if np.any(H < 0):
        raise ValueError("heatmap must be nonnegative")
    total = H.sum()
    if not total > 0:
        raise EmptyHeatmap("heatmap has no positive pixel")
    r, c = np.unravel_index(int(np.argmax(H)), H.shape)
    w = H / total
    ys, xs = np.mgrid[0 : H.shape[0], 0 : H.shape[1]]
    dx, dy = xs - c, ys - r
    cov = np.array(
        [
            [np.sum(w * dx * dx), np.sum(w * dx * dy)],
            [np.sum(w * dx * dy), np.sum(w * dy * dy)],
        ]
    )
    return np.array([float(c), float(r)]), cov


def render_heatmap(center, cov, size: int = 31):
    """Gaussian blob on a ``size x size`` patch; returns the patch and its origin."""
    half = size // 2
    c0 = np.round(center).astype(int) - half
    ys, xs = np.mgrid[0:size, 0:size]
    d = np.stack([xs + c0[0] - center[0], ys + c0[1] - center[1]], axis=-1)
    P = np.linalg.inv(cov)
    H = np.exp(-0.5 * np.einsum("...i,ij,...j->...", d, P, d))
    return H, c0


# ---------------------------------------------------------------------------
# CNN emulator


@dataclass(frozen=True)
class EmulatorConfig:
    """Noise model of the emulated CNN heads.

    Nominal errors are zero-mean Gaussian; with the stated probabilities a
    sample is replaced by a gross error instead.  Rotation gross errors have
    a uniformly random axis and an angle uniform in ``gross_angle_deg``.
    """

    kp_sigma_px: float = 1.0
    kp_outlier_prob: float = 0.0
    t_sigma: tuple = (0.0194, 0.0194, 0.0194)
    t_gross_sigma: float = 0.0
    t_outlier_prob: float = 0.0
    rot_sigma_deg: float = 0.5545
    rot_outlier_prob: float = 0.0
    gross_angle_deg: tuple = (30.0, 180.0)
    rasterize: bool = False
    name: str = "custom"

    def __post_init__(self):
        for p in (self.kp_outlier_prob, self.t_outlier_prob, self.rot_outlier_prob):
            if not 0 <= p <= 1:
                raise ValueError("probabilities must lie in [0, 1]")
        if self.kp_sigma_px < 0 or self.rot_sigma_deg < 0 or min(self.t_sigma) < 0:
            raise ValueError("noise levels must be nonnegative")


# Regression-head rows are two-component mixtures whose first and second
# moments of E_t and E_q match the reported flight-model statistics.
PRESETS = {
    "synthetic": EmulatorConfig(
        kp_sigma_px=1.0,
        kp_outlier_prob=0.01,
        t_sigma=(0.0194,) * 3,
        rot_sigma_deg=0.5545,
        name="synthetic",
    ),
    "lightbox-roe2": EmulatorConfig(
        kp_sigma_px=2.0,
        kp_outlier_prob=0.05,
        t_sigma=(0.0491,) * 3,
        t_gross_sigma=0.32,
        t_outlier_prob=0.05,
        rot_sigma_deg=2.0,
        rot_outlier_prob=0.0223,
        gross_angle_deg=(30.0, 180.0),
        name="lightbox-roe2",
    ),
    "lightbox-roe1": EmulatorConfig(
        kp_sigma_px=3.0,
        kp_outlier_prob=0.10,
        t_sigma=(0.0922,) * 3,
        t_gross_sigma=0.44,
        t_outlier_prob=0.05,
        rot_sigma_deg=3.0,
        rot_outlier_prob=0.0893,
        gross_angle_deg=(120.0, 180.0),
        name="lightbox-roe1",
    ),
}

# default covariance of the regression head (translation m^2, MRP rad^2)
C_E_SYN = np.diag([0.0194**2] * 3 + [np.radians(0.5545) ** 2] * 3)


def noiseless(cfg: EmulatorConfig | None = None) -> EmulatorConfig:
    base = cfg or EmulatorConfig()
    return replace(
        base, kp_sigma_px=0.0, kp_outlier_prob=0.0, t_sigma=(0.0, 0.0, 0.0),
        t_outlier_prob=0.0, rot_sigma_deg=0.0, rot_outlier_prob=0.0,
    )


@dataclass
class MeasurementFrame:
    keypoints: np.ndarray  # (K, 2) px
    kp_cov: np.ndarray  # (K, 2, 2) px^2
    kp_valid: np.ndarray  # (K,) bool
    t_E: np.ndarray  # (3,) m, camera axes
    q_E: np.ndarray  # (4,) q_TC
    C_E: np.ndarray  # (6, 6)
    timestamp: float = 0.0

    @property
    def n_keypoints(self) -> int:
        return int(self.kp_valid.sum())


def _random_unit(rng) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def emulate_cnn(t_c, q_tc, cam: CameraModel, kps, cfg: EmulatorConfig, rng, timestamp=0.0,
                C_E=None) -> MeasurementFrame:
    """Draw one noisy frame around the true camera-relative pose."""
    R_ct = quat_to_dcm(q_tc).T
    pix, valid = project_keypoints(R_ct, t_c, cam, kps)
    K = len(kps)
    var = max(cfg.kp_sigma_px**2, COV_FLOOR) if cfg.kp_sigma_px > 0 else COV_FLOOR
    cov = np.broadcast_to(np.eye(2) * var, (K, 2, 2)).copy()
    noisy = pix + cfg.kp_sigma_px * rng.normal(size=(K, 2))
    out = rng.random(K) < cfg.kp_outlier_prob
    if np.any(out):
        noisy[out] = rng.uniform([0, 0], [cam.width, cam.height], size=(int(out.sum()), 2))
    if cfg.rasterize:
        for j in range(K):
            H, origin = render_heatmap(noisy[j], cov[j])
            peak, cj = heatmap_covariance(H)
            noisy[j] = peak + origin
            cov[j] = cj + np.eye(2) * COV_FLOOR

    if rng.random() < cfg.t_outlier_prob:
        dt = cfg.t_gross_sigma * rng.normal(size=3)
    else:
        dt = np.asarray(cfg.t_sigma) * rng.normal(size=3)
    if rng.random() < cfg.rot_outlier_prob:
        ang = np.radians(rng.uniform(*cfg.gross_angle_deg))
        rv = ang * _random_unit(rng)
    else:
        rv = np.radians(cfg.rot_sigma_deg) * rng.normal(size=3)
    q_E = quat_normalize(quat_mul(quat_from_rotvec(rv), q_tc))
    return MeasurementFrame(
        keypoints=noisy,
        kp_cov=cov,
        kp_valid=valid.copy(),
        t_E=np.asarray(t_c, dtype=float) + dt,
        q_E=q_E,
        C_E=C_E_SYN.copy() if C_E is None else np.asarray(C_E, dtype=float),
        timestamp=timestamp,
    )


def build_R(frame: MeasurementFrame, a_scale: float = 1000.0) -> np.ndarray:
    """Block-diagonal noise: valid keypoint blocks first, then ``a * C_E``."""
    blocks = [frame.kp_cov[j] for j in np.flatnonzero(frame.kp_valid)]
    n = 2 * len(blocks) + 6
    R = np.zeros((n, n))
    for j, b in enumerate(blocks):
        R[2 * j : 2 * j + 2, 2 * j : 2 * j + 2] = b
    R[-6:, -6:] = a_scale * frame.C_E
    return R
