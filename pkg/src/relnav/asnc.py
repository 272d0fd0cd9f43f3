"""Adaptive state noise compensation.

A sliding window of filter statistics gives a covariance-matching estimate
``Qhat`` of the realised process noise.  ``Qhat`` is usually indefinite, so
instead of using it directly the diagonal PSD that best reproduces it
through the analytical noise mapping is recovered with a box-constrained
weighted least-squares solve, and ``Q`` is rebuilt from that PSD.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .procnoise import assemble_Q, mapping_matrix, vech

BLOCKS = {"roe": slice(0, 6), "attitude": slice(6, 12)}


class WindowNotFull(RuntimeError):
    pass


class RankDeficient(ValueError):
    pass


@dataclass(frozen=True)
class PsdBounds:
    lower: np.ndarray = field(default_factory=lambda: np.zeros(3))
    upper: np.ndarray = field(default_factory=lambda: np.full(3, np.inf))

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValueError("bounds must be 3-vectors")
        if np.any(lo < 0) or np.any(hi < lo):
            raise ValueError("bounds must satisfy 0 <= lower <= upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)


class MatchWindow:
    """Ring buffer of ``(P_post, Phi, dx)`` plus the covariance before the oldest entry."""

    def __init__(self, size: int):
        if size < 1:
            raise ValueError("window size must be >= 1")
        self.size = size
        self._P = deque(maxlen=size + 1)
        self._phi = deque(maxlen=size)
        self._dx = deque(maxlen=size)

    def seed(self, P0: np.ndarray) -> None:
        """Record a covariance with no preceding transition (filter start)."""
        self._P.append(np.array(P0, dtype=float))

    def push(self, P_post: np.ndarray, phi: np.ndarray, dx: np.ndarray) -> None:
        if not self._P:
            raise RuntimeError("seed the window with the initial covariance first")
        self._P.append(np.array(P_post, dtype=float))
        self._phi.append(np.array(phi, dtype=float))
        self._dx.append(np.array(dx, dtype=float))

    @property
    def full(self) -> bool:
        return len(self._P) == self.size + 1

    def __len__(self) -> int:
        return len(self._phi)


def covariance_match(window: MatchWindow) -> np.ndarray:
    if not window.full:
        raise WindowNotFull(f"{len(window)} of {window.size} entries")
    P = list(window._P)
    acc = np.zeros_like(P[0])
    for i, (phi, dx) in enumerate(zip(window._phi, window._dx)):
        acc += P[i + 1] - phi @ P[i] @ phi.T + np.outer(dx, dx)
    Q = acc / window.size
    return 0.5 * (Q + Q.T)


def extract_block(Qhat: np.ndarray, block: str) -> np.ndarray:
    sl = BLOCKS[block]
    return vech(Qhat[sl, sl])


def _whitener(W_inv: np.ndarray) -> np.ndarray:
    """Matrix ``L`` with ``L.T @ L == W_inv``."""
    vals, vecs = np.linalg.eigh(0.5 * (W_inv + W_inv.T))
    if vals.min() < -1e-12 * max(vals.max(), 1.0):
        raise ValueError("weight matrix must be positive semidefinite")
    return (vecs * np.sqrt(np.clip(vals, 0, None))).T


def solve_bounded_wls(X, qhat, W_inv=None, bounds: PsdBounds | None = None, max_iter: int = 30):
    """Minimise ``(X q - qhat)^T W_inv (X q - qhat)`` over ``lower <= q <= upper``.

    Primal active-set iteration: variables sit either free or pinned to a
    bound; the free subproblem is an ordinary least-squares solve, and a
    pinned variable is released when its gradient points into the box.
    """
    X = np.asarray(X, dtype=float)
    qhat = np.asarray(qhat, dtype=float)
    bounds = bounds or PsdBounds()
    lo, hi = bounds.lower, bounds.upper
    L = np.eye(len(qhat)) if W_inv is None else _whitener(np.asarray(W_inv, dtype=float))
    A, b = L @ X, L @ qhat
    # column equilibration keeps the free solves well conditioned
    scale = np.linalg.norm(A, axis=0)
    if np.any(scale == 0) or np.linalg.matrix_rank(A / scale) < X.shape[1]:
        raise RankDeficient("noise mapping does not have full column rank")
    As = A / scale
    lo_s, hi_s = lo * scale, hi * scale
    m = X.shape[1]

    def obj(z):
        r = As @ z - b
        return float(r @ r)

    z = lo_s.copy()
    at_lo = np.ones(m, dtype=bool)
    at_hi = np.zeros(m, dtype=bool)
    best = (obj(z), z.copy())
    tol = 1e-12 * max(1.0, float(np.linalg.norm(b)) * float(np.linalg.norm(As)))
    for _ in range(max_iter):
        grad = As.T @ (As @ z - b)
        viol = np.where(at_lo, -grad, 0.0) + np.where(at_hi, grad, 0.0)
        j = int(np.argmax(viol))
        if viol[j] <= tol:
            break
        at_lo[j] = at_hi[j] = False
        # inner loop: solve on the free set, backtrack while infeasible
        for _ in range(max_iter):
            free = ~(at_lo | at_hi)
            rhs = b - As[:, ~free] @ z[~free]
            zf = np.linalg.lstsq(As[:, free], rhs, rcond=None)[0]
            cand = z.copy()
            cand[free] = zf
            if np.all(cand >= lo_s - 1e-15 * np.abs(lo_s)) and np.all(cand <= hi_s):
                z = np.clip(cand, lo_s, hi_s)
                break
            d = cand - z
            with np.errstate(divide="ignore", invalid="ignore"):
                step_lo = np.where(free & (d < 0), (lo_s - z) / d, np.inf)
                step_hi = np.where(free & (d > 0), (hi_s - z) / d, np.inf)
            alpha = float(min(step_lo.min(), step_hi.min(), 1.0))
            z = z + alpha * d
            hit_lo = free & (d < 0) & (step_lo <= alpha + 1e-14)
            hit_hi = free & (d > 0) & (step_hi <= alpha + 1e-14)
            z[hit_lo] = lo_s[hit_lo]
            z[hit_hi] = hi_s[hit_hi]
            at_lo |= hit_lo
            at_hi |= hit_hi
        f = obj(z)
        if f < best[0]:
            best = (f, z.copy())
    f = obj(z)
    z = z if f <= best[0] else best[1]
    return np.clip(z / scale, lo, hi)


@dataclass
class AsncResult:
    Q_roe: np.ndarray
    Q_att: np.ndarray
    psd_roe: np.ndarray
    psd_att: np.ndarray
    Qhat: np.ndarray


def asnc_update(window, X_roe, X_att, bounds_roe=None, bounds_att=None, W_inv_roe=None, W_inv_att=None):
    """Covariance matching followed by the two bounded PSD solves."""
    Qhat = covariance_match(window)
    out = {}
    for name, X, bnd, W in (
        ("roe", X_roe, bounds_roe, W_inv_roe),
        ("attitude", X_att, bounds_att, W_inv_att),
    ):
        psd = solve_bounded_wls(mapping_matrix(X), extract_block(Qhat, name), W, bnd)
        out[name] = (assemble_Q(X, psd), psd)
    return AsncResult(out["roe"][0], out["attitude"][0], out["roe"][1], out["attitude"][1], Qhat)
