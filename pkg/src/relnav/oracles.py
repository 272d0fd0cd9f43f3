"""Independent numerical references for the analytical noise models.

Everything here is brute force on purpose: direct quadrature of the defining
integrals, matrix exponentials from scipy and finite differences of the
element conversions.  The ``verify`` command and the test-suite compare the
closed forms against these.
"""

from __future__ import annotations

import time

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import expm

from .attmath import skew
from .orbitmech import (
    EquinoctialElements,
    KeplerianElements,
    cartesian_to_equinoctial,
    equinoctial_to_cartesian,
    gve_gamma,
    kepler_to_equinoctial,
    rtn_basis,
    wrap_pi,
)
from .procnoise import ZETA_NAMES, attitude_X, roe_jacobian, roe_X_prime, zeta_set

N_QUAD = 100_000


def _trapezoid(y, h):
    return h * (0.5 * y[0] + 0.5 * y[-1] + y[1:-1].sum())


def quad_richardson(y, T):
    """Trapezoid on ``N`` intervals, extrapolated with the ``N/2`` rule."""
    n = len(y) - 1
    if n % 2:
        raise ValueError("need an even number of intervals")
    h = T / n
    return (4 * _trapezoid(y, h) - _trapezoid(y[::2], 2 * h)) / 3


def zeta_integrands(w1: float, w2: float, s: np.ndarray) -> dict:
    """Integrands of the eighteen coefficients at lags ``s = t_k - tau``."""
    if w1 == 0.0:
        a = np.zeros_like(s)
        b = np.zeros_like(s)
    else:
        a = 2 * np.sin(0.5 * w1 * s) ** 2 / w1
        y = w1 * s
        small = y < 1e-2
        ys = np.where(small, 1e-2, y)
        b = np.where(
            small,
            w1**2 * s**3 / 6 - w1**4 * s**5 / 120 + w1**6 * s**7 / 5040,
            s - np.sin(ys) / w1,
        )
    g = 2 * np.sin(0.5 * w2 * s) ** 2
    h = np.sin(w2 * s)
    return dict(
        c1=a, s1=b, tc1=s * a, ts1=s * b, c1c1=a * a, s1s1=b * b, c1s1=a * b,
        c2=g, s2=-h, tc2=s * g, ts2=-s * h, c2c2=g * g, s2s2=h * h, c2s2=-g * h,
        c1c2=a * g, c1s2=-a * h, s1c2=b * g, s1s2=-b * h,
    )


def zeta_oracle(w1: float, w2: float, dt: float, n: int = N_QUAD) -> dict:
    s = np.linspace(0.0, dt, n + 1)
    f = zeta_integrands(w1, w2, s)
    out = {}
    for k in ZETA_NAMES:
        out[k] = quad_richardson(f[k], dt)
        out["|" + k + "|"] = quad_richardson(np.abs(f[k]), dt)
    return out


def zeta_errors(w_grid, dt_grid, n: int = N_QUAD):
    """Worst relative error of every coefficient over a grid of (w1, w2, dt).

    Errors are relative to the integral of the absolute integrand so that
    coefficients crossing zero are not penalised for the crossing.
    """
    worst = {k: (0.0, None) for k in ZETA_NAMES}
    for dt in dt_grid:
        for w1 in w_grid:
            for w2 in w_grid:
                ref = zeta_oracle(w1, w2, dt, n)
                z = zeta_set(w1, w2, dt)
                for k in ZETA_NAMES:
                    scale = ref["|" + k + "|"]
                    err = abs(z[k] - ref[k]) / scale if scale > 0 else abs(z[k])
                    if err > worst[k][0]:
                        worst[k] = (err, (w1, w2, dt))
    return worst


# ---------------------------------------------------------------------------
# attitude


def lambda1_expm(w1, t: float) -> np.ndarray:
    """``int_0^t exp([w1]x s) ds`` from the augmented-matrix exponential."""
    M = np.zeros((6, 6))
    M[:3, :3] = skew(np.asarray(w1, dtype=float))
    M[:3, 3:] = np.eye(3)
    return expm(M * t)[:3, 3:]


def attitude_X_oracle(w1, w2, inertia, dt: float, n: int = 2000):
    """Simpson quadrature of ``Gamma(s) e_i e_i^T Gamma(s)^T / I_i^2``."""
    s = np.linspace(0.0, dt, n + 1)
    G = np.empty((n + 1, 6, 3))
    W2 = skew(np.asarray(w2, dtype=float))
    for j, sj in enumerate(s):
        G[j, :3] = lambda1_expm(w1, sj)
        G[j, 3:] = -expm(-W2 * sj)
    out = []
    for i in range(3):
        col = G[:, :, i] / inertia[i, i]
        integrand = np.einsum("na,nb->nab", col, col)
        out.append(simpson(integrand, x=s, axis=0))
    return out


def attitude_X_errors(cases, inertia, n: int = 2000):
    worst = 0.0
    for w1, w2, dt in cases:
        ana = attitude_X(w1, w2, inertia, dt)
        ref = attitude_X_oracle(w1, w2, inertia, dt, n)
        for A, R in zip(ana, ref):
            worst = max(worst, np.linalg.norm(A - R) / np.linalg.norm(R))
    return worst


# ---------------------------------------------------------------------------
# orbit


def gve_fd(q: EquinoctialElements, dv: float = 0.1) -> np.ndarray:
    """Element response to unit RTN velocity impulses by central differences."""
    r, v = equinoctial_to_cartesian(q)
    C = rtn_basis(r, v)
    G = np.empty((6, 3))
    for j in range(3):
        hi = cartesian_to_equinoctial(r, v + dv * C[j]).as_array()
        lo = cartesian_to_equinoctial(r, v - dv * C[j]).as_array()
        d = hi - lo
        d[5] = wrap_pi(d[5])
        G[:, j] = d / (2 * dv)
    return G


def gve_errors(q: EquinoctialElements, dv: float = 0.1) -> float:
    """Worst per-row relative difference between analytic and finite-difference GVE."""
    A = gve_gamma(q)
    F = gve_fd(q, dv)
    err = 0.0
    for row_a, row_f in zip(A, F):
        scale = np.linalg.norm(row_f)
        if scale > 0:
            err = max(err, np.linalg.norm(row_a - row_f) / scale)
    return err


def roe_X_oracle(q: EquinoctialElements, dt: float, n: int = 2000, dv: float = 0.1):
    """Quadrature of ``Phi(s) Gamma e_i e_i^T Gamma^T Phi(s)^T`` in ROE space.

    ``Gamma`` comes from finite differences and is held at its value at the
    start of the interval; ``Phi`` is the Keplerian element-difference STM.
    """
    G = gve_fd(q, dv)
    s = np.linspace(0.0, dt, n + 1)
    phi = np.broadcast_to(np.eye(6), (n + 1, 6, 6)).copy()
    phi[:, 5, 0] = -1.5 * q.n / q.a * s
    J = roe_jacobian(q.a)
    out = []
    for i in range(3):
        col = phi @ G[:, i]
        integrand = np.einsum("na,nb->nab", col, col)
        out.append(J @ simpson(integrand, x=s, axis=0) @ J.T)
    return out


def roe_X_errors(q: EquinoctialElements, dt: float) -> float:
    J = roe_jacobian(q.a)
    ana = [J @ X @ J.T for X in roe_X_prime(q, dt)]
    ref = roe_X_oracle(q, dt)
    return max(np.linalg.norm(A - R) / np.linalg.norm(R) for A, R in zip(ana, ref))


# ---------------------------------------------------------------------------
# bounded least squares


def wls_grid_min(X, qhat, W_inv, lower, upper, n: int = 50):
    """Smallest weighted objective over an ``n^3`` lattice spanning the box."""
    axes = [np.linspace(lo, hi, n) for lo, hi in zip(lower, upper)]
    Z = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    R = Z @ np.asarray(X).T - qhat
    f = np.einsum("ka,ab,kb->k", R, W_inv, R)
    k = int(np.argmin(f))
    return float(f[k]), Z[k]


def wls_objective(X, qhat, W_inv, q) -> float:
    r = np.asarray(X) @ q - qhat
    return float(r @ W_inv @ r)


# ---------------------------------------------------------------------------
# bundled suite


ZETA_W = (0.0, 1e-7, 0.0175, 0.5, 3.0)
ZETA_DT = (1.0, 5.0, 10.0)
TANGO = np.diag([2.69, 3.46, 3.11])
ATT_CASES = (
    (np.zeros(3), np.zeros(3), 5.0),
    (np.radians([1.0, 0.0, 0.0]), np.radians([0.0, 0.06, 0.0]), 5.0),
    (np.radians([0.3, -0.4, 0.6]), np.radians([0.02, 0.05, -0.03]), 5.0),
    (np.radians([5.0, 2.0, -3.0]), np.radians([5.0, 2.0, -3.0]), 10.0),
    (np.radians([20.0, -10.0, 5.0]), np.radians([0.0, 0.0, 0.06]), 1.0),
)
REF_SERVICER = KeplerianElements(
    a=7078135.0, e=0.001, i=np.radians(98.2), raan=np.radians(189.9), argp=0.0, M=0.0
)


def run_all(verbose: bool = True) -> dict:
    """Run every oracle comparison; returns ``{name: (worst_error, tol, seconds)}``."""
    results = {}

    t0 = time.perf_counter()
    zw = zeta_errors(ZETA_W, ZETA_DT)
    results["zeta"] = (max(e for e, _ in zw.values()), 1e-9, time.perf_counter() - t0)

    t0 = time.perf_counter()
    results["attitude_X"] = (attitude_X_errors(ATT_CASES, TANGO), 1e-8, time.perf_counter() - t0)

    q = kepler_to_equinoctial(REF_SERVICER)
    t0 = time.perf_counter()
    results["gve_fd"] = (gve_errors(q), 1e-6, time.perf_counter() - t0)

    t0 = time.perf_counter()
    results["roe_X"] = (roe_X_errors(q, 5.0), 1e-6, time.perf_counter() - t0)

    if verbose:
        for name, (err, tol, sec) in results.items():
            flag = "PASS" if err <= tol else "FAIL"
            print(f"{flag}  {name:<11s} worst rel. error {err:.2e} (tol {tol:.0e}, {sec:.1f} s)")
    return results
