"""Analytical process-noise models for the attitude and ROE states.

Both models map a diagonal white-noise PSD ``qt = (q1, q2, q3)`` to a
discrete covariance ``Q = sum_i X^i qt_i``.  For the attitude block the
noise is a torque on the target, so ``X^i`` carries ``1 / I_i^2``.

The attitude mapping is built from eighteen scalar integrals ("zeta
coefficients") of products of

    a(s) = (1 - cos w1 s) / w1      b(s) = s - sin(w1 s) / w1
    g(s) = 1 - cos w2 s             h(s) = sin w2 s

over ``s`` in ``[0, dt]``.  Their closed forms suffer catastrophic
cancellation for small ``w dt`` and the cross terms are singular at
``w1 == w2``, so evaluation works in the dimensionless ``x = w dt``:

* ``max(x1, x2) <= SERIES_MAX``: truncated power series in ``u = s/dt``,
  multiplied coefficient-wise and integrated term by term;
* otherwise the closed forms, swapping in product-to-sum identities near
  resonance and moment recurrences when one frequency is small.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attmath import rodrigues_exp, skew
from .orbitmech import EquinoctialElements, gve_gamma

SERIES_MAX = 8.0
CLOSED_MIN = 1.0
RESONANCE_GAP = 1.0
NTERMS = 72

ZETA_NAMES = (
    "c1", "s1", "tc1", "ts1", "c1c1", "s1s1", "c1s1",
    "c2", "s2", "tc2", "ts2", "c2c2", "s2s2", "c2s2",
    "c1c2", "c1s2", "s1c2", "s1s2",
)
# power of dt that turns each dimensionless integral into its zeta value
_DT_POWER = dict(
    c1=2, s1=2, tc1=3, ts1=3, c1c1=3, s1s1=3, c1s1=3,
    c2=1, s2=1, tc2=2, ts2=2, c2c2=1, s2s2=1, c2s2=1,
    c1c2=2, c1s2=2, s1c2=2, s1s2=2,
)


@dataclass(frozen=True)
class ZetaSet:
    w1: float
    w2: float
    dt: float
    values: dict

    def __getitem__(self, key: str) -> float:
        return self.values[key]


# ---------------------------------------------------------------------------
# polynomial (power-series) arithmetic on coefficient arrays in u


def _mul(p, q):
    return np.convolve(p, q)[:NTERMS]


def _integral(p) -> float:
    return float(np.sum(p / np.arange(1, len(p) + 1)))


def _powers(x):
    """``x**n / n!`` for n = 0 .. NTERMS-1, built without overflow."""
    out = np.empty(NTERMS)
    out[0] = 1.0
    for n in range(1, NTERMS):
        out[n] = out[n - 1] * x / n
    return out


def _series_funcs(x1, x2):
    n = np.arange(NTERMS)
    sign_even = np.where(n % 4 == 0, 1.0, -1.0)  # (-1)^(n/2) on even n
    sign_odd = np.where(n % 4 == 1, 1.0, -1.0)  # (-1)^((n-1)/2) on odd n
    even, odd = n % 2 == 0, n % 2 == 1

    p1 = _powers(x1)
    # (1 - cos x1 u)/x1 : -(-1)^k x1^(2k-1)/(2k)!, k >= 1
    A = np.zeros(NTERMS)
    k = n[even & (n > 0)]
    A[k] = -sign_even[k] * p1[k - 1] / k
    # u - sin(x1 u)/x1 : -(-1)^k x1^(2k)/(2k+1)!, k >= 1
    B = np.zeros(NTERMS)
    k = n[odd & (n > 1)]
    B[k] = -sign_odd[k] * p1[k - 1] / k
    p2 = _powers(x2)
    G = np.zeros(NTERMS)
    k = n[even & (n > 0)]
    G[k] = -sign_even[k] * p2[k]
    S = np.zeros(NTERMS)
    S[odd] = sign_odd[odd] * p2[odd]
    U = np.zeros(NTERMS)
    U[1] = 1.0
    return A, B, G, S, U


def _zeta_series(x1, x2) -> dict:
    A, B, G, S, U = _series_funcs(x1, x2)
    I = _integral
    return dict(
        c1=I(A), s1=I(B), tc1=I(_mul(U, A)), ts1=I(_mul(U, B)),
        c1c1=I(_mul(A, A)), s1s1=I(_mul(B, B)), c1s1=I(_mul(A, B)),
        c2=I(G), s2=-I(S), tc2=I(_mul(U, G)), ts2=-I(_mul(U, S)),
        c2c2=I(_mul(G, G)), s2s2=I(_mul(S, S)), c2s2=-I(_mul(G, S)),
        c1c2=I(_mul(A, G)), c1s2=-I(_mul(A, S)),
        s1c2=I(_mul(B, G)), s1s2=-I(_mul(B, S)),
    )


# ---------------------------------------------------------------------------
# closed forms (dt = 1, w = x)


def _closed_single1(x) -> dict:
    s, c = np.sin(x), np.cos(x)
    return dict(
        c1=(1 - s / x) / x,
        s1=0.5 + (c - 1) / x**2,
        tc1=(0.5 + (1 - c - x * s) / x**2) / x,
        ts1=1 / 3 + (c - s / x) / x**2,
        c1c1=(1.5 + s * (c - 4) / (2 * x)) / x**2,
        s1s1=1 / 3 + (0.5 + 2 * c - 2 * s / x - s * c / (2 * x)) / x**2,
        c1s1=(s - x) ** 2 / (2 * x**3),
    )


def _closed_single2(x) -> dict:
    s, c = np.sin(x), np.cos(x)
    return dict(
        c2=1 - s / x,
        s2=(c - 1) / x,
        tc2=0.5 + (1 - c - x * s) / x**2,
        ts2=(c - s / x) / x,
        c2c2=1.5 + s * (c - 4) / (2 * x),
        s2s2=0.5 - s * c / (2 * x),
        c2s2=-((1 - c) ** 2) / (2 * x),
    )


def _closed_cross(x1, x2, z) -> dict:
    s1, c1, s2, c2 = np.sin(x1), np.cos(x1), np.sin(x2), np.cos(x2)
    d = x1**2 - x2**2
    return dict(
        c1c2=(-1 + x1 * z["c1"] + z["c2"] + (x1 * s1 * c2 - x2 * c1 * s2) / d) / x1,
        c1s2=(z["s2"] + (x1 * s1 * s2 + x2 * c1 * c2 - x2) / d) / x1,
        s1c2=-0.5 + z["s1"] + z["tc2"] + (x2 * s1 * s2 + x1 * c1 * c2 - x1) / (-d) / x1,
        s1s2=z["ts2"] + (x2 * s1 * c2 - x1 * c1 * s2) / d / x1,
    )


def _sinc(y):
    return np.sinc(y / np.pi)


def _cosc(y):
    """(1 - cos y)/y, odd in y, evaluated without cancellation."""
    if y == 0:
        return 0.0
    return 2.0 * np.sin(0.5 * y) ** 2 / y


def _cross_product_to_sum(x1, x2) -> dict:
    """Cross integrals via product-to-sum identities; regular at x1 == x2."""
    ccc = 0.5 * (_sinc(x1 - x2) + _sinc(x1 + x2))
    ccs = 0.5 * (_cosc(x1 + x2) + _cosc(x2 - x1))
    csc = 0.5 * (_cosc(x1 + x2) + _cosc(x1 - x2))
    css = 0.5 * (_sinc(x1 - x2) - _sinc(x1 + x2))
    int_u_cos = np.sin(x2) / x2 + (np.cos(x2) - 1) / x2**2
    int_u_sin = -np.cos(x2) / x2 + np.sin(x2) / x2**2
    return dict(
        c1c2=(1 - _sinc(x1) - _sinc(x2) + ccc) / x1,
        c1s2=-(_cosc(x2) - ccs) / x1,
        s1c2=(0.5 - int_u_cos) - (_cosc(x1) - csc) / x1,
        s1s2=-(int_u_sin - css / x1),
    )


def trig_moments(x, nmax):
    """``(C_n, S_n) = int_0^1 u^n (cos xu, sin xu) du`` for n = 0..nmax.

    Forward recurrence while ``n <= x`` and Miller-style backward recurrence
    above, so that both branches stay stable.
    """
    eix = np.exp(1j * x)
    ix = 1j * x
    E = np.zeros(nmax + 1, dtype=complex)
    E[0] = (eix - 1) / ix
    nf = min(int(np.floor(x)), nmax)
    for n in range(1, nf + 1):
        E[n] = eix / ix - n / ix * E[n - 1]
    if nf < nmax:
        top = nmax + 80 + int(x)
        e = 0.0 + 0.0j
        for n in range(top, nf, -1):
            # E_{n-1} = (e^{ix} - ix E_n) / n
            e = (eix - ix * e) / n
            if n - 1 <= nmax and n - 1 > nf:
                E[n - 1] = e
    return E.real, E.imag


def _cross_mixed(x1, x2) -> dict:
    A, B, G, S, U = _series_funcs(x1, x2)
    if x1 < x2:
        C, Sn = trig_moments(x2, NTERMS - 1)
        iA, iB = _integral(A), _integral(B)
        return dict(
            c1c2=iA - A @ C,
            c1s2=-(A @ Sn),
            s1c2=iB - B @ C,
            s1s2=-(B @ Sn),
        )
    C, Sn = trig_moments(x1, NTERMS - 1)
    iG, iS = _integral(G), _integral(S)
    iUG, iUS = _integral(_mul(U, G)), _integral(_mul(U, S))
    return dict(
        c1c2=(iG - G @ C) / x1,
        c1s2=-(iS - S @ C) / x1,
        s1c2=iUG - (G @ Sn) / x1,
        s1s2=-(iUS - (S @ Sn) / x1),
    )


def zeta_dimensionless(x1: float, x2: float) -> dict:
    """The eighteen integrals for ``dt = 1`` and angles ``x1``, ``x2``."""
    x1, x2 = float(abs(x1)), float(abs(x2))
    if max(x1, x2) <= SERIES_MAX:
        return _zeta_series(x1, x2)
    series = None
    z = {}
    if x1 >= CLOSED_MIN:
        z.update(_closed_single1(x1))
    else:
        series = _zeta_series(x1, x2)
        z.update({k: series[k] for k in ("c1", "s1", "tc1", "ts1", "c1c1", "s1s1", "c1s1")})
    if x2 >= CLOSED_MIN:
        z.update(_closed_single2(x2))
    else:
        series = series or _zeta_series(x1, x2)
        z.update({k: series[k] for k in ("c2", "s2", "tc2", "ts2", "c2c2", "s2s2", "c2s2")})
    if min(x1, x2) < CLOSED_MIN:
        z.update(_cross_mixed(x1, x2))
    elif abs(x1 - x2) >= RESONANCE_GAP:
        z.update(_closed_cross(x1, x2, z))
    else:
        z.update(_cross_product_to_sum(x1, x2))
    return z


def zeta_set(w1: float, w2: float, dt: float) -> ZetaSet:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if w1 < 0 or w2 < 0:
        raise ValueError("rate magnitudes must be nonnegative")
    z = zeta_dimensionless(w1 * dt, w2 * dt)
    vals = {k: float(z[k]) * dt ** _DT_POWER[k] for k in ZETA_NAMES}
    return ZetaSet(float(w1), float(w2), float(dt), vals)


# ---------------------------------------------------------------------------
# attitude mapping


def lambda1(w1, t: float) -> np.ndarray:
    """``int_0^t exp([w1]x s) ds``."""
    w1 = np.asarray(w1, dtype=float)
    wn = float(np.linalg.norm(w1))
    if wn * t < 1e-6:
        K = skew(w1)
        return np.eye(3) * t + 0.5 * t * t * K + t**3 / 6 * K @ K
    Wh = skew(w1 / wn)
    return (
        np.eye(3) * t
        + 2 * np.sin(0.5 * wn * t) ** 2 / wn * Wh
        + (t - np.sin(wn * t) / wn) * Wh @ Wh
    )


def lambda2(w2, t: float) -> np.ndarray:
    """``-exp(-[w2]x t)``."""
    return -rodrigues_exp(-np.asarray(w2, dtype=float) * t)


def _unit_skews(w):
    wn = float(np.linalg.norm(w))
    if wn == 0.0:
        return wn, np.zeros((3, 3)), np.zeros((3, 3))
    W = skew(np.asarray(w, dtype=float) / wn)
    return wn, W, W @ W


def attitude_X(w1, w2, inertia, dt: float):
    """Noise mappings ``[X^x, X^y, X^z]`` (6x6 each) for the ``(dp, w)`` block.

    ``w1`` is the servicer-relative-to-target rate in target axes and ``w2``
    the servicer rate rotated into target axes.
    """
    n1, W1, V1 = _unit_skews(w1)
    n2, W2, V2 = _unit_skews(w2)
    z = zeta_set(n1, n2, dt)
    T = dt
    out = []
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0
        w1c, v1c, w2c, v2c = W1[:, i], V1[:, i], W2[:, i], V2[:, i]
        o = np.outer

        def sym(a, b):
            return o(a, b) + o(b, a)

        A = (
            T**3 / 3 * o(e, e)
            + z["c1c1"] * o(w1c, w1c)
            + z["s1s1"] * o(v1c, v1c)
            + z["tc1"] * sym(e, w1c)
            + z["ts1"] * sym(e, v1c)
            + z["c1s1"] * sym(w1c, v1c)
        )
        B = -(
            T**2 / 2 * o(e, e)
            + z["ts2"] * o(e, w2c)
            + z["tc2"] * o(e, v2c)
            + z["c1"] * o(w1c, e)
            + z["c1s2"] * o(w1c, w2c)
            + z["c1c2"] * o(w1c, v2c)
            + z["s1"] * o(v1c, e)
            + z["s1s2"] * o(v1c, w2c)
            + z["s1c2"] * o(v1c, v2c)
        )
        C = (
            T * o(e, e)
            + z["c2c2"] * o(v2c, v2c)
            + z["s2s2"] * o(w2c, w2c)
            + z["c2"] * sym(e, v2c)
            + z["s2"] * sym(e, w2c)
            + z["c2s2"] * sym(w2c, v2c)
        )
        X = np.block([[A, B], [B.T, C]]) / inertia[i, i] ** 2
        out.append(0.5 * (X + X.T))
    return out


def attitude_stm(w1, w2, dt: float) -> np.ndarray:
    """Linearised STM of ``(dp, dw)`` over ``dt`` with frozen rates."""
    phi = np.zeros((6, 6))
    phi[:3, :3] = rodrigues_exp(np.asarray(w1, dtype=float) * dt)
    phi[:3, 3:] = -lambda1(w1, dt)
    phi[3:, 3:] = rodrigues_exp(-np.asarray(w2, dtype=float) * dt)
    return phi


# ---------------------------------------------------------------------------
# ROE mapping


def roe_jacobian(a: float) -> np.ndarray:
    """d(ROE)/d(element difference) with element order (a, ex, ey, ix, iy, lam)."""
    J = np.zeros((6, 6))
    J[0, 0] = 1.0 / a
    J[1, 5] = 1.0
    J[2:, 1:5] = np.eye(4)
    return J


def roe_X_prime(servicer: EquinoctialElements, dt: float, gamma=None):
    """Mappings for the plain element difference ``alpha_T - alpha_S``."""
    G = gve_gamma(servicer) if gamma is None else gamma
    a, n = servicer.a, servicer.n
    k = 3 * n * dt**2 / (4 * a)
    out = []
    for col in range(3):
        g = G[:, col]
        X = dt * np.outer(g, g)
        if col < 2:
            lead, lam = g[0], g[5]
            S = -lead * g[:5]
            S[3:] = 0.0
            X[:5, 5] += k * S
            X[5, :5] += k * S
            X[5, 5] += k * (n / a * lead**2 * dt - 2 * lead * lam)
        out.append(X)
    return out


def roe_X(servicer: EquinoctialElements, dt: float, gamma=None):
    """``[X^r, X^t, X^n]`` for the nonsingular ROE ``(da, dlam, dex, dey, dix, diy)``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    J = roe_jacobian(servicer.a)
    return [J @ X @ J.T for X in roe_X_prime(servicer, dt, gamma)]


def assemble_Q(X, psd) -> np.ndarray:
    psd = np.asarray(psd, dtype=float)
    if np.any(psd < 0):
        raise ValueError("PSD components must be nonnegative")
    return sum(Xi * qi for Xi, qi in zip(X, psd))


def vech(M: np.ndarray) -> np.ndarray:
    """Lower triangle stacked column by column."""
    n = M.shape[0]
    return np.concatenate([M[j:, j] for j in range(n)])


def unvech(v: np.ndarray) -> np.ndarray:
    m = len(v)
    n = int(round((np.sqrt(8 * m + 1) - 1) / 2))
    M = np.zeros((n, n))
    pos = 0
    for j in range(n):
        M[j:, j] = v[pos : pos + n - j]
        pos += n - j
    return M + np.tril(M, -1).T


def mapping_matrix(X) -> np.ndarray:
    """Stack ``vech(X^i)`` into the (21 x 3) linear map from PSD to ``vech(Q)``."""
    return np.column_stack([vech(Xi) for Xi in X])
