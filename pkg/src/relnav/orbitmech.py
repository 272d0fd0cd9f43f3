"""Absolute and relative orbital mechanics.

Element sets
------------
Keplerian ``(a, e, i, raan, argp, M)`` and equinoctial
``(a, e_x, e_y, i_x, i_y, lam)`` with

    e_x = e cos(raan + argp)        i_x = tan(i/2) cos(raan)
    e_y = e sin(raan + argp)        i_y = tan(i/2) sin(raan)
    lam = raan + argp + M

Relative orbital elements (ROE) are the nonsingular differences
``(da, dlam, dex, dey, dix, diy)`` with ``da`` normalised by the servicer
semi-major axis.  Cartesian conversions use the equinoctial reference
frame ``(f, g, w)`` of Broucke and Cefola with the direct (prograde)
retrograde factor.

All routines are written with plain numpy arithmetic so that they also
accept complex inputs, which is how :func:`roe_rtn_matrix` obtains an exact
first-order Jacobian by complex-step differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MU_EARTH = 3.986004418e14  # m^3/s^2
ECC_LIMIT = 0.05


class RetrogradeSingular(ValueError):
    """Inclination too close to 180 deg for the equinoctial set."""


class EccentricityOutOfRange(ValueError):
    """Servicer orbit outside the near-circular domain of the ROE/RTN map."""


def wrap_pi(x):
    """Wrap an angle to (-pi, pi]."""
    y = np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2.0 * np.pi)
    return float(y) if np.ndim(y) == 0 else y


@dataclass(frozen=True)
class KeplerianElements:
    a: float
    e: float
    i: float
    raan: float
    argp: float
    M: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("semi-major axis must be positive")
        if not 0 <= self.e < 1:
            raise ValueError("eccentricity must lie in [0, 1)")
        if not 0 <= self.i <= np.pi:
            raise ValueError("inclination must lie in [0, pi]")

    @property
    def n(self) -> float:
        return mean_motion(self.a)

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.n


@dataclass(frozen=True)
class EquinoctialElements:
    a: float
    ex: float
    ey: float
    ix: float
    iy: float
    lam: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("semi-major axis must be positive")
        if not self.ex**2 + self.ey**2 < 1:
            raise ValueError("eccentricity vector must have norm < 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.ex, self.ey, self.ix, self.iy, self.lam])

    @classmethod
    def from_array(cls, v) -> "EquinoctialElements":
        return cls(*(float(x) for x in v))

    @property
    def n(self) -> float:
        return mean_motion(self.a)

    @property
    def e(self) -> float:
        return float(np.hypot(self.ex, self.ey))


@dataclass(frozen=True)
class Roe:
    """Relative orbital elements, target with respect to servicer."""

    da: float = 0.0
    dlam: float = 0.0
    dex: float = 0.0
    dey: float = 0.0
    dix: float = 0.0
    diy: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.da, self.dlam, self.dex, self.dey, self.dix, self.diy])

    @classmethod
    def from_array(cls, v) -> "Roe":
        return cls(*(float(x) for x in v))


@dataclass(frozen=True)
class RtnState:
    """Target position/velocity relative to the servicer, in the servicer RTN frame."""

    r: np.ndarray
    v: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.r, self.v])


def mean_motion(a: float, mu: float = MU_EARTH) -> float:
    return float(np.sqrt(mu / a**3))


# ---------------------------------------------------------------------------
# element conversions


def kepler_to_equinoctial(k: KeplerianElements) -> EquinoctialElements:
    if abs(k.i - np.pi) < 1e-9:
        raise RetrogradeSingular("inclination within 1e-9 rad of pi")
    lon_peri = k.raan + k.argp
    t = np.tan(k.i / 2)
    return EquinoctialElements(
        a=k.a,
        ex=k.e * np.cos(lon_peri),
        ey=k.e * np.sin(lon_peri),
        ix=t * np.cos(k.raan),
        iy=t * np.sin(k.raan),
        lam=wrap_pi(lon_peri + k.M),
    )


def equinoctial_to_kepler(q: EquinoctialElements) -> KeplerianElements:
    """Inverse map; undefined angles (circular or equatorial) are set to 0."""
    e = np.hypot(q.ex, q.ey)
    tn = np.hypot(q.ix, q.iy)
    raan = np.arctan2(q.iy, q.ix) if tn > 0 else 0.0
    lon_peri = np.arctan2(q.ey, q.ex) if e > 0 else raan
    return KeplerianElements(
        a=q.a,
        e=float(e),
        i=float(2 * np.arctan(tn)),
        raan=float(np.mod(raan, 2 * np.pi)),
        argp=float(np.mod(lon_peri - raan, 2 * np.pi)),
        M=float(np.mod(q.lam - lon_peri, 2 * np.pi)),
    )


def _eq_frame(ix, iy):
    s = 1.0 + ix * ix + iy * iy
    f = np.array([1 - iy * iy + ix * ix, 2 * ix * iy, -2 * iy]) / s
    g = np.array([2 * ix * iy, 1 + iy * iy - ix * ix, 2 * ix]) / s
    w = np.array([2 * iy, -2 * ix, 1 - ix * ix - iy * iy]) / s
    return f, g, w


def eccentric_longitude(lam, ex, ey, tol: float = 1e-15):
    """Solve ``lam = F + ey cos F - ex sin F`` by Newton iteration."""
    F = lam
    for _ in range(50):
        fF = F + ey * np.cos(F) - ex * np.sin(F) - lam
        dF = fF / (1.0 - ey * np.sin(F) - ex * np.cos(F))
        F = F - dF
        if abs(dF) < tol:
            break
    return F


def equinoctial_to_cartesian(q, mu: float = MU_EARTH):
    """Inertial position and velocity from equinoctial elements.

    ``q`` is either :class:`EquinoctialElements` or a length-6 array (which
    may be complex).
    """
    a, k, h, ix, iy, lam = q.as_array() if isinstance(q, EquinoctialElements) else q
    F = eccentric_longitude(lam, k, h)
    bet = 1.0 / (1.0 + np.sqrt(1.0 - h * h - k * k))
    cF, sF = np.cos(F), np.sin(F)
    X1 = a * ((1 - h * h * bet) * cF + h * k * bet * sF - k)
    Y1 = a * ((1 - k * k * bet) * sF + h * k * bet * cF - h)
    r = a * (1 - k * cF - h * sF)
    n = np.sqrt(mu / a**3)
    Xd = n * a * a / r * (h * k * bet * cF - (1 - h * h * bet) * sF)
    Yd = n * a * a / r * ((1 - k * k * bet) * cF - h * k * bet * sF)
    f, g, _ = _eq_frame(ix, iy)
    return X1 * f + Y1 * g, Xd * f + Yd * g


def cartesian_to_equinoctial(r, v, mu: float = MU_EARTH) -> EquinoctialElements:
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    rn = np.linalg.norm(r)
    hvec = np.cross(r, v)
    w = hvec / np.linalg.norm(hvec)
    if w[2] <= -1 + 1e-12:
        raise RetrogradeSingular("retrograde equatorial orbit")
    ix = -w[1] / (1 + w[2])
    iy = w[0] / (1 + w[2])
    f, g, _ = _eq_frame(ix, iy)
    evec = np.cross(v, hvec) / mu - r / rn
    k = float(evec @ f)
    h = float(evec @ g)
    a = 1.0 / (2.0 / rn - v @ v / mu)
    X1, Y1 = r @ f, r @ g
    root = np.sqrt(1 - h * h - k * k)
    bet = 1.0 / (1.0 + root)
    sF = h + ((1 - h * h * bet) * Y1 - h * k * bet * X1) / (a * root)
    cF = k + ((1 - k * k * bet) * X1 - h * k * bet * Y1) / (a * root)
    F = np.arctan2(sF, cF)
    lam = F + h * cF - k * sF
    return EquinoctialElements(float(a), k, h, float(ix), float(iy), wrap_pi(lam))


def kepler_to_cartesian(k: KeplerianElements, mu: float = MU_EARTH):
    """Classical perifocal route; kept independent of the equinoctial path."""
    E = k.M
    for _ in range(60):
        dE = (E - k.e * np.sin(E) - k.M) / (1 - k.e * np.cos(E))
        E -= dE
        if abs(dE) < 1e-15:
            break
    nu = 2 * np.arctan2(np.sqrt(1 + k.e) * np.sin(E / 2), np.sqrt(1 - k.e) * np.cos(E / 2))
    p = k.a * (1 - k.e**2)
    rr = p / (1 + k.e * np.cos(nu))
    r_pf = rr * np.array([np.cos(nu), np.sin(nu), 0.0])
    v_pf = np.sqrt(mu / p) * np.array([-np.sin(nu), k.e + np.cos(nu), 0.0])
    cO, sO = np.cos(k.raan), np.sin(k.raan)
    cw, sw = np.cos(k.argp), np.sin(k.argp)
    ci, si = np.cos(k.i), np.sin(k.i)
    Q = np.array(
        [
            [cO * cw - sO * sw * ci, -cO * sw - sO * cw * ci, sO * si],
            [sO * cw + cO * sw * ci, -sO * sw + cO * cw * ci, -cO * si],
            [sw * si, cw * si, ci],
        ]
    )
    return Q @ r_pf, Q @ v_pf


def rtn_basis(r, v) -> np.ndarray:
    """Rows are the radial, along-track and cross-track unit vectors."""
    R = r / np.sqrt(np.sum(r * r))
    hvec = np.cross(r, v)
    N = hvec / np.sqrt(np.sum(hvec * hvec))
    T = np.cross(N, R)
    return np.array([R, T, N])


def true_longitude(q: EquinoctialElements) -> float:
    r, _ = equinoctial_to_cartesian(q)
    f, g, _ = _eq_frame(q.ix, q.iy)
    return float(np.arctan2(r @ g, r @ f))


# ---------------------------------------------------------------------------
# relative motion


def roe_from_pair(target: EquinoctialElements, servicer: EquinoctialElements) -> Roe:
    return Roe(
        da=(target.a - servicer.a) / servicer.a,
        dlam=wrap_pi(target.lam - servicer.lam),
        dex=target.ex - servicer.ex,
        dey=target.ey - servicer.ey,
        dix=target.ix - servicer.ix,
        diy=target.iy - servicer.iy,
    )


def apply_roe(servicer: EquinoctialElements, roe: Roe) -> EquinoctialElements:
    """Target elements reconstructed from the servicer and a ROE set."""
    s = servicer
    return EquinoctialElements(
        a=s.a * (1 + roe.da),
        ex=s.ex + roe.dex,
        ey=s.ey + roe.dey,
        ix=s.ix + roe.dix,
        iy=s.iy + roe.diy,
        lam=wrap_pi(s.lam + roe.dlam),
    )


def stm_ns_roe(servicer: EquinoctialElements, dt: float) -> np.ndarray:
    """Keplerian STM of the nonsingular ROE; only ``da`` drives ``dlam``."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    phi = np.eye(6)
    phi[1, 0] = -1.5 * servicer.n * dt
    return phi


def relative_rtn_exact(servicer_arr, target_arr, mu: float = MU_EARTH) -> np.ndarray:
    """Exact (nonlinear) relative RTN position and rotating-frame velocity."""
    rs, vs = equinoctial_to_cartesian(servicer_arr, mu)
    rt, vt = equinoctial_to_cartesian(target_arr, mu)
    rs_r, vs_r = np.real(rs), np.real(vs)
    C = rtn_basis(rs_r, vs_r)
    hn = np.linalg.norm(np.cross(rs_r, vs_r))
    w = np.array([0.0, 0.0, hn / (rs_r @ rs_r)])
    rho = C @ (rt - rs)
    rho_dot = C @ (vt - vs) - np.cross(w, rho)
    return np.concatenate([rho, rho_dot])


def roe_rtn_matrix(servicer: EquinoctialElements, mu: float = MU_EARTH) -> np.ndarray:
    """6x6 linear map from the ROE vector to RTN position/velocity.

    Jacobian of the exact two-body map at zero separation, evaluated by
    complex-step differentiation (no subtractive cancellation).
    """
    if servicer.e >= ECC_LIMIT:
        raise EccentricityOutOfRange(f"e = {servicer.e:.4f} >= {ECC_LIMIT}")
    base = servicer.as_array().astype(complex)
    h = 1e-30
    J = np.empty((6, 6))
    for j in range(6):
        d = np.zeros(6, dtype=complex)
        d[j] = 1j * h
        tgt = base.copy()
        if j == 0:
            tgt[0] = base[0] * (1 + d[0])
        elif j == 1:
            tgt[5] = base[5] + d[1]
        else:
            tgt[j - 1] = base[j - 1] + d[j]
        J[:, j] = np.imag(relative_rtn_exact(base, tgt, mu)) / h
    return J


def roe_to_rtn(roe: Roe, servicer: EquinoctialElements) -> RtnState:
    x = roe_rtn_matrix(servicer) @ roe.as_array()
    return RtnState(x[:3], x[3:])


def rtn_to_roe(state: RtnState, servicer: EquinoctialElements) -> Roe:
    M = roe_rtn_matrix(servicer)
    return Roe.from_array(np.linalg.solve(M, state.as_array()))


# ---------------------------------------------------------------------------
# Gauss variational equations


def gve_gamma(q: EquinoctialElements, mu: float = MU_EARTH) -> np.ndarray:
    """Element rates per unit RTN acceleration, rows ``(a, ex, ey, ix, iy, lam)``."""
    a, ex, ey, ix, iy = q.a, q.ex, q.ey, q.ix, q.iy
    e2 = ex * ex + ey * ey
    p = a * (1 - e2)
    h = np.sqrt(mu * p)
    beta = np.sqrt(1 - e2)
    L = true_longitude(q)
    cL, sL = np.cos(L), np.sin(L)
    r = p / (1 + ex * cL + ey * sL)
    chi2 = ix * ix + iy * iy
    esin = ex * sL - ey * cL
    inc = ix * sL - iy * cL

    G = np.zeros((6, 3))
    G[0, 0] = 2 * a * a / h * esin
    G[0, 1] = 2 * a * a * p / (h * r)
    G[1, 0] = p * sL / h
    G[1, 1] = ((p + r) * cL + r * ex) / h
    G[1, 2] = -ey * r / h * inc
    G[2, 0] = -p * cL / h
    G[2, 1] = ((p + r) * sL + r * ey) / h
    G[2, 2] = ex * r / h * inc
    G[3, 2] = r / h * (1 + chi2) / 2 * cL
    G[4, 2] = r / h * (1 + chi2) / 2 * sL
    G[5, 0] = -(p * (ex * cL + ey * sL) / (1 + beta) + 2 * r * beta) / h
    G[5, 1] = (p + r) * esin / (h * (1 + beta))
    G[5, 2] = r / h * inc
    return G


# ---------------------------------------------------------------------------
# two-body propagation


def propagate_two_body(k: KeplerianElements, dt: float) -> KeplerianElements:
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    M = np.mod(k.M + k.n * dt, 2 * np.pi)
    if np.isclose(M, 2 * np.pi, rtol=0, atol=1e-12):
        M = 0.0
    return KeplerianElements(k.a, k.e, k.i, k.raan, k.argp, float(M))


def propagate_equinoctial(q: EquinoctialElements, dt: float) -> EquinoctialElements:
    return EquinoctialElements(q.a, q.ex, q.ey, q.ix, q.iy, wrap_pi(q.lam + q.n * dt))


def two_body_accel(r: np.ndarray, mu: float = MU_EARTH) -> np.ndarray:
    return -mu * r / np.linalg.norm(r) ** 3


def rk4_cartesian_step(r, v, dt: float, accel_extra=None, mu: float = MU_EARTH):
    """One RK4 step of two-body motion plus an optional constant extra acceleration."""
    ext = np.zeros(3) if accel_extra is None else accel_extra

    def f(rr, vv):
        return vv, two_body_accel(rr, mu) + ext

    k1r, k1v = f(r, v)
    k2r, k2v = f(r + 0.5 * dt * k1r, v + 0.5 * dt * k1v)
    k3r, k3v = f(r + 0.5 * dt * k2r, v + 0.5 * dt * k2v)
    k4r, k4v = f(r + dt * k3r, v + dt * k3v)
    r_new = r + dt / 6 * (k1r + 2 * k2r + 2 * k3r + k4r)
    v_new = v + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return r_new, v_new
