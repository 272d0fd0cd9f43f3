import numpy as np
import pytest

from relnav.oracles import gve_fd
from relnav.orbitmech import (
    MU_EARTH,
    EccentricityOutOfRange,
    EquinoctialElements,
    KeplerianElements,
    RetrogradeSingular,
    Roe,
    RtnState,
    apply_roe,
    cartesian_to_equinoctial,
    equinoctial_to_cartesian,
    equinoctial_to_kepler,
    gve_gamma,
    kepler_to_cartesian,
    kepler_to_equinoctial,
    propagate_equinoctial,
    propagate_two_body,
    relative_rtn_exact,
    rk4_cartesian_step,
    roe_from_pair,
    roe_to_rtn,
    rtn_to_roe,
    stm_ns_roe,
    wrap_pi,
)

A = 7078135.0
SERVICER = KeplerianElements(A, 0.001, np.radians(98.2), np.radians(189.9), 0.0, 0.0)
Q_S = kepler_to_equinoctial(SERVICER)
rng = np.random.default_rng(11)


def random_leo(n):
    out = []
    for _ in range(n):
        out.append(
            KeplerianElements(
                a=rng.uniform(6.7e6, 7.5e6),
                e=rng.uniform(0, 0.02),
                i=rng.uniform(0.1, 3.0),
                raan=rng.uniform(0, 2 * np.pi),
                argp=rng.uniform(0, 2 * np.pi),
                M=rng.uniform(0, 2 * np.pi),
            )
        )
    return out


def test_element_validation():
    with pytest.raises(ValueError):
        KeplerianElements(-1.0, 0.0, 0.0, 0, 0, 0)
    with pytest.raises(ValueError):
        KeplerianElements(A, 1.0, 0.0, 0, 0, 0)
    with pytest.raises(ValueError):
        EquinoctialElements(A, 0.8, 0.8, 0, 0, 0)
    with pytest.raises(RetrogradeSingular):
        kepler_to_equinoctial(KeplerianElements(A, 0.0, np.pi, 0, 0, 0))


def test_wrap_convention():
    assert wrap_pi(np.pi) == pytest.approx(np.pi)
    assert wrap_pi(-np.pi) == pytest.approx(np.pi)
    assert wrap_pi(3 * np.pi / 2) == pytest.approx(-np.pi / 2)


def test_reference_servicer_equinoctial():
    assert Q_S.ex == pytest.approx(-9.8509e-4, rel=1e-4)
    assert Q_S.ex == pytest.approx(0.001 * np.cos(np.radians(189.9)), rel=1e-14)
    assert Q_S.lam == pytest.approx(np.radians(189.9 - 360.0), rel=1e-14)
    assert Q_S.ix == pytest.approx(np.tan(np.radians(49.1)) * np.cos(np.radians(189.9)), rel=1e-14)


def test_circular_equatorial():
    q = kepler_to_equinoctial(KeplerianElements(7e6, 0, 0, 0, 0, 0))
    assert np.array_equal(q.as_array(), [7e6, 0, 0, 0, 0, 0])


def test_kepler_round_trip():
    for k in random_leo(50):
        back = kepler_to_equinoctial(equinoctial_to_kepler(kepler_to_equinoctial(k)))
        d = back.as_array() - kepler_to_equinoctial(k).as_array()
        d[5] = wrap_pi(d[5])
        assert np.abs(d[1:]).max() < 1e-12
        assert abs(d[0]) < 1e-6


def test_cartesian_routes_agree():
    # two independent Kepler solvers: equinoctial longitude vs perifocal frame
    for k in random_leo(30):
        r1, v1 = equinoctial_to_cartesian(kepler_to_equinoctial(k))
        r2, v2 = kepler_to_cartesian(k)
        assert np.linalg.norm(r1 - r2) < 1e-7
        assert np.linalg.norm(v1 - v2) < 1e-10


def test_cartesian_round_trip():
    for k in random_leo(30):
        q = kepler_to_equinoctial(k)
        back = cartesian_to_equinoctial(*equinoctial_to_cartesian(q))
        d = back.as_array() - q.as_array()
        d[5] = wrap_pi(d[5])
        assert abs(d[0]) < 1e-6 and np.abs(d[1:]).max() < 1e-12


def test_roe_preset_rows():
    roe1 = Roe(dlam=-8.0 / A)
    assert roe1.dlam == pytest.approx(-1.13024e-6, rel=1e-5)
    tgt = apply_roe(Q_S, Roe(da=-0.25 / A, dey=-0.1476 / A))
    r = roe_from_pair(tgt, Q_S)
    assert r.da == pytest.approx(-3.5320e-8, rel=1e-4)
    assert r.dey == pytest.approx(-2.0853e-8, rel=1e-4)
    assert roe_from_pair(Q_S, Q_S).as_array().tolist() == [0.0] * 6


def test_stm_identity_and_semigroup():
    assert np.array_equal(stm_ns_roe(Q_S, 0.0), np.eye(6))
    p = stm_ns_roe(Q_S, 30.0) @ stm_ns_roe(Q_S, 70.0)
    assert np.allclose(p, stm_ns_roe(Q_S, 100.0), rtol=1e-15, atol=0)
    x = Roe(dlam=-8 / A).as_array()
    assert np.array_equal(stm_ns_roe(Q_S, 1e4) @ x, x)
    with pytest.raises(ValueError):
        stm_ns_roe(Q_S, -1.0)


def test_stm_matches_kepler_propagation():
    # the mean-motion difference is linearised, so agreement is O(da) relative
    da = 1e-6
    roe = Roe(da=da, dlam=2e-6, dex=1e-6, dey=-1e-6, dix=5e-7, diy=-5e-7)
    tgt = apply_roe(Q_S, roe)
    T = SERVICER.period
    for dt in (0.25 * T, T, 2 * T):
        truth = roe_from_pair(propagate_equinoctial(tgt, dt), propagate_equinoctial(Q_S, dt))
        pred = stm_ns_roe(Q_S, dt) @ roe.as_array()
        drift = 1.5 * Q_S.n * dt * da
        assert abs(truth.dlam - pred[1]) < 2 * da * drift
        assert np.allclose(truth.as_array()[[0, 2, 3, 4, 5]], pred[[0, 2, 3, 4, 5]], rtol=0, atol=1e-15)


def test_period_and_two_body():
    assert SERVICER.period == pytest.approx(2 * np.pi * np.sqrt(A**3 / MU_EARTH), rel=1e-15)
    assert SERVICER.period == pytest.approx(5926.4, abs=0.1)
    assert propagate_two_body(SERVICER, 0.0) == SERVICER
    k2 = propagate_two_body(SERVICER, SERVICER.period)
    assert wrap_pi(k2.M - SERVICER.M) == pytest.approx(0, abs=1e-12)


def test_rtn_map_examples():
    zero = roe_to_rtn(Roe(), Q_S)
    assert np.array_equal(zero.r, np.zeros(3)) and np.array_equal(zero.v, np.zeros(3))
    circ = EquinoctialElements(A, 0, 0, 0.5, 0.2, 0.3)
    s = roe_to_rtn(Roe(dlam=-8 / A), circ)
    assert s.r[1] == pytest.approx(-8.0, rel=1e-9)
    assert abs(s.r[0]) < 1e-9 and abs(s.r[2]) < 1e-9
    back = rtn_to_roe(RtnState(np.array([0.0, -8.0, 0.0]), np.zeros(3)), circ)
    assert back.dlam == pytest.approx(-1.13024e-6, rel=1e-5)
    assert np.abs(back.as_array()[[0, 2, 3, 4, 5]]).max() < 1e-12


def test_rtn_round_trip():
    for _ in range(20):
        roe = Roe.from_array(rng.normal(scale=2e-6, size=6))
        back = rtn_to_roe(roe_to_rtn(roe, Q_S), Q_S).as_array()
        assert np.allclose(back, roe.as_array(), rtol=1e-9, atol=1e-9 * np.abs(roe.as_array()).max())


def test_rtn_map_rejects_eccentric_orbit():
    with pytest.raises(EccentricityOutOfRange):
        roe_to_rtn(Roe(), EquinoctialElements(A, 0.05, 0.0, 0, 0, 0))


def test_rtn_map_tracks_two_orbit_difference():
    roe = Roe(da=-0.25 / A, dlam=-8.1732 / A, dex=0.0257 / A, dey=-0.1476 / A,
              dix=-0.03 / A, diy=0.1724 / A)
    tgt = apply_roe(Q_S, roe)
    for dt in np.linspace(0, SERVICER.period, 7):
        s_t, t_t = propagate_equinoctial(Q_S, dt), propagate_equinoctial(tgt, dt)
        exact = relative_rtn_exact(s_t.as_array(), t_t.as_array())
        lin = roe_to_rtn(roe_from_pair(t_t, s_t), s_t)
        assert np.linalg.norm(lin.r - exact[:3]) < 0.01 * np.linalg.norm(exact[:3])


def test_gve_sparsity_and_circular_limit():
    G = gve_gamma(Q_S)
    assert G[3, 0] == 0 and G[4, 0] == 0 and G[3, 1] == 0 and G[4, 1] == 0
    assert G[0, 2] == 0
    circ = EquinoctialElements(A, 0.0, 0.0, 0.3, -0.1, 1.0)
    Gc = gve_gamma(circ)
    assert Gc[0, 0] == pytest.approx(0, abs=1e-12)
    assert Gc[0, 1] == pytest.approx(2 / circ.n, rel=1e-12)


def test_gve_matches_finite_difference():
    for k in random_leo(100):
        q = kepler_to_equinoctial(k)
        G, F = gve_gamma(q), gve_fd(q)
        for row in range(6):
            scale = np.linalg.norm(F[row])
            assert np.linalg.norm(G[row] - F[row]) <= 1e-6 * scale


def test_rk4_cartesian_tracks_kepler():
    r, v = equinoctial_to_cartesian(Q_S)
    for _ in range(100):
        r, v = rk4_cartesian_step(r, v, 1.0)
    r_ref, v_ref = equinoctial_to_cartesian(propagate_equinoctial(Q_S, 100.0))
    assert np.linalg.norm(r - r_ref) < 1e-5
    assert np.linalg.norm(v - v_ref) < 1e-8
