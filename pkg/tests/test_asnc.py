import numpy as np
import pytest

from relnav.asnc import (
    MatchWindow,
    PsdBounds,
    RankDeficient,
    WindowNotFull,
    asnc_update,
    covariance_match,
    extract_block,
    solve_bounded_wls,
)
from relnav.oracles import REF_SERVICER, wls_grid_min, wls_objective
from relnav.orbitmech import kepler_to_equinoctial
from relnav.procnoise import assemble_Q, attitude_X, mapping_matrix, roe_X, unvech, vech

rng = np.random.default_rng(2)
TANGO = np.diag([2.69, 3.46, 3.11])


def filled(n, P, phi, dxs):
    w = MatchWindow(n)
    w.seed(P)
    for dx in dxs:
        w.push(P, phi, dx)
    return w


def random_problem(m=21):
    X = rng.normal(size=(m, 3))
    qhat = rng.normal(size=m)
    B = rng.normal(size=(m, m))
    W_inv = B @ B.T / m + 0.1 * np.eye(m)
    return X, qhat, W_inv


# covariance matching


def test_window_lifecycle():
    w = MatchWindow(3)
    with pytest.raises(RuntimeError):
        w.push(np.eye(2), np.eye(2), np.zeros(2))
    w.seed(np.eye(2))
    for _ in range(2):
        w.push(np.eye(2), np.eye(2), np.zeros(2))
    with pytest.raises(WindowNotFull):
        covariance_match(w)
    w.push(np.eye(2), np.eye(2), np.zeros(2))
    assert w.full and len(w) == 3
    with pytest.raises(ValueError):
        MatchWindow(0)


def test_match_steady_state_is_zero():
    P = np.diag(rng.uniform(1, 2, 12))
    Q = covariance_match(filled(60, P, np.eye(12), [np.zeros(12)] * 60))
    assert np.array_equal(Q, np.zeros((12, 12)))


def test_match_single_correction():
    e1 = np.zeros(12)
    e1[0] = 1.0
    dxs = [np.zeros(12)] * 59 + [e1]
    Q = covariance_match(filled(60, np.eye(12), np.eye(12), dxs))
    assert np.allclose(Q, np.outer(e1, e1) / 60, atol=1e-16)


def test_match_idempotent_in_window_length():
    P = np.diag([2.0, 1.0])
    phi = np.array([[1.0, 0.5], [0.0, 1.0]])
    dx = np.array([0.1, -0.2])
    q5 = covariance_match(filled(5, P, phi, [dx] * 5))
    q50 = covariance_match(filled(50, P, phi, [dx] * 50))
    assert np.allclose(q5, q50, rtol=1e-14)


def test_match_recovers_linear_gaussian_noise():
    """Kalman filter on a constant-velocity model with the true Q."""
    dt = 1.0
    phi = np.array([[1.0, dt], [0.0, 1.0]])
    Q = np.array([[dt**3 / 3, dt**2 / 2], [dt**2 / 2, dt]]) * 0.04
    R = np.diag([0.5, 0.2])
    Lq = np.linalg.cholesky(Q)
    x_true, x, P = np.zeros(2), np.zeros(2), np.eye(2)
    w = MatchWindow(50)
    w.seed(P)
    est = []
    for k in range(100 * 50 + 200):
        x_true = phi @ x_true + Lq @ rng.normal(size=2)
        z = x_true + np.sqrt(np.diag(R)) * rng.normal(size=2)
        xp, Pp = phi @ x, phi @ P @ phi.T + Q
        K = Pp @ np.linalg.inv(Pp + R)
        dx = K @ (z - xp)
        x, P_new = xp + dx, (np.eye(2) - K) @ Pp
        w.push(P_new, phi, dx)
        P = P_new
        if k >= 200 and (k - 200) % 50 == 49:
            est.append(covariance_match(w))
    mean = np.mean(est, axis=0)
    assert np.allclose(np.diag(mean), np.diag(Q), rtol=0.15)


def test_extract_block():
    M = np.zeros((12, 12))
    M[:6, :6] = np.eye(6)
    M[6:, 6:] = 2 * np.eye(6)
    M[:6, 6:] = M[6:, :6] = 7.0
    assert np.array_equal(unvech(extract_block(M, "roe")), np.eye(6))
    assert np.array_equal(unvech(extract_block(M, "attitude")), 2 * np.eye(6))
    diag_pos = np.cumsum([0, 6, 5, 4, 3, 2])
    v = extract_block(np.eye(12), "roe")
    assert v[diag_pos].tolist() == [1.0] * 6 and v.sum() == 6


# bounded least squares


def test_bounds_validation():
    with pytest.raises(ValueError):
        PsdBounds(lower=[-1.0, 0, 0])
    with pytest.raises(ValueError):
        PsdBounds(lower=[1.0, 0, 0], upper=[0.5, 1, 1])
    with pytest.raises(ValueError):
        PsdBounds(lower=[0.0, 0.0])


def test_exact_recovery_interior():
    for _ in range(20):
        X, _, W_inv = random_problem()
        q0 = rng.uniform(0.5, 2.0, size=3)
        q = solve_bounded_wls(X, X @ q0, W_inv)
        assert np.allclose(q, q0, rtol=1e-10, atol=0)


def test_negative_target_clamps_to_zero():
    X = np.abs(rng.normal(size=(21, 3)))
    q0 = np.array([1.0, 0.2, 0.1])
    q = solve_bounded_wls(X, -X @ q0, bounds=PsdBounds(upper=np.full(3, 2.0)))
    assert q[0] == 0.0
    f_grid, _ = wls_grid_min(X, -X @ q0, np.eye(21), np.zeros(3), np.full(3, 2.0))
    assert wls_objective(X, -X @ q0, np.eye(21), q) <= f_grid + 1e-8


def test_grid_search_oracle_random_problems():
    for _ in range(30):
        X, qhat, W_inv = random_problem()
        lo = rng.uniform(0, 0.5, size=3) * (rng.random(3) < 0.5)
        hi = lo + rng.uniform(0.2, 2.0, size=3)
        q = solve_bounded_wls(X, qhat, W_inv, PsdBounds(lo, hi))
        assert np.all(q >= lo) and np.all(q <= hi)
        f_grid, _ = wls_grid_min(X, qhat, W_inv, lo, hi)
        assert wls_objective(X, qhat, W_inv, q) <= f_grid + 1e-8


def test_kkt_conditions():
    for _ in range(30):
        X, qhat, W_inv = random_problem()
        b = PsdBounds(upper=np.full(3, 1.0))
        q = solve_bounded_wls(X, qhat, W_inv, b)
        grad = X.T @ W_inv @ (X @ q - qhat)
        scale = np.linalg.norm(X.T @ W_inv @ qhat) + 1.0
        for j in range(3):
            if 0.0 < q[j] < 1.0:
                assert abs(grad[j]) < 1e-9 * scale
            elif q[j] == 0.0:
                assert grad[j] >= -1e-9 * scale
            else:
                assert grad[j] <= 1e-9 * scale


def test_never_worse_than_clipped_projection():
    for _ in range(30):
        X, qhat, W_inv = random_problem()
        q = solve_bounded_wls(X, qhat, W_inv)
        L = np.linalg.cholesky(W_inv).T
        q_ls = np.linalg.lstsq(L @ X, L @ qhat, rcond=None)[0]
        assert wls_objective(X, qhat, W_inv, q) <= wls_objective(X, qhat, W_inv, np.clip(q_ls, 0, None)) + 1e-12


def test_rank_deficient_mapping():
    X = rng.normal(size=(21, 3))
    X[:, 2] = X[:, 0] + X[:, 1]
    with pytest.raises(RankDeficient):
        solve_bounded_wls(X, rng.normal(size=21))
    with pytest.raises(RankDeficient):
        solve_bounded_wls(np.zeros((21, 3)), rng.normal(size=21))


def test_solution_continuous_in_target():
    X, qhat, W_inv = random_problem()
    q = solve_bounded_wls(X, qhat, W_inv)
    ratios = []
    for _ in range(50):
        d = 1e-6 * rng.normal(size=21)
        ratios.append(np.linalg.norm(solve_bounded_wls(X, qhat + d, W_inv) - q) / np.linalg.norm(d))
    assert max(ratios) < 1e3


# full update


def _maps():
    q = kepler_to_equinoctial(REF_SERVICER)
    X_roe = [X * q.a**2 for X in roe_X(q, 5.0)]
    X_att = attitude_X([0.0015, 0.002, -0.001], [0.00106, 0, 0], TANGO, 5.0)
    return X_roe, X_att


def test_asnc_update_zero_corrections():
    X_roe, X_att = _maps()
    res = asnc_update(filled(10, np.eye(12), np.eye(12), [np.zeros(12)] * 10), X_roe, X_att)
    assert np.array_equal(res.psd_roe, np.zeros(3)) and np.array_equal(res.psd_att, np.zeros(3))
    assert np.array_equal(res.Q_roe, np.zeros((6, 6)))


def test_asnc_update_composition_and_psd():
    X_roe, X_att = _maps()
    P = np.eye(12) * 1e-3
    dxs = [rng.normal(scale=1e-3, size=12) for _ in range(10)]
    win = filled(10, P, np.eye(12), dxs)
    res = asnc_update(win, X_roe, X_att)
    Qhat = covariance_match(win)
    for block, X, Q in (("roe", X_roe, res.Q_roe), ("attitude", X_att, res.Q_att)):
        psd = solve_bounded_wls(mapping_matrix(X), extract_block(Qhat, block))
        assert np.array_equal(Q, assemble_Q(X, psd))
        assert np.linalg.eigvalsh(Q).min() >= -1e-12 * np.trace(Q)
    assert np.allclose(vech(res.Q_roe), mapping_matrix(X_roe) @ res.psd_roe)
