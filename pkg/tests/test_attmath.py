import numpy as np
import pytest
from scipy.linalg import expm
from scipy.spatial.transform import Rotation

from relnav.attmath import (
    SingularMrp,
    angle_between,
    dcm_to_euler321,
    dcm_to_quat,
    min_norm_mrp,
    mrp_from_error_quat,
    quat_conj,
    quat_from_axis_angle,
    quat_from_mrp,
    quat_from_rotvec,
    quat_identity,
    quat_mul,
    quat_normalize,
    quat_to_dcm,
    quat_to_rotvec,
    rodrigues_exp,
    shadow_mrp,
    skew,
)

rng = np.random.default_rng(7)
S2 = np.sqrt(2) / 2


def random_quats(n):
    return quat_normalize(rng.normal(size=(n, 4)))


def test_skew_is_cross_product_and_antisymmetric():
    a, b = rng.normal(size=(2, 3))
    S = skew(a)
    assert np.array_equal(S, -S.T)
    assert np.allclose(S @ b, np.cross(a, b), atol=1e-15)


def test_dcm_matches_scipy_frame_rotation():
    # scipy's matrix rotates vectors; the attitude matrix here maps frame coordinates
    for q in random_quats(50):
        R_ref = Rotation.from_quat(np.r_[q[1:], q[0]]).as_matrix().T
        assert np.allclose(quat_to_dcm(q), R_ref, atol=1e-14)


def test_product_composes_attitude_matrices():
    a, b = random_quats(2)
    assert np.allclose(quat_to_dcm(quat_mul(a, b)), quat_to_dcm(a) @ quat_to_dcm(b), atol=1e-14)


def test_conjugate_inverts():
    q = random_quats(1)[0]
    assert np.allclose(quat_mul(q, quat_conj(q)), quat_identity(), atol=1e-15)


def test_dcm_to_quat_round_trip_and_sign():
    for q in random_quats(200):
        p = dcm_to_quat(quat_to_dcm(q))
        assert p[0] >= 0
        assert np.allclose(p, q if q[0] >= 0 else -q, atol=1e-13)


def test_rotvec_round_trip_including_tiny_angles():
    for th in (rng.normal(size=3), 1e-9 * rng.normal(size=3), np.zeros(3)):
        assert np.allclose(quat_to_rotvec(quat_from_rotvec(th)), th, atol=1e-15)


def test_batched_calls_match_single():
    Q = random_quats(5)
    P = random_quats(5)
    batch = quat_mul(Q, P)
    for k in range(5):
        assert np.array_equal(batch[k], quat_mul(Q[k], P[k]))
    assert quat_to_dcm(Q).shape == (5, 3, 3)


# MRP conversions


def test_mrp_identity_and_half_turn():
    assert np.array_equal(mrp_from_error_quat(quat_identity()), np.zeros(3))
    assert np.allclose(mrp_from_error_quat(np.array([0.0, 1, 0, 0])), [4, 0, 0])


def test_mrp_quarter_turn_about_z():
    p = mrp_from_error_quat(np.array([S2, 0, 0, S2]))
    assert np.allclose(p, [0, 0, 1.656854249492381], atol=1e-12)


def test_mrp_singular_near_full_turn():
    with pytest.raises(SingularMrp):
        mrp_from_error_quat(np.array([-1.0, 0, 0, 0]))


def test_shadow_examples():
    assert np.allclose(shadow_mrp(np.array([0.0, 1, 0, 0])), [-4, 0, 0])
    assert np.allclose(shadow_mrp(np.array([-1.0, 0, 0, 0])), np.zeros(3))
    with pytest.raises(SingularMrp):
        shadow_mrp(quat_identity())


def test_shadow_represents_same_attitude():
    for q in random_quats(100):
        back = quat_from_mrp(shadow_mrp(q))
        assert min(np.abs(back - q).max(), np.abs(back + q).max()) < 1e-12


def test_min_norm_branch_choice():
    assert np.array_equal(min_norm_mrp(quat_identity()), np.zeros(3))
    assert np.allclose(min_norm_mrp(np.array([0.0, 1, 0, 0])), [4, 0, 0])
    v = np.array([0.3, -0.2, np.sqrt(1 - 0.81 - 0.13)])
    q = np.r_[-0.9, v]
    assert np.allclose(min_norm_mrp(q), shadow_mrp(q))
    assert np.linalg.norm(min_norm_mrp(q)) == pytest.approx(4 * np.linalg.norm(v) / 1.9)


def test_min_norm_bounded_by_four():
    n = np.linalg.norm(min_norm_mrp(random_quats(1000)), axis=-1)
    assert n.max() <= 4 + 1e-12


def test_quat_from_mrp_examples_and_round_trip():
    assert np.array_equal(quat_from_mrp(np.zeros(3)), quat_identity())
    assert np.allclose(quat_from_mrp(np.array([4.0, 0, 0])), [0, 1, 0, 0])
    p = rng.uniform(-2, 2, size=(100, 3))
    p = p[np.linalg.norm(p, axis=1) < 4]
    assert np.allclose(mrp_from_error_quat(quat_from_mrp(p)), p, atol=1e-12)
    assert np.allclose(np.linalg.norm(quat_from_mrp(p), axis=1), 1, atol=1e-15)


def test_small_mrp_is_rotation_angle():
    th = np.array([1e-3, -2e-3, 5e-4])
    assert np.allclose(mrp_from_error_quat(quat_from_rotvec(th)), th, rtol=1e-6)


# Rodrigues


def test_rodrigues_examples():
    assert np.array_equal(rodrigues_exp(np.zeros(3)), np.eye(3))
    R = rodrigues_exp(np.array([np.pi / 2, 0, 0]))
    assert np.allclose(R[1:, 1:], [[0, -1], [1, 0]], atol=1e-15)


def test_rodrigues_orthonormal_and_inverse():
    for th in rng.normal(size=(50, 3)):
        R = rodrigues_exp(th)
        assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(R) == pytest.approx(1, abs=1e-12)
        assert np.allclose(R @ rodrigues_exp(-th), np.eye(3), atol=1e-12)


def test_rodrigues_matches_taylor_series():
    for th in rng.normal(size=(20, 3)):
        th *= rng.uniform(0, np.pi) / np.linalg.norm(th)
        K = skew(th)
        series = np.eye(3)
        term = np.eye(3)
        for k in range(1, 20):
            term = term @ K / k
            series = series + term
        assert np.allclose(rodrigues_exp(th), series, atol=1e-10)
        assert np.allclose(rodrigues_exp(th), expm(K), atol=1e-13)


def test_rodrigues_series_branch_is_continuous():
    u = np.array([1.0, 2.0, -1.0]) / np.sqrt(6)
    lo, hi = rodrigues_exp(0.999e-6 * u), rodrigues_exp(1.001e-6 * u)
    assert np.allclose(lo, hi, atol=1e-8)


# distances and angles


def test_angle_between_examples():
    q = random_quats(1)[0]
    assert angle_between(q, q) == pytest.approx(0, abs=1e-7)
    assert angle_between(q, -q) == pytest.approx(0, abs=1e-7)
    b = quat_from_axis_angle([0, 1, 0], np.radians(10))
    assert angle_between(quat_identity(), b) == pytest.approx(np.radians(10), rel=1e-12)


def test_angle_between_symmetric_and_bounded():
    for a, b in zip(random_quats(100), random_quats(100)):
        d = angle_between(a, b)
        assert 0 <= d <= np.pi
        assert d == angle_between(b, a)


def test_euler321_recovers_angles():
    roll, pitch, yaw = 0.1, -0.2, 0.3
    # frame rotation sequence: yaw about z, pitch about y, roll about x
    q = quat_mul(
        quat_from_axis_angle([1, 0, 0], roll),
        quat_mul(quat_from_axis_angle([0, 1, 0], pitch), quat_from_axis_angle([0, 0, 1], yaw)),
    )
    assert np.allclose(dcm_to_euler321(quat_to_dcm(q)), [roll, pitch, yaw], atol=1e-14)
