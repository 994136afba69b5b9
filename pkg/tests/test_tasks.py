import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from swarmfold import dirstat as ds
from swarmfold import manifold as mf
from swarmfold.errors import (DegenerateInstance, DimensionMismatch, InfeasibleThreshold, InsufficientData,
                              InvalidParameter)
from swarmfold.io import FormatError
from swarmfold.tasks import arm
from swarmfold.tasks import multilayer as ml
from swarmfold.tasks import wahba as wb


# ---------------------------------------------------------------------------
# Wahba


def test_wahba_exact_recovery():
    inst, R = wb.random_instance(10, 0.0, seed=1)
    assert np.max(np.abs(wb.wahba_svd(inst) - R)) <= 1e-10
    v = ds.uniform_sphere(6, 3, 2)
    assert np.max(np.abs(wb.wahba_svd(wb.WahbaInstance(v, v)) - np.eye(3))) <= 1e-12


def test_wahba_svd_matches_scipy_align():
    inst, _ = wb.random_instance(15, 0.1, seed=3)
    a = np.random.default_rng(3).uniform(0.5, 2, 15)
    inst = wb.WahbaInstance(inst.v, inst.w, a)
    ref = Rotation.align_vectors(inst.w, inst.v, weights=a)[0].as_matrix()
    assert np.max(np.abs(wb.wahba_svd(inst) - ref)) <= 1e-10


def test_wahba_noisy_optimality():
    inst, R = wb.random_instance(20, 0.05, seed=4)
    Rh = wb.wahba_svd(inst)
    # 20 pairs at noise 0.05 pin the rotation to a few hundredths
    assert mf.chordal_distance(Rh, R) <= 0.15
    assert wb.wahba_loss(Rh, inst) <= wb.wahba_loss(R, inst) + 1e-12
    assert abs(np.linalg.det(Rh) - 1) <= 1e-12
    g = np.random.default_rng(5)
    J0 = wb.wahba_loss(Rh, inst)
    for _ in range(1000):
        P = mf.group_exp(mf.skew_part(1e-3 * g.normal(size=(3, 3)))) @ Rh
        assert wb.wahba_loss(P, inst) >= J0 - 1e-12


def test_wahba_reflection_corrected():
    # observations that a reflection would fit better still give a rotation
    v = ds.uniform_sphere(8, 3, 6)
    inst = wb.WahbaInstance(v, v * np.array([1.0, 1.0, -1.0]))
    R = wb.wahba_svd(inst)
    assert abs(np.linalg.det(R) - 1) <= 1e-12


def test_wahba_instance_validation():
    v = np.eye(3)
    with pytest.raises(InvalidParameter):
        wb.WahbaInstance(v[:2], v[:2])
    with pytest.raises(InvalidParameter):
        wb.WahbaInstance(v, v, a=[1.0, -1.0, 1.0])
    with pytest.raises(DimensionMismatch):
        wb.WahbaInstance(v, v[:, :2])
    e = np.tile([[1.0, 0.0, 0.0]], (4, 1))
    with pytest.raises(DegenerateInstance):
        wb.wahba_svd(wb.WahbaInstance(e, e))


def test_double_cover_batch_and_antipodes():
    q = ds.uniform_sphere(200, 4, 7)
    R = wb.quaternions_to_rotations(q)
    assert np.array_equal(R, wb.quaternions_to_rotations(-q))
    assert np.allclose(R, np.stack([mf.quaternion_double_cover(x) for x in q]), atol=1e-14)
    ref = Rotation.from_quat(q[:, [1, 2, 3, 0]]).as_matrix()  # scipy stores scalar last
    assert np.allclose(R, ref, atol=1e-12)
    folded = wb.fold_hemisphere(q, np.array([0.0, 1.0, 0.0, 0.0]))
    assert np.all(folded[:, 1] >= 0)


def test_wahba_stochastic_noiseless_and_noisy():
    inst, R = wb.random_instance(20, 0.0, seed=8)
    res = wb.wahba_stochastic(inst, seed=8)
    assert mf.chordal_distance(res.rotation, R) <= 1e-3
    assert np.linalg.norm(res.policy.zeta) < 1.0
    inst, _ = wb.random_instance(20, 0.05, seed=9)
    res = wb.wahba_stochastic(inst, seed=9)
    j = wb.wahba_loss(wb.wahba_svd(inst), inst)
    assert res.loss - j <= 0.05 * j
    assert all(b <= a for a, b in zip(res.history, res.history[1:]))


def test_wahba_stochastic_deterministic():
    inst, _ = wb.random_instance(10, 0.05, seed=10)
    a = wb.wahba_stochastic(inst, seed=3, generations=40)
    b = wb.wahba_stochastic(inst, seed=3, generations=40)
    assert np.array_equal(a.rotation, b.rotation) and a.history == b.history


def test_wahba_csv_roundtrip(tmp_path):
    inst, _ = wb.random_instance(7, 0.1, seed=11)
    p = tmp_path / "inst.csv"
    wb.write_instance_csv(p, inst)
    back = wb.read_instance_csv(p)
    assert np.array_equal(back.v, inst.v) and np.array_equal(back.w, inst.w) and np.array_equal(back.a, inst.a)
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(FormatError):
        wb.read_instance_csv(bad)


# ---------------------------------------------------------------------------
# planar arm


def _planar_teacher(params, m, T=25, interval=0.2, seed=0):
    phi0 = np.random.default_rng(seed).uniform(0, 2 * np.pi, m)
    times = interval * np.arange(T)
    stub = arm.ArmObservation(times, np.tile(phi0, (T, 1)))
    return arm.ArmObservation(times, arm.planar_rollout(params, stub))


def test_arm_decoupled_frequency():
    obs = _planar_teacher(np.array([1.7, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]), 3, seed=12)
    fit = arm.arm_fit_planar(obs, 3, seed=1, generations=150)
    assert abs(fit.params[0] - 1.7) <= 1e-3
    assert fit.prediction_error <= 1e-6


def test_arm_coupled_self_consistency():
    params = np.array([0.8, 1.2, -0.6, 0.9, 0.3, 2.0, 5.5])
    obs = _planar_teacher(params, 3, seed=13)
    fit = arm.arm_fit_planar(obs, 3, seed=2)
    assert fit.prediction_error <= 0.05
    assert np.max(arm.wrapped_error(fit.predicted, obs.joints)) <= 0.05


def test_arm_observation_validation():
    with pytest.raises(InsufficientData):
        arm.arm_fit_planar(arm.ArmObservation(np.arange(5.0), np.zeros((5, 2))))
    with pytest.raises(InvalidParameter):
        arm.ArmObservation([0.0, 1.0, 3.0], np.zeros((3, 2)))
    with pytest.raises(InvalidParameter):
        arm.ArmObservation([0.0, 1.0], np.ones((2, 1, 4)))
    obs = arm.ArmObservation(np.arange(12.0), np.zeros((12, 2)))
    with pytest.raises(DimensionMismatch):
        arm.arm_fit_planar(obs, 3)
    with pytest.raises(InvalidParameter):
        arm.arm_fit_spatial(obs)


def test_arm_csv_roundtrip(tmp_path):
    obs = _planar_teacher(np.array([0.5, 0.4, 0.1]), 2, T=11, seed=14)
    p = tmp_path / "arm.csv"
    arm.write_observation_csv(p, obs)
    back = arm.read_observation_csv(p)
    assert np.array_equal(back.joints, obs.joints) and np.array_equal(back.times, obs.times)
    q = ds.uniform_sphere(22, 4, 15).reshape(11, 2, 4)
    sp = arm.ArmObservation(np.arange(11.0), q)
    arm.write_observation_csv(p, sp)
    assert np.array_equal(arm.read_observation_csv(p).joints, q)


def test_stochastic_policy_marginals_wrapped_cauchy():
    S = arm.planar_policy_samples([1.0, -0.5], [0.2, 0.0], [0.3, 1.0], t=1.5, n=20_000, seed=16,
                                  alpha0=[0.5, 0.3j])
    fits, pvals = arm.planar_marginals(S)
    assert min(pvals) > 0.01
    assert all(0.05 < f.r < 1 for f in fits)


# ---------------------------------------------------------------------------
# spatial arm


def _spatial_teacher(params, m, T=15, interval=0.2, seed=0):
    q0 = ds.uniform_sphere(m, 4, seed)
    times = interval * np.arange(T)
    stub = arm.ArmObservation(times, np.tile(q0, (T, 1, 1)))
    return arm.ArmObservation(times, arm.spatial_rollout(params, stub))


def test_spatial_arm_decoupled_recovery():
    params = np.array([0.4, -0.3, 0.2, 0.5, 0.1, -0.6, 0.0])
    fit = arm.arm_fit_spatial(_spatial_teacher(params, 2, seed=17), 2, seed=3, generations=200)
    assert np.max(np.abs(fit.params[:6] - params[:6])) <= 1e-3
    assert fit.prediction_error <= 1e-3


def test_spatial_arm_coupled_self_consistency():
    params = np.array([0.4, -0.3, 0.2, 0.5, 0.1, -0.6, 1.5])
    obs = _spatial_teacher(params, 2, seed=18)
    fit = arm.arm_fit_spatial(obs, 2, seed=4, generations=200)
    assert np.max(arm.quaternion_error(fit.predicted, obs.joints)) <= 0.05


def test_spatial_marginals_recover_zeta():
    zetas = [np.array([0.3, -0.2, 0.1, 0.4]), np.array([-0.5, 0.0, 0.2, 0.0])]
    S = np.stack([ds.sample(ds.SphericalCauchyParams(z), 50_000, 19 + k) for k, z in enumerate(zetas)], axis=1)
    for p, z in zip(arm.spatial_marginals(S), zetas):
        assert np.max(np.abs(p.zeta - z)) <= 0.05


# ---------------------------------------------------------------------------
# multilayer alignment


def test_single_layer_is_trivial():
    cloud = ml.LayerCloud((0.5 * ds.uniform_sphere(4, 2, 20),), np.zeros((0, 4)), 0.1, 0.5)
    res = ml.multilayer_align(cloud)
    assert res.loss == 0.0 and res.term_count == 0
    assert np.array_equal(res.isometries[0].rot, np.eye(2)) and np.all(res.isometries[0].b == 0)


def test_term_count():
    g = np.random.default_rng(21)
    for p, r in ((3, 2), (5, 3), (4, 4)):
        layers = tuple(0.5 * ds.uniform_sphere(p, 2, g) for _ in range(r))
        assert ml.loss_term_count(ml.LayerCloud(layers, np.zeros((0, 4)))) == p * p * r * (r - 1) // 2
        assert ml.hinge_residuals(ml.LayerCloud(layers, np.zeros((0, 4))), layers).size == p * p * r * (r - 1) // 2


def test_planted_alignment():
    cloud, q = ml.planted_instance(8, 2, seed=22)
    res = ml.multilayer_align(cloud, seed=1)
    aligned = res.aligned(cloud)
    pair = mf.hyperbolic_distance(aligned[0], aligned[1])
    assert np.max(pair) <= 1e-3
    assert res.hard_violations == 0 and res.feasible
    assert ml.intra_layer_residual(cloud, res.isometries) <= 1e-8
    assert all(b <= a for a, b in zip(res.history, res.history[1:]))


def test_isometry_extends_boundary_flow():
    d = 3
    theta = np.array([0.3, -0.2, 0.5, 0.4, -0.1, 0.2])
    anchors = ml.anchor_points(d, 0)
    q = ml.isometry_from_generator(theta, d, anchors)
    A, f = ml.unpack_generator(theta, d)
    others = ds.uniform_sphere(20, d, 23)
    moved = ml.conformal_flow(others, A, f)
    assert np.max(np.abs(q(others) - moved)) <= 1e-7


def test_infeasible_threshold():
    L0 = np.array([[0.0, 0.0], [0.6, 0.0]])
    L1 = np.array([[0.0, 0.3]])
    # both nodes of layer 0 linked to one node but far apart: tau_near too small
    cloud = ml.LayerCloud((L0, L1), [(0, 0, 1, 0), (0, 1, 1, 0)], tau_near=0.1, tau_far=0.2)
    assert ml.threshold_conflicts(cloud)
    res = ml.multilayer_align(cloud, generations=20)
    assert not res.feasible and res.conflicts
    with pytest.raises(InfeasibleThreshold):
        ml.multilayer_align(cloud, strict=True)


def test_layer_cloud_validation():
    with pytest.raises(InvalidParameter):
        ml.LayerCloud((np.array([[1.0, 0.0]]),), np.zeros((0, 4)))
    with pytest.raises(InvalidParameter):
        ml.LayerCloud((np.zeros((2, 2)), np.zeros((2, 2))), [(0, 5, 1, 0)])
    with pytest.raises(InvalidParameter):
        ml.LayerCloud((np.zeros((2, 2)), np.zeros((2, 2))), [(0, 0, 0, 1)])
    with pytest.raises(DimensionMismatch):
        ml.LayerCloud((np.zeros((2, 2)), np.zeros((2, 3))), np.zeros((0, 4)))


def test_layer_cloud_json_roundtrip(tmp_path):
    cloud, _ = ml.planted_instance(5, 3, seed=24)
    p = tmp_path / "cloud.json"
    ml.write_layer_cloud(p, cloud)
    back = ml.read_layer_cloud(p)
    assert all(np.array_equal(a, b) for a, b in zip(back.layers, cloud.layers))
    assert np.array_equal(back.adjacency, cloud.adjacency) and back.tau_far == cloud.tau_far
    p.write_text('{"layers": []}')
    with pytest.raises(FormatError):
        ml.read_layer_cloud(p)
