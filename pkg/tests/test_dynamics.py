import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.stats import special_ortho_group, unitary_group

from swarmfold import dynamics as dy
from swarmfold import io
from swarmfold import manifold as mf
from swarmfold._core import pykernels
from swarmfold.errors import (DegenerateInitialData, DimensionMismatch, InvalidNoiseParameter,
                              InvalidParameter, InvalidStepSize, OffManifoldPoint)
from swarmfold.noise import NoiseStream

TWO_PI = 2 * np.pi
RK4 = dy.IntegratorConfig("projected-rk4", 1e-3)
EM = dy.IntegratorConfig("euler-maruyama", 1e-2)


def _unit_rows(x):
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def _phase_rhs(omega, K, beta):
    def rhs(_t, phi):
        d = phi[:, None] - phi[None, :] - beta
        return omega + (K * np.sin(d)).mean(axis=0)
    return rhs


def _dist(a, b):
    return np.max(np.abs(mf.wrap_to_pi(np.asarray(a) - np.asarray(b))))


# ---------------------------------------------------------------------------
# configuration and construction


def test_integrator_config_validation():
    for bad in (0.0, -1e-3, 0.2, float("nan"), float("inf")):
        with pytest.raises(InvalidStepSize):
            dy.IntegratorConfig("projected-rk4", bad)
    with pytest.raises(InvalidParameter):
        dy.IntegratorConfig("heun", 1e-3)
    assert dy.IntegratorConfig("lie-euler", 0.1).dt == 0.1


def test_model_validation():
    with pytest.raises(InvalidNoiseParameter):
        dy.PhaseEnsemble([0.0, 1.0], noise_kappa=-1.0)
    with pytest.raises(InvalidNoiseParameter):
        dy.PhaseEnsemble([0.0, 1.0], noise_coupling=1.5)
    with pytest.raises(DimensionMismatch):
        dy.PhaseEnsemble([0.0, 1.0], K=np.ones((3, 3)))
    with pytest.raises(OffManifoldPoint):
        dy.GlobalCircleModel([1.0, 0.5j])
    with pytest.raises(OffManifoldPoint):
        dy.SphereEnsemble(np.array([[1.0, 1.0, 0.0]]))
    with pytest.raises(DimensionMismatch):
        dy.SphereEnsemble(np.eye(3), A=np.zeros((2, 2)))
    with pytest.raises(OffManifoldPoint):
        dy.MatrixEnsemble(np.diag([1.0, 1.0, -1.0])[None])
    with pytest.raises(DimensionMismatch):
        dy.SubEnsembleModel(())


def test_symmetric_builder_and_canonical_phases():
    g = np.random.default_rng(1)
    m = dy.PhaseEnsemble.symmetric(g.uniform(-10, 10, 5), 0.3, g.normal(size=(5, 5)), g.normal(size=(5, 5)))
    assert np.array_equal(m.K, m.K.T) and np.array_equal(m.beta, m.beta.T)
    assert np.all((m.phases >= 0) & (m.phases < TWO_PI))
    with pytest.raises(ValueError):
        m.phases[0] = 1.0  # states are read-only


def test_single_oscillator_allowed():
    m = dy.PhaseEnsemble([0.5], omega=1.0, K=2.0)
    out = dy.step_phase(m, RK4)
    assert out.phases[0] == pytest.approx(0.501, abs=1e-15)


# ---------------------------------------------------------------------------
# phase model


def test_euler_single_step():
    m = dy.PhaseEnsemble([0.2], omega=1.0)
    out = dy.step_phase(m, dy.IntegratorConfig("euler-maruyama", 0.1))
    assert out.phases[0] == pytest.approx(0.3, abs=1e-15)


def test_pair_attractive_closed_form():
    m = dy.PhaseEnsemble([np.pi / 2, 0.0], K=1.0)
    tr = dy.simulate(m, RK4, 5.0, record_every=5000)
    # the pair difference obeys d' = -K sin d, so tan(d/2) = tan(d0/2) e^{-Kt}
    delta = mf.wrap_to_pi(tr.snapshots[-1, 0] - tr.snapshots[-1, 1])
    expected = 2 * math.atan(math.tan(math.pi / 4) * math.exp(-5.0))
    assert abs(delta - expected) <= 1e-4


def test_pair_repulsive():
    m = dy.PhaseEnsemble([np.pi / 2, 0.0], K=-1.0)
    tr = dy.simulate(m, RK4, 20.0, record_every=20_000)
    delta = mf.canonical_angle(tr.snapshots[-1, 0] - tr.snapshots[-1, 1])
    assert abs(delta - np.pi) <= 1e-3


def test_phase_matches_reference_ode():
    g = np.random.default_rng(2)
    N = 6
    K = g.normal(size=(N, N))
    beta = g.uniform(-1, 1, (N, N))
    phi0 = g.uniform(0, TWO_PI, N)
    tr = dy.simulate(dy.PhaseEnsemble(phi0, 0.4, K, beta), RK4, 2.0, record_every=2000)
    ref = solve_ivp(_phase_rhs(0.4, K, beta), (0, 2), phi0, rtol=1e-12, atol=1e-12, method="DOP853").y[:, -1]
    assert _dist(tr.snapshots[-1], ref) <= 1e-9


def test_euler_maruyama_without_noise_is_euler():
    g = np.random.default_rng(3)
    N = 5
    K, beta = g.normal(size=(N, N)), g.uniform(-1, 1, (N, N))
    phi = g.uniform(0, TWO_PI, N)
    m = dy.PhaseEnsemble(phi, 0.7, K, beta)
    em = dy.step_phase(m, EM, rng=9)
    manual = mf.canonical_angle(phi + EM.dt * _phase_rhs(0.7, K, beta)(0, phi))
    assert _dist(em.phases, manual) <= 1e-15
    # with kappa = 0 the seed is never used
    assert np.array_equal(em.phases, dy.step_phase(m, EM, rng=123).phases)


def test_multiplicative_c0_reduces_bitwise():
    g = np.random.default_rng(4)
    phi = g.uniform(0, TWO_PI, 7)
    add = dy.PhaseEnsemble(phi, 0.1, 1.5, 0.2, noise_kappa=0.4)
    mul = dy.PhaseEnsemble(phi, 0.1, 1.5, 0.2, noise_kappa=0.4, noise_coupling=0.0)
    a = dy.integrate_batch(add, phi[None], EM, 300, 10, seed=5)[1]
    b = dy.integrate_batch(mul, phi[None], EM, 300, 10, seed=5)[1]
    assert np.array_equal(a, b)
    # kappa = 0: the multiplicative model has exactly the deterministic drift
    det = dy.PhaseEnsemble(phi, 0.1, 1.5, 0.2)
    m0 = dy.step_phase_multiplicative(det, 0.8, EM, rng=1)
    assert np.array_equal(m0.phases, dy.step_phase(det, EM).phases)
    with pytest.raises(InvalidNoiseParameter):
        dy.step_phase_multiplicative(det, 1.01, EM)
    with pytest.raises(InvalidParameter):
        dy.step_phase_multiplicative(det, 0.5, RK4)


def test_noise_variance():
    # free diffusion: E cos(phi_t - phi_0) = exp(-kappa t) for increments sqrt(2 kappa dt) xi
    B, kappa = 4000, 0.5
    m = dy.PhaseEnsemble([0.0], noise_kappa=kappa)
    final, _ = dy.integrate_batch(m, np.zeros((B, 1)), EM, 100, seed=6)
    assert abs(np.cos(final).mean() - math.exp(-kappa)) <= 0.03
    assert abs(np.sin(final).mean()) <= 0.03


def test_noise_streams_independent_of_n_and_chunking():
    a = NoiseStream(11, (1, 3)).draw(50)
    b = NoiseStream(11, (1, 5)).draw(50)
    assert np.array_equal(a, b[:, :, :3])
    s = NoiseStream(11, (1, 3))
    assert np.array_equal(np.concatenate([s.draw(20), s.draw(30)]), a)
    r = NoiseStream.restore(s.state())
    assert np.array_equal(r.draw(5), NoiseStream(11, (1, 3)).draw(55)[50:])


def test_stochastic_determinism():
    g = np.random.default_rng(7)
    m = dy.PhaseEnsemble(g.uniform(0, TWO_PI, 8), 0.0, 1.0, 0.0, noise_kappa=0.3)
    t1 = dy.simulate(m, EM, 3.0, 10, seed=42)
    t2 = dy.simulate(m, EM, 3.0, 10, seed=42)
    t3 = dy.simulate(m, EM, 3.0, 10, seed=43)
    assert np.array_equal(t1.snapshots, t2.snapshots) and np.array_equal(t1.times, t2.times)
    assert not np.array_equal(t1.snapshots, t3.snapshots)
    X = _unit_rows(g.normal(size=(6, 3)))
    s = dy.SphereEnsemble(X, K=1.0, noise_kappa=0.2)
    assert np.array_equal(dy.simulate(s, EM, 1.0, 5, seed=3).snapshots, dy.simulate(s, EM, 1.0, 5, seed=3).snapshots)


def test_noisy_step_needs_seed():
    m = dy.PhaseEnsemble([0.0, 1.0], noise_kappa=0.1)
    with pytest.raises(InvalidNoiseParameter):
        dy.step_phase(m, EM)


# ---------------------------------------------------------------------------
# global circle and sub-ensembles


def test_global_circle_rigid_rotation():
    z0 = np.exp(1j * np.array([0.1, 1.0, 2.5, 4.0]))
    tr = dy.simulate(dy.GlobalCircleModel(z0, 0.0, 0.3, 1.0), RK4, 2.0, 500)
    for t, z in zip(tr.times, tr.snapshots):
        assert np.max(np.abs(z - np.exp(1j * t) * z0)) <= 1e-8


def test_global_circle_matches_phase_model():
    g = np.random.default_rng(8)
    phi = g.uniform(0, TWO_PI, 7)
    c = dy.GlobalCircleModel.from_phases(phi, K=-1.2, beta=0.6, omega=0.4)
    a = dy.simulate(c, RK4, 3.0, 1000)
    b = dy.simulate(c.to_phase_ensemble(), RK4, 3.0, 1000)
    for t, z, p in zip(a.times, a.snapshots, b.snapshots):
        assert _dist(np.angle(z), p) <= 1e-8 * max(t, 1.0)


def test_subensemble_single_block_bitwise():
    g = np.random.default_rng(9)
    phi = g.uniform(0, TWO_PI, 6)
    sub = dy.SubEnsembleModel((phi,), K=1.3, beta=0.4, omega=0.2)
    ph = dy.PhaseEnsemble(phi, 0.2, 1.3, 0.4)
    for cfg in (RK4, EM):
        a = dy.integrate_batch(sub, phi[None], cfg, 500, 50)[1]
        b = dy.integrate_batch(ph, phi[None], cfg, 500, 50)[1]
        assert np.array_equal(a, b)


def test_subensemble_decoupled_blocks():
    g = np.random.default_rng(10)
    b0, b1 = g.uniform(0, TWO_PI, 4), g.uniform(0, TWO_PI, 5)
    K = np.array([[1.0, 0.0], [0.0, -0.7]])
    beta = np.array([[0.3, 0.0], [0.0, 1.1]])
    sub = dy.simulate(dy.SubEnsembleModel((b0, b1), K, beta, 0.5), RK4, 4.0, 1000)
    for blk, k, b, sl in ((b0, 1.0, 0.3, slice(0, 4)), (b1, -0.7, 1.1, slice(4, 9))):
        c = dy.simulate(dy.GlobalCircleModel.from_phases(blk, k, b, 0.5), RK4, 4.0, 1000)
        assert _dist(sub.snapshots[:, sl], np.angle(c.snapshots)) <= 1e-10


def test_subensemble_block_cross_ratios():
    g = np.random.default_rng(11)
    blocks = (g.uniform(0, TWO_PI, 4), g.uniform(0, TWO_PI, 5))
    K = np.array([[1.0, -0.5], [0.8, 0.3]])
    beta = g.uniform(-1, 1, (2, 2))
    tr = dy.simulate(dy.SubEnsembleModel(blocks, K, beta, 0.3), RK4, 10.0, 500)
    for sl in (slice(0, 4), slice(4, 8)):
        z = np.exp(1j * tr.snapshots[:, sl])
        c = np.array([mf.cross_ratio(*row) for row in z])
        assert np.max(np.abs(c - c[0])) <= 1e-6 * abs(c[0])


def test_wrapped_cauchy_path_under_repulsion():
    from swarmfold import dirstat as ds

    alpha0 = 0.5 * np.exp(0.7j)
    x = ds.sample(ds.WrappedCauchyParams(alpha0), 10_000, 12)
    tr = dy.simulate(dy.GlobalCircleModel.from_phases(x, K=-1.0), dy.IntegratorConfig("projected-rk4", 1e-2), 3.0, 50)
    maps = dy.moebius_family_extract(tr)
    rs = []
    for g_t, z in zip(maps, tr.snapshots):
        fitted = ds.fit("wrapped-cauchy", np.angle(z)).alpha
        M = g_t.matrix()
        predicted = (M[0, 0] * alpha0 + M[0, 1]) / (M[1, 0] * alpha0 + M[1, 1])
        assert abs(fitted - predicted) <= 0.02
        rs.append(abs(fitted))
    assert rs[-1] < rs[0] - 0.1  # repulsion spreads the ensemble out


# ---------------------------------------------------------------------------
# spheres and matrix groups


def test_sphere_constant_without_drift():
    X = _unit_rows(np.random.default_rng(12).normal(size=(5, 4)))
    out = dy.step_sphere_real(dy.SphereEnsemble(X), RK4)
    assert np.max(np.abs(out.states - X)) <= 1e-15
    Z = _unit_rows(np.random.default_rng(12).normal(size=(5, 2)) + 1j)
    out = dy.step_sphere_complex(dy.ComplexSphereEnsemble(Z), RK4)
    assert np.max(np.abs(out.states - Z)) <= 1e-15


def test_sphere_rotation_only():
    g = np.random.default_rng(13)
    A = mf.skew_part(g.normal(size=(3, 3)))
    X = _unit_rows(g.normal(size=(4, 3)))
    tr = dy.simulate(dy.SphereEnsemble(X, A), RK4, 1.0, 1000)
    assert np.max(np.abs(tr.snapshots[-1] - X @ mf.group_exp(A).T)) <= 1e-9


def test_sphere_consensus():
    X = _unit_rows(np.random.default_rng(14).normal(size=(20, 3)))
    tr = dy.simulate(dy.SphereEnsemble(X, K=1.0), dy.IntegratorConfig("projected-rk4", 1e-2), 50.0, 5000)
    assert abs(np.linalg.norm(tr.snapshots[-1].mean(axis=0)) - 1.0) <= 1e-3


def test_sphere_matches_reference_ode():
    g = np.random.default_rng(15)
    N, d = 5, 3
    X = _unit_rows(g.normal(size=(N, d)))
    A = mf.skew_part(g.normal(size=(d, d)))
    K = g.normal(size=(N, N))

    def rhs(_t, y):
        Y = y.reshape(N, d)
        F = K.T @ Y / N
        return (Y @ A.T + F - np.sum(Y * F, axis=1, keepdims=True) * Y).ravel()

    ref = solve_ivp(rhs, (0, 1), X.ravel(), rtol=1e-12, atol=1e-12, method="DOP853").y[:, -1].reshape(N, d)
    tr = dy.simulate(dy.SphereEnsemble(X, A, K), RK4, 1.0, 1000)
    assert np.max(np.abs(tr.snapshots[-1] - ref)) <= 1e-8


def test_so3_decoupled_flow():
    g = np.random.default_rng(16)
    J = mf.skew_part(g.normal(size=(3, 3)))
    Q = np.stack([special_ortho_group.rvs(3, random_state=s) for s in range(3)])
    for method in ("projected-rk4", "lie-euler"):
        tr = dy.simulate(dy.MatrixEnsemble(Q, J, 0.0), dy.IntegratorConfig(method, 1e-3), 1.0, 1000)
        assert np.max(np.abs(tr.snapshots[-1] - mf.group_exp(J) @ Q)) <= 1e-7


def test_so3_consensus():
    Q = np.stack([special_ortho_group.rvs(3, random_state=20 + s) for s in range(5)])
    tr = dy.simulate(dy.MatrixEnsemble(Q, None, 1.0), dy.IntegratorConfig("projected-rk4", 1e-2), 100.0, 10_000)
    final = tr.snapshots[-1]
    assert max(mf.chordal_distance(final[i], final[j]) for i in range(5) for j in range(i)) <= 1e-4


def test_unitary_integrators_agree():
    U = np.stack([unitary_group.rvs(2, random_state=30 + s) for s in range(4)])
    H = mf.skew_part(1j * np.array([[1.0, 0.3 - 0.2j], [0.3 + 0.2j, -0.5]]))
    K = np.random.default_rng(17).normal(size=(4, 4))
    a = dy.simulate(dy.MatrixEnsemble(U, H, K), RK4, 1.0, 1000).snapshots[-1]
    b = dy.simulate(dy.MatrixEnsemble(U, H, K), dy.IntegratorConfig("lie-euler", 1e-4), 1.0, 10_000).snapshots[-1]
    assert np.max(np.abs(a - b)) <= 1e-3
    assert dy.manifold_residual("matrix", np.stack([a, b])) <= 1e-9


# ---------------------------------------------------------------------------
# simulate and trajectories


def test_zero_length_trajectory():
    m = dy.PhaseEnsemble([0.1, 0.2], K=1.0)
    tr = dy.simulate(m, RK4, 0.0)
    assert tr.snapshots.shape == (1, 2) and np.array_equal(tr.times, [0.0])
    with pytest.raises(InvalidParameter):
        dy.simulate(m, RK4, -1.0)


def test_rk4_convergence_order():
    g = np.random.default_rng(18)
    N = 5
    m = dy.PhaseEnsemble(g.uniform(0, TWO_PI, N), 1.0, 4.0 * g.normal(size=(N, N)), g.uniform(-1, 1, (N, N)))
    ref = solve_ivp(_phase_rhs(m.omega, m.K, m.beta), (0, 1), m.phases, rtol=1e-13, atol=1e-13,
                    method="DOP853").y[:, -1]
    dts = np.array([1e-2, 5e-3, 2.5e-3])
    errs = []
    for dt in dts:
        cfg = dy.IntegratorConfig("projected-rk4", dt)
        errs.append(_dist(dy.simulate(m, cfg, 1.0, int(round(1 / dt))).snapshots[-1], ref))
    order = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert order >= 3.5


def test_trajectory_invariants():
    with pytest.raises(InvalidParameter):
        dy.Trajectory(np.array([0.0, 0.0]), np.zeros((2, 1)), 0, 0.1, "projected-rk4")
    with pytest.raises(DimensionMismatch):
        dy.Trajectory(np.array([0.0, 1.0]), np.zeros((3, 1)), 0, 0.1, "projected-rk4")


# ---------------------------------------------------------------------------
# Moebius family extraction


def _circle_traj(seed=19, N=10):
    g = np.random.default_rng(seed)
    m = dy.GlobalCircleModel.from_phases(g.uniform(0, TWO_PI, N), K=1.4, beta=0.3, omega=0.5)
    return dy.simulate(m, RK4, 5.0, 250)


def test_extract_identity_at_zero_and_all_members():
    tr = _circle_traj()
    maps = dy.moebius_family_extract(tr)
    assert abs(maps[0].alpha) <= 1e-12 and abs(mf.wrap_to_pi(maps[0].psi)) <= 1e-12
    z0 = tr.snapshots[0]
    for g_t, z in zip(maps, tr.snapshots):
        assert np.max(np.abs(g_t(z0) - z)) <= 1e-6


def test_extract_cocycle():
    tr = _circle_traj(20)
    maps = dy.moebius_family_extract(tr)
    for i, j in ((3, 10), (5, 20), (1, 19)):
        h = mf.moebius_compose(maps[j], mf.moebius_inverse(maps[i]))
        assert np.max(np.abs(h(tr.snapshots[i]) - tr.snapshots[j])) <= 1e-6


def test_extract_degenerate():
    z = np.exp(1j * np.array([0.0, 1e-10, 2e-10, 3e-10]))
    tr = dy.simulate(dy.GlobalCircleModel(z, 1.0), RK4, 0.01, 5)
    with pytest.raises(DegenerateInitialData):
        dy.moebius_family_extract(tr)
    sph = dy.simulate(dy.SphereEnsemble(np.eye(3)), RK4, 0.01, 5)
    with pytest.raises(InvalidParameter):
        dy.moebius_family_extract(sph)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, TWO_PI, exclude_max=True), min_size=3, max_size=12))
def test_select_anchors_maxmin(ts):
    z = np.exp(1j * np.array(ts))
    try:
        i, j, k = dy.select_anchors(z)
    except DegenerateInitialData:
        return
    assert len({i, j, k}) == 3
    dist = np.abs(z[:, None] - z[None, :])
    assert dist[i, j] == dist.max()


# ---------------------------------------------------------------------------
# backend parity


def _all_models(g):
    X = _unit_rows(g.normal(size=(4, 3)))
    labels = np.array([0, 0, 1, 1])
    Qs = np.stack([np.stack([special_ortho_group.rvs(3, random_state=k * 2 + l) for l in range(2)])
                   for k in range(2)])
    Z = _unit_rows(g.normal(size=(4, 2)) + 1j * g.normal(size=(4, 2)))
    return [
        dy.PhaseEnsemble(g.uniform(0, TWO_PI, 5), 0.3, g.normal(size=(5, 5)), g.uniform(-1, 1, (5, 5))),
        dy.PhaseEnsemble(g.uniform(0, TWO_PI, 5), 0.3, 1.0, 0.2, noise_kappa=0.3, noise_coupling=0.7),
        dy.GlobalCircleModel.from_phases(g.uniform(0, TWO_PI, 5), 1.1, 0.4, 0.2),
        dy.SubEnsembleModel((g.uniform(0, TWO_PI, 3), g.uniform(0, TWO_PI, 4)), g.normal(size=(2, 2)),
                            g.uniform(-1, 1, (2, 2)), 0.1),
        dy.SphereEnsemble(X, mf.skew_part(g.normal(size=(3, 3))), g.normal(size=(4, 4))),
        dy.SphereEnsemble(X, None, g.normal(size=(2, 2)), labels, Qs),
        dy.SphereEnsemble(X, None, 1.0, noise_kappa=0.2),
        dy.ComplexSphereEnsemble(Z, mf.skew_part(1j * g.normal(size=(2, 2))), g.normal(size=(4, 4))),
        dy.ComplexSphereEnsemble(Z, None, 0.8),
        dy.MatrixEnsemble(np.stack([special_ortho_group.rvs(3, random_state=s) for s in range(3)]),
                          mf.skew_part(g.normal(size=(3, 3))), g.normal(size=(3, 3))),
        dy.MatrixEnsemble(np.stack([unitary_group.rvs(2, random_state=s) for s in range(3)]), None, 1.0),
    ]


def test_backend_parity(monkeypatch):
    models = _all_models(np.random.default_rng(21))
    compiled = []
    for m in models:
        cfg = EM if dy._noise_kappa(m) > 0 else RK4
        compiled.append(dy.integrate_batch(m, np.asarray(m.state)[None], cfg, 200, 50, seed=4)[1])
    monkeypatch.setattr(dy, "kernels", pykernels)
    for m, ref in zip(models, compiled):
        cfg = EM if dy._noise_kappa(m) > 0 else RK4
        rec = dy.integrate_batch(m, np.asarray(m.state)[None], cfg, 200, 50, seed=4)[1]
        if dy.model_kind(m) in ("phase", "multiplicative", "subensemble"):
            assert _dist(rec, ref) <= 1e-12, dy.model_kind(m)
        else:
            assert np.max(np.abs(rec - ref)) <= 1e-12, dy.model_kind(m)


def test_batch_equals_individual_runs():
    g = np.random.default_rng(22)
    m = dy.PhaseEnsemble(g.uniform(0, TWO_PI, 4), 0.0, 1.0, 0.0)
    init = g.uniform(0, TWO_PI, (3, 4))
    batch = dy.integrate_batch(m, init, RK4, 100)[0]
    for b in range(3):
        assert np.array_equal(batch[b], dy.integrate_batch(m, init[b:b + 1], RK4, 100)[0][0])


# ---------------------------------------------------------------------------
# trajectory I/O


def test_trajectory_json_roundtrip(tmp_path):
    tr = _circle_traj(23, 5)
    p = tmp_path / "t.json"
    io.write_trajectory_json(p, tr)
    meta, times, snaps = io.read_trajectory_json(p)
    assert np.array_equal(times, tr.times) and np.array_equal(snaps, tr.snapshots)
    assert meta["dt"] == RK4.dt and meta["method"] == "projected-rk4" and meta["kind"] == "circle"


def test_trajectory_csv_roundtrip(tmp_path):
    X = _unit_rows(np.random.default_rng(24).normal(size=(3, 3)))
    tr = dy.simulate(dy.SphereEnsemble(X, K=1.0), RK4, 0.01, 5, seed=8)
    p = tmp_path / "t.csv"
    io.write_trajectory_csv(p, tr)
    assert p.read_text().splitlines()[0] == "t,particle_id,component_index,value"
    times, vals = io.read_trajectory_csv(p)
    assert np.array_equal(times, tr.times) and np.array_equal(vals, tr.snapshots)
    meta = io.read_json(str(p) + ".meta.json")
    assert meta["seed"] == 8 and meta["method"] == "projected-rk4"
