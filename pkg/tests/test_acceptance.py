"""The twelve acceptance criteria, each at its stated tolerance.

Every test attaches a measurement line; the run ends with one PASS/FAIL
line per criterion.
"""
import time

import numpy as np
import pytest
from scipy.stats import special_ortho_group, unitary_group

from swarmfold import dirstat as ds
from swarmfold import dynamics as dy
from swarmfold import manifold as mf
from swarmfold import potentials as pt
from swarmfold import training as tr
from swarmfold.dirstat import gof
from swarmfold.tasks import multilayer as ml
from swarmfold.tasks import wahba as wb

TWO_PI = 2.0 * np.pi


def _unit_rows(x):
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def _sym(rng, n, lo=-1.0, hi=1.0):
    K = np.triu(rng.uniform(lo, hi, (n, n)), 1)
    return K + K.T


# ---------------------------------------------------------------------------
# 1. manifold preservation


@pytest.mark.acceptance(1, "Manifold preservation, all dynamics variants, t=100")
def test_manifold_preservation(detail):
    rng = np.random.default_rng(1)
    B, N, dt, T = 100, 4, 1e-3, 100.0
    nsteps = int(round(T / dt))
    rk = dy.IntegratorConfig("projected-rk4", dt)
    em = dy.IntegratorConfig("euler-maruyama", dt)
    ph = rng.uniform(0, TWO_PI, (B, N))
    K = _sym(rng, N, -2, 2)
    A = mf.skew_part(rng.normal(size=(3, 3)))
    H = mf.skew_part(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    X = _unit_rows(rng.normal(size=(B, N, 3)))
    Z = _unit_rows(rng.normal(size=(B, N, 2)) + 1j * rng.normal(size=(B, N, 2)))
    Qs = special_ortho_group.rvs(3, size=B * N, random_state=2).reshape(B, N, 3, 3)
    Us = unitary_group.rvs(2, size=B * N, random_state=3).reshape(B, N, 2, 2)
    Qsub = special_ortho_group.rvs(3, size=4, random_state=4).reshape(2, 2, 3, 3)
    cases = [
        ("noisy phase", dy.PhaseEnsemble(ph[0], 1.0, K, 0.3, noise_kappa=0.5), ph, em),
        ("multiplicative", dy.PhaseEnsemble(ph[0], 1.0, 1.0, 0.3, noise_kappa=0.5, noise_coupling=0.8), ph, em),
        ("global circle", dy.GlobalCircleModel(np.exp(1j * ph[0]), 1.0, 0.3, 1.0), np.exp(1j * ph), rk),
        ("sub-ensembles", dy.SubEnsembleModel((ph[0, :2], ph[0, 2:]), _sym(rng, 2) + np.eye(2), 0.2, 1.0), ph, rk),
        ("sphere S^2", dy.SphereEnsemble(X[0], A, K), X, rk),
        ("sphere sub-ensembles", dy.SphereEnsemble(X[0], A, _sym(rng, 2) + np.eye(2), labels=[0, 0, 1, 1], Q=Qsub),
         X, rk),
        ("complex sphere C^2", dy.ComplexSphereEnsemble(Z[0], H, K), Z, rk),
        ("SO(3)", dy.MatrixEnsemble(Qs[0], A, K), Qs, rk),
        ("U(2)", dy.MatrixEnsemble(Us[0], H, K), Us, rk),
    ]
    t0 = time.perf_counter()
    worst = {}
    for name, model, x0, cfg in cases:
        _, rec = dy.integrate_batch(model, x0, cfg, nsteps, record_every=1000, seed=7)
        assert rec.shape[0] == 100
        worst[name] = dy.manifold_residual(dy.model_kind(model), rec)
    elapsed = time.perf_counter() - t0
    top = max(worst.values())
    detail(f"{len(cases)} variants x {B} instances, max residual {top:.2e}, {elapsed:.0f} s")
    assert top <= 1e-9, worst
    assert elapsed <= 120.0


# ---------------------------------------------------------------------------
# 2. constants of motion


def _cross_ratios(Z, ref=(0, 1, 2)):
    i, j, k = ref
    rest = [m for m in range(Z.shape[1]) if m not in ref]
    return np.array([[mf.cross_ratio(z[i], z[j], z[k], z[m]) for m in rest] for z in Z])


@pytest.mark.acceptance(2, "Cross-ratio constants of motion (global and per sub-ensemble)")
def test_constants_of_motion(detail):
    rng = np.random.default_rng(2)
    cfg = dy.IntegratorConfig("projected-rk4", 1e-3)
    z0 = np.exp(1j * rng.uniform(0, TWO_PI, 6))
    model = dy.GlobalCircleModel(z0, K=1.3, beta=0.4, omega=0.7)
    traj = dy.simulate(model, cfg, 10.0, record_every=10)
    cr = _cross_ratios(traj.snapshots)
    assert cr.shape[1] == 3
    drift_global = float(np.max(np.abs(cr - cr[0]) / np.abs(cr[0])))

    groups = tuple(rng.uniform(0, TWO_PI, n) for n in (4, 5, 6))
    sub = dy.SubEnsembleModel(groups, rng.uniform(-1.5, 1.5, (3, 3)), rng.uniform(-1, 1, (3, 3)), 0.5)
    traj = dy.simulate(sub, cfg, 10.0, record_every=10)
    Z = np.exp(1j * traj.snapshots)
    drift_blocks = []
    for s in sub.block_slices():
        crb = _cross_ratios(Z[:, s])
        drift_blocks.append(float(np.max(np.abs(crb - crb[0]) / np.abs(crb[0]))))
    # the model must actually move for the check to mean anything
    moved = float(np.max(np.abs(Z[-1] - Z[0])))
    detail(f"global N=6 drift {drift_global:.1e}; D=3 block drifts "
           + ", ".join(f"{d:.1e}" for d in drift_blocks))
    assert moved > 0.1
    assert drift_global <= 1e-6
    assert max(drift_blocks) <= 1e-6


# ---------------------------------------------------------------------------
# 3. Moebius-flow extraction


@pytest.mark.acceptance(3, "Moebius-flow extraction reproduces every oscillator")
def test_moebius_extraction(detail):
    rng = np.random.default_rng(3)
    z0 = np.exp(1j * rng.uniform(0, TWO_PI, 10))
    model = dy.GlobalCircleModel(z0, K=-0.8, beta=0.3, omega=1.1)
    traj = dy.simulate(model, dy.IntegratorConfig("projected-rk4", 1e-3), 5.0, record_every=100)
    maps = dy.moebius_family_extract(traj)
    anchors = dy.select_anchors(traj.snapshots[0])
    others = [j for j in range(10) if j not in anchors]
    res = max(float(np.max(np.abs(g(z0[others]) - z[others]))) for g, z in zip(maps[1:], traj.snapshots[1:]))
    detail(f"{len(maps) - 1} recorded times, 7 non-anchor oscillators, max residual {res:.1e}")
    assert len(maps) - 1 == 50
    assert res <= 1e-6


# ---------------------------------------------------------------------------
# 4. gradient-flow structure


def _rel(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def _monotone(values, sign):
    """Largest violation of monotonicity (sign=+1 nondecreasing, -1 nonincreasing)."""
    steps = sign * np.diff(values)
    return float(max(0.0, -steps.min()))


@pytest.mark.acceptance(4, "Gradient-flow structure of V, V_sph and E")
def test_gradient_flow_structure(detail):
    rng = np.random.default_rng(4)
    cfg = dy.IntegratorConfig("projected-rk4", 1e-3)
    grad_err, viol = {}, {}

    N = 5
    K = _sym(rng, N, 0.2, 1.5)
    Q = special_ortho_group.rvs(3, size=N, random_state=5)
    fd = pt.fd_gradient_group(lambda S: pt.potential_so(S, K).value, Q)
    grad_err["SO(3)"] = _rel(pt.potential_so(Q, K).gradient, fd)
    _, rec = dy.integrate_batch(dy.MatrixEnsemble(Q, None, K), Q[None], cfg, 5000, 1)
    viol["SO(3)"] = _monotone([pt.potential_so(S, K).value for S in rec[:, 0]], +1)

    U = unitary_group.rvs(2, size=N, random_state=6)
    fd = pt.fd_gradient_group(lambda S: pt.potential_u(S, K).value, U, complex_=True)
    grad_err["U(2)"] = _rel(pt.potential_u(U, K).gradient, fd)
    _, rec = dy.integrate_batch(dy.MatrixEnsemble(U, None, K), U[None], cfg, 5000, 1)
    viol["U(2)"] = _monotone([pt.potential_u(S, K).value for S in rec[:, 0]], +1)

    N = 20
    K = _sym(rng, N, -0.5, 1.5)
    X = _unit_rows(rng.normal(size=(N, 3)))
    fd = pt.fd_gradient_sphere(lambda S: pt.potential_sphere(S, K).value, X)
    grad_err["S^2"] = _rel(pt.potential_sphere(X, K).gradient, fd)
    _, rec = dy.integrate_batch(dy.SphereEnsemble(X, None, K), X[None], cfg, 5000, 1)
    viol["S^2"] = _monotone([pt.potential_sphere(S, K).value for S in rec[:, 0]], -1)

    N = 10
    K = _sym(rng, N, -0.5, 1.5)
    phi = rng.uniform(0, TWO_PI, N)
    fd = pt.fd_gradient_circle(lambda p: pt.potential_circle(p, K).value, phi)
    grad_err["circle"] = _rel(pt.potential_circle(phi, K).gradient, fd)
    _, rec = dy.integrate_batch(dy.PhaseEnsemble(phi, 0.0, K, 0.0), phi[None], cfg, 5000, 1)
    viol["circle"] = _monotone([pt.potential_circle(p, K).value for p in rec[:, 0]], +1)

    detail("grad rel err " + ", ".join(f"{k} {v:.1e}" for k, v in grad_err.items())
           + "; max step violation " + f"{max(viol.values()):.1e}")
    assert max(grad_err.values()) <= 1e-5, grad_err
    assert max(viol.values()) <= 1e-10, viol


# ---------------------------------------------------------------------------
# 5. reduction chain


def _chain_trajectories(phi0, K, omega, t_end=5.0, every=100):
    cfg = dy.IntegratorConfig("projected-rk4", 1e-3)
    nsteps = int(round(t_end / cfg.dt))
    J = np.array([[0.0, -omega], [omega, 0.0]])
    out = {}
    _, rec = dy.integrate_batch(dy.PhaseEnsemble(phi0, omega, K, 0.0), phi0[None], cfg, nsteps, every)
    out["phase"] = rec[:, 0]
    X0 = np.column_stack([np.cos(phi0), np.sin(phi0)])
    _, rec = dy.integrate_batch(dy.SphereEnsemble(X0, J, K), X0[None], cfg, nsteps, every)
    out["sphere d=2"] = np.arctan2(rec[:, 0, :, 1], rec[:, 0, :, 0])
    Z0 = np.exp(1j * phi0)[:, None]
    # the complex m=1 model couples twice as strongly; K/2 matches the real models
    _, rec = dy.integrate_batch(dy.ComplexSphereEnsemble(Z0, np.array([[1j * omega]]), 0.5 * K),
                                Z0[None], cfg, nsteps, every)
    out["complex m=1"] = np.angle(rec[:, 0, :, 0])
    Q0 = np.array([mf.rotation2(p) for p in phi0])
    _, rec = dy.integrate_batch(dy.MatrixEnsemble(Q0, J, K), Q0[None], cfg, nsteps, every)
    out["SO(2)"] = np.arctan2(rec[:, 0, :, 1, 0], rec[:, 0, :, 0, 0])
    times = np.arange(1, nsteps // every + 1) * every * cfg.dt
    return times, out


@pytest.mark.acceptance(5, "Reduction chain and d=4 vs m=2 divergence")
def test_reduction_chain(detail):
    rng = np.random.default_rng(5)
    N = 6
    phi0 = rng.uniform(0, TWO_PI, N)
    K = _sym(rng, N, -1.0, 2.0)
    times, out = _chain_trajectories(phi0, K, omega=0.8)
    names = list(out)
    worst = 0.0
    for a in range(len(names)):
        for b in range(a + 1, len(names)):
            d = np.abs(mf.wrap_to_pi(out[names[a]] - out[names[b]])).max(axis=1)
            worst = max(worst, float(np.max(d / times)))

    cfg = dy.IntegratorConfig("projected-rk4", 1e-3)
    Z0 = _unit_rows(rng.normal(size=(N, 2)) + 1j * rng.normal(size=(N, 2)))
    X0 = np.stack([Z0[:, 0].real, Z0[:, 0].imag, Z0[:, 1].real, Z0[:, 1].imag], axis=1)
    _, xr = dy.integrate_batch(dy.SphereEnsemble(X0, None, 1.0), X0[None], cfg, 2000, 100)
    gaps = []
    for scale in (0.5, 1.0):
        _, zr = dy.integrate_batch(dy.ComplexSphereEnsemble(Z0, None, scale), Z0[None], cfg, 2000, 100)
        zreal = np.stack([zr[..., 0].real, zr[..., 0].imag, zr[..., 1].real, zr[..., 1].imag], axis=-1)
        gaps.append(float(np.max(np.abs(zreal - xr))))
    detail(f"max pairwise residual per unit time {worst:.1e}; d=4 vs m=2 gap {min(gaps):.2e} by t=2")
    assert worst <= 1e-6
    assert min(gaps) > 1e-3


# ---------------------------------------------------------------------------
# 6. distribution suite


def _rotation3(seed):
    return special_ortho_group.rvs(3, random_state=seed)


def _recovery_errors(p, q):
    """Per-parameter errors: (absolute errors for locations, relative for concentrations)."""
    if isinstance(p, ds.VonMisesParams):
        return [abs(mf.wrap_to_pi(q.mu - p.mu))], [abs(q.kappa / p.kappa - 1)]
    if isinstance(p, ds.WrappedCauchyParams):
        return [abs(q.alpha - p.alpha)], []
    if isinstance(p, ds.KatoJonesParams):
        return ([abs(mf.wrap_to_pi(q.mu - p.mu)), abs(mf.wrap_to_pi(q.nu - p.nu)), abs(q.r - p.r)],
                [abs(q.kappa / p.kappa - 1)])
    if isinstance(p, ds.HyperbolicVonMisesParams):
        return [abs(mf.wrap_to_pi(q.psi - p.psi))], [abs(q.eta / p.eta - 1), abs(q.alpha_exp / p.alpha_exp - 1)]
    if isinstance(p, ds.VonMisesFisherParams):
        return [float(np.arccos(np.clip(q.mu @ p.mu, -1, 1)))], [abs(q.kappa / p.kappa - 1)]
    if isinstance(p, ds.SphericalCauchyParams):
        return [float(np.max(np.abs(q.zeta - p.zeta)))], []
    if isinstance(p, ds.BergmanSphericalCauchyParams):
        return [float(np.max(np.abs(q.w - p.w)))], []
    # Bingham: axes up to sign, nonzero Z entries relative
    axes = [float(np.arccos(min(1.0, abs(p.M[:, k] @ q.M[:, k])))) for k in range(p.d)]
    nz = p.Z != 0
    return axes, list(np.abs(q.Z[nz] / p.Z[nz] - 1))


@pytest.mark.acceptance(6, "Distribution suite: normalisation, sampler fit, nesting, recovery")
def test_distribution_suite(detail):
    t0 = time.perf_counter()
    families = [
        ds.VonMisesParams(1.0, 3.0),
        ds.WrappedCauchyParams.from_polar(0.6, 2.0),
        ds.KatoJonesParams(0.7, 1.1, 0.5, 2.0),
        ds.HyperbolicVonMisesParams(1.0, 2.0, 0.5),
        ds.VonMisesFisherParams([0.0, 0.6, 0.8], 5.0),
        ds.SphericalCauchyParams([0.5, 0.0, -0.2]),
        ds.BinghamParams(_rotation3(8), [-5.0, -1.0, 0.0]),
        ds.BergmanSphericalCauchyParams([0.3 + 0.2j, -0.1 + 0.4j]),
    ]
    norms, pvals, loc_err, conc_err = [], [], [], []
    for seed, p in enumerate(families):
        fam = ds.family_of(p)
        if fam in ds.CIRCLE_FAMILIES:
            norms.append(gof.circle_integral(lambda t: ds.density(p, t)))
        elif fam == "bergman-cauchy":
            norms.append(gof.sphere_integral(lambda x: ds.density(p, gof.complexify(x)), 4))
        else:
            norms.append(gof.sphere_integral(lambda x: ds.density(p, x), 3))
        x = ds.sample(p, 100_000, rng=100 + seed)
        if fam in ds.CIRCLE_FAMILIES:
            pvals.append(gof.circle_chi_square(x, lambda a: ds.log_density(p, a))[1])
        elif fam == "bergman-cauchy":
            pvals.append(gof.sphere_chi_square(gof.realify(x), lambda a: ds.log_density(p, gof.complexify(a)),
                                               bins=6)[1])
        else:
            pvals.append(gof.sphere_chi_square(x, lambda a: ds.log_density(p, a))[1])
        loc, conc = _recovery_errors(p, ds.fit(fam, x))
        loc_err += loc
        conc_err += conc
    # Bergman normalisation on the circle (m = 1) as well
    b1 = ds.BergmanSphericalCauchyParams([0.5j])
    norms.append(gof.sphere_integral(lambda x: ds.density(b1, gof.complexify(x)), 2))

    phi = np.linspace(0, TWO_PI, 721)
    S2 = ds.uniform_sphere(500, 3, 9)
    nest = [
        np.abs(ds.density(ds.KatoJonesParams(0.7, 1.1, 0.0, 2.0), phi) - ds.density(ds.VonMisesParams(0.7, 2.0), phi)),
        np.abs(ds.density(ds.KatoJonesParams(0.7, 1.1, 0.4, 0.0), phi)
               - ds.density(ds.WrappedCauchyParams(0.4 * np.exp(1.8j)), phi)),
        np.abs(ds.density(ds.VonMisesParams(0.3, 0.0), phi) - 1.0 / TWO_PI),
        np.abs(ds.density(ds.SphericalCauchyParams([0.0, 0.0, 0.0]), S2) - 1.0 / (4.0 * np.pi)),
    ]
    nest_err = max(float(np.max(e)) for e in nest)
    elapsed = time.perf_counter() - t0
    detail(f"norm err {max(abs(np.array(norms) - 1)):.1e}, min p {min(pvals):.3f}, "
           f"nesting {nest_err:.1e}, location err {max(loc_err):.3f}, concentration rel err {max(conc_err):.3f}, "
           f"{elapsed:.0f} s")
    assert max(abs(np.array(norms) - 1)) <= 1e-3
    assert min(pvals) > 0.01, pvals
    assert nest_err <= 1e-12
    assert max(loc_err) <= 0.02
    assert max(conc_err) <= 0.05
    assert elapsed <= 300.0


# ---------------------------------------------------------------------------
# 7. group invariance


@pytest.mark.acceptance(7, "Group invariance of wrapped and spherical Cauchy families")
def test_group_invariance(detail):
    n = 100_000
    g = mf.MoebiusMap(0.3 - 0.4j, 1.2)
    wc = ds.WrappedCauchyParams.from_polar(0.5, 2.5)
    pushed = ds.push_samples_moebius(g, ds.sample(wc, n, rng=21))
    direct = ds.sample(ds.pushforward_moebius(wc, g), n, rng=22)
    p_circle = gof.two_sample_circle(pushed, direct)[1]

    kj = ds.KatoJonesParams(0.4, 2.0, 0.3, 1.5)
    pushed = ds.push_samples_moebius(g, ds.sample(kj, n, rng=23))
    direct = ds.sample(ds.pushforward_moebius(kj, g), n, rng=24)
    p_kj = gof.two_sample_circle(pushed, direct)[1]

    q = mf.BallIsometry([0.2, -0.35, 0.3], _rotation3(25))
    sc = ds.SphericalCauchyParams([0.1, 0.4, -0.2])
    pushed = ds.push_samples_ball(q, ds.sample(sc, n, rng=26))
    direct = ds.sample(ds.pushforward_ball_isometry(sc, q), n, rng=27)
    p_sphere = gof.two_sample_sphere(pushed, direct)[1]

    # uniform pushed by the group lands on the predicted parameter
    u = np.random.default_rng(28).uniform(0, TWO_PI, n)
    fit_wc = ds.fit("wrapped-cauchy", ds.push_samples_moebius(g, u))
    pred_wc = ds.pushforward_moebius(ds.WrappedCauchyParams(0j), g)
    err_wc = abs(fit_wc.alpha - pred_wc.alpha)
    fit_sc = ds.fit("spherical-cauchy", ds.push_samples_ball(q, ds.uniform_sphere(n, 3, 29)))
    pred_sc = ds.pushforward_ball_isometry(ds.SphericalCauchyParams(np.zeros(3)), q)
    err_sc = float(np.max(np.abs(fit_sc.zeta - pred_sc.zeta)))
    detail(f"two-sample p: wrapped Cauchy {p_circle:.3f}, Kato-Jones {p_kj:.3f}, spherical Cauchy {p_sphere:.3f}; "
           f"uniform pushforward error disc {err_wc:.4f}, ball {err_sc:.4f}")
    assert abs(pred_wc.alpha) > 0.3 and np.linalg.norm(pred_sc.zeta) > 0.3
    assert min(p_circle, p_kj, p_sphere) > 0.01
    assert err_wc <= 0.02 and err_sc <= 0.02


# ---------------------------------------------------------------------------
# 8. stationary densities


@pytest.mark.acceptance(8, "Stationary densities of the noisy dynamics")
def test_stationary_densities(detail):
    t0 = time.perf_counter()
    g = np.random.default_rng(8)
    cfg = dy.IntegratorConfig("euler-maruyama", 0.01)
    nsteps = 20_000  # t = 200
    N = 2000

    m = dy.PhaseEnsemble(g.uniform(0, TWO_PI, N), 0.0, 2.0, 0.0, noise_kappa=0.5)
    x = dy.integrate_batch(m, m.phases[None], cfg, nsteps, seed=81)[0][0]
    p_vm = ds.fit("von-mises", x)
    pv_vm = gof.circle_chi_square(x, lambda a: ds.log_density(p_vm, a))[1]

    m = dy.PhaseEnsemble(g.uniform(0, TWO_PI, N), 0.0, 2.0, 0.0, noise_kappa=0.5, noise_coupling=0.9)
    x = dy.integrate_batch(m, m.phases[None], cfg, nsteps, seed=82)[0][0]
    p_hvm = ds.fit("hyperbolic-von-mises", x)
    pv_hvm = gof.circle_chi_square(x, lambda a: ds.log_density(p_hvm, a))[1]

    X = _unit_rows(g.normal(size=(N, 3)))
    m = dy.SphereEnsemble(X, K=2.0, noise_kappa=0.3)
    x = dy.integrate_batch(m, X[None], cfg, nsteps, seed=83)[0][0]
    p_vmf = ds.fit("vmf", x)
    pv_vmf = gof.sphere_chi_square(x, lambda a: ds.log_density(p_vmf, a), bins=6)[1]
    elapsed = time.perf_counter() - t0
    detail(f"chi-square p: von Mises {pv_vm:.3f} (kappa {p_vm.kappa:.2f}), hyperbolic von Mises {pv_hvm:.3f}, "
           f"vMF {pv_vmf:.3f} (kappa {p_vmf.kappa:.2f}); {elapsed:.0f} s")
    assert p_vm.kappa > 1.0 and p_vmf.kappa > 1.0
    assert min(pv_vm, pv_hvm, pv_vmf) > 0.01
    assert elapsed <= 600.0


# ---------------------------------------------------------------------------
# 9. network reconstruction


@pytest.mark.acceptance(9, "Network reconstruction by score matching and MLE")
def test_network_reconstruction(detail):
    g = np.random.default_rng(9)
    K = _sym(g, 4)
    X = tr.equilibrium_samples(K, 100_000, seed=91)
    Kh, bh = tr.score_matching_fit(X)
    err_sm = float(np.max(np.abs(Kh * np.cos(bh) - K)))

    K3 = np.array([[0.0, 0.8, -0.5], [0.8, 0.0, 0.3], [-0.5, 0.3, 0.0]])
    X3 = tr.equilibrium_samples(K3, 100_000, seed=92)
    Ks, bs = tr.score_matching_fit(X3)
    res = tr.mle_train(tr.TrainProblem(None, X3), seed=93)
    kappa_mle = res.kappa.kappa
    err_agree = float(np.max(np.abs(kappa_mle - Ks * np.exp(1j * bs))))
    err_mle = float(np.max(np.abs(kappa_mle - K3)))
    detail(f"N=4 score matching max error {err_sm:.3f}; N=3 MLE vs score matching {err_agree:.3f}, "
           f"MLE vs truth {err_mle:.3f}")
    assert err_sm <= 0.1
    assert err_agree <= 0.1
    assert err_mle <= 0.1


# ---------------------------------------------------------------------------
# 10. Wahba


@pytest.mark.acceptance(10, "Wahba: SVD and stochastic policy")
def test_wahba(detail):
    inst, R = wb.random_instance(20, 0.0, seed=100)
    err_svd = mf.chordal_distance(wb.wahba_svd(inst), R)
    err_pol = mf.chordal_distance(wb.wahba_stochastic(inst, seed=100).rotation, R)

    gaps = []
    for s in range(20):
        inst, _ = wb.random_instance(20, 0.05, seed=200 + s)
        j_svd = float(wb.wahba_loss(wb.wahba_svd(inst), inst))
        j_pol = wb.wahba_stochastic(inst, seed=s).loss
        gaps.append((j_pol - j_svd) / j_svd)

    q = ds.uniform_sphere(1000, 4, 101)
    same_rot = np.array_equal(wb.quaternions_to_rotations(q), wb.quaternions_to_rotations(-q))
    same_loss = np.array_equal(wb.wahba_loss(wb.quaternions_to_rotations(q), inst),
                               wb.wahba_loss(wb.quaternions_to_rotations(-q), inst))
    detail(f"noiseless chordal error SVD {err_svd:.1e}, policy {err_pol:.1e}; "
           f"worst relative loss gap over 20 noisy instances {max(gaps):.1e}; q/-q bitwise {same_rot and same_loss}")
    assert err_svd <= 1e-10
    assert err_pol <= 1e-3
    assert max(gaps) <= 0.05
    assert same_rot and same_loss


# ---------------------------------------------------------------------------
# 11. multilayer alignment


@pytest.mark.acceptance(11, "Multilayer alignment of a planted two-layer instance")
def test_multilayer_alignment(detail):
    cloud, _ = ml.planted_instance(p=10, d=2, seed=11)
    res = ml.multilayer_align(cloud, seed=11)
    pos = res.aligned(cloud)
    pair = float(np.max(mf.hyperbolic_distance(pos[0], pos[1])))
    intra = ml.intra_layer_residual(cloud, res.isometries)

    # term count on a three-layer cloud as well
    rng = np.random.default_rng(111)
    layers = [0.5 * _unit_rows(rng.normal(size=(7, 3))) for _ in range(3)]
    cloud3 = ml.LayerCloud(layers, np.array([[0, 0, 1, 0], [1, 2, 2, 3]]), 0.0, 1.0)
    counts = (res.term_count, ml.loss_term_count(cloud3))
    detail(f"pair-distance residual {pair:.1e}, intra-layer residual {intra:.1e}, "
           f"term counts {counts[0]} (p=10, r=2) and {counts[1]} (p=7, r=3)")
    assert pair <= 1e-3
    assert counts == (10 * 10 * 2 * 1 // 2, 7 * 7 * 3 * 2 // 2)
    assert intra <= 1e-8


# ---------------------------------------------------------------------------
# 12. parameter accounting


@pytest.mark.acceptance(12, "Parameter accounting")
def test_parameter_accounting(detail):
    moebius = [tr.parameter_count(k, "moebius") for k in range(1, 11)]
    torus = [tr.parameter_count(d, "torus") for d in range(1, 11)]
    detail(f"moebius k=1..10 {moebius}; torus d=1..10 {torus}")
    assert moebius == [k * (k + 9) // 2 for k in range(1, 11)]
    assert torus == [d * (d + 4) for d in range(1, 11)]
    assert tr.parameter_count(1, "moebius") == 5 and tr.parameter_count(4, "moebius") == 26
    assert tr.parameter_count(3, "torus") == 21
    assert all(type(v) is int for v in moebius + torus)
