"""Compare the compiled kernels with the numpy fallback.

Runs each model through integrate_batch with both backends, reports the
best-of-3 wall time, the speedup and the largest difference in the final
states. Usage: python benchmarks/bench_kernels.py [--quick]
"""
import argparse
import time

import numpy as np

from swarmfold import dirstat, dynamics as dy, manifold as mf
from swarmfold._core import BACKEND, pykernels
from swarmfold._core import kernels as compiled


def cases(quick):
    g = np.random.default_rng(0)
    B = 8 if quick else 32
    steps = 200 if quick else 1000
    rk4 = dy.IntegratorConfig("projected-rk4", 1e-3)
    em = dy.IntegratorConfig("euler-maruyama", 1e-3)
    N = 20
    K = g.uniform(-1, 1, (N, N))
    phase = dy.PhaseEnsemble(np.zeros(N), 0.3, K, 0.2)
    yield "phase pairwise", phase, g.uniform(0, 2 * np.pi, (B, N)), rk4, steps
    noisy = dy.PhaseEnsemble(np.zeros(N), 0.3, 1.5, 0.1, noise_kappa=0.5)
    yield "phase global + noise", noisy, g.uniform(0, 2 * np.pi, (B, N)), em, steps
    circ = dy.GlobalCircleModel.from_phases(np.zeros(N), 1.0, 0.4, 0.2)
    yield "circle (Riccati)", circ, np.exp(1j * g.uniform(0, 2 * np.pi, (B, N))), rk4, steps
    X = dirstat.uniform_sphere(N, 3, g)
    sph = dy.SphereEnsemble(X, None, g.uniform(-1, 1, (N, N)))
    yield "sphere S^2 pairwise", sph, np.stack([dirstat.uniform_sphere(N, 3, g) for _ in range(B)]), rk4, steps
    Z = dirstat.uniform_complex_sphere(N, 2, g)
    cs = dy.ComplexSphereEnsemble(Z, None, 1.0)
    yield "complex sphere C^2", cs, np.stack([dirstat.uniform_complex_sphere(N, 2, g) for _ in range(B)]), rk4, steps
    n = 6
    Q = np.array([mf.polar_project(g.standard_normal((3, 3))) for _ in range(B * n)])
    Q[np.linalg.det(Q) < 0, :, 0] *= -1
    Q = Q.reshape(B, n, 3, 3)
    so = dy.MatrixEnsemble(Q[0], None, 1.0)
    yield "SO(3)", so, Q, rk4, steps // 2


def timed(model, X0, cfg, steps, backend):
    saved = dy.kernels
    dy.kernels = backend
    try:
        best = np.inf
        for _ in range(3):
            t0 = time.perf_counter()
            out, _ = dy.integrate_batch(model, X0, cfg, steps, seed=1)
            best = min(best, time.perf_counter() - t0)
    finally:
        dy.kernels = saved
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller problems")
    args = ap.parse_args()
    print(f"compiled backend available: {BACKEND == 'cython'}")
    print(f"{'case':24s} {'compiled [s]':>13s} {'python [s]':>11s} {'speedup':>8s} {'max diff':>10s}")
    for name, model, X0, cfg, steps in cases(args.quick):
        tc, oc = timed(model, X0, cfg, steps, compiled)
        tp, op = timed(model, X0, cfg, steps, pykernels)
        diff = float(np.max(np.abs(oc - op)))
        print(f"{name:24s} {tc:13.4f} {tp:11.4f} {tp / tc:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
