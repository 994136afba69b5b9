"""Parameter estimation for phase-oscillator networks.

The equilibrium law of the symmetric noisy phase model is the energy model

    q(phi) proportional to exp(z^* kappa z),   z_j = exp(i phi_j),

with a Hermitian coupling matrix kappa_ij = K_ij exp(i beta_ij) and zero
diagonal (diagonal entries only add a constant). Two estimators are
provided: stochastic-gradient maximum likelihood with persistent Langevin
chains, and score matching, which reduces to a linear system because the
energy is linear in kappa.

Parameters of kappa are handled as the real vector theta of
(Re kappa_ij, Im kappa_ij) over pairs i < j.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import dynamics as dy
from .errors import DegenerateData, DimensionMismatch, InvalidParameter, SingularSystem
from .noise import make_rng, rng_state_from_json, rng_state_to_json
from .potentials import HermitianCouplingMatrix

LOSSES = ("neg-log-likelihood", "score-matching", "task-loss")


@dataclass
class TrainProblem:
    """What to learn and from which data.

    ``template`` is a model instance fixing the oscillator count; ``dataset``
    holds observed phase vectors (n, N). ``mask`` marks learnable coupling
    entries (symmetrised); ``learn_beta`` False keeps kappa real.
    """

    template: object
    dataset: np.ndarray
    mask: Optional[np.ndarray] = None
    learn_beta: bool = True
    loss: str = "neg-log-likelihood"

    def __post_init__(self):
        data = np.asarray(self.dataset, dtype=float)
        if data.ndim == 1:
            data = data[None]
        if data.size == 0:
            raise DegenerateData("dataset is empty")
        N = data.shape[1]
        tN = getattr(self.template, "N", N)
        if tN != N:
            raise DimensionMismatch(f"dataset has {N} oscillators, template has {tN}")
        mask = np.ones((N, N), dtype=bool) if self.mask is None else np.asarray(self.mask, dtype=bool)
        if mask.shape != (N, N):
            raise DimensionMismatch(f"mask must be {N}x{N}")
        mask = mask | mask.T
        np.fill_diagonal(mask, False)
        if self.loss not in LOSSES:
            raise InvalidParameter(f"loss must be one of {LOSSES}")
        self.dataset = data
        self.mask = mask

    @property
    def N(self):
        return self.dataset.shape[1]


# ---------------------------------------------------------------------------
# energy model helpers


def pair_index(N):
    return np.triu_indices(N, 1)


def theta_from_kappa(kappa) -> np.ndarray:
    k = kappa.kappa if isinstance(kappa, HermitianCouplingMatrix) else np.asarray(kappa, dtype=complex)
    iu = pair_index(k.shape[0])
    return np.concatenate([k[iu].real, k[iu].imag])


def kappa_from_theta(theta, N) -> HermitianCouplingMatrix:
    theta = np.asarray(theta, dtype=float)
    P = N * (N - 1) // 2
    if theta.size != 2 * P:
        raise DimensionMismatch(f"theta must have {2 * P} entries")
    k = np.zeros((N, N), dtype=complex)
    iu = pair_index(N)
    k[iu] = theta[:P] + 1j * theta[P:]
    k = k + k.conj().T
    return HermitianCouplingMatrix(k)


def energy(phases, kappa) -> np.ndarray:
    """z^* kappa z for each row of phases."""
    k = kappa.kappa if isinstance(kappa, HermitianCouplingMatrix) else np.asarray(kappa)
    z = np.exp(1j * np.asarray(phases, dtype=float))
    return np.real(np.einsum("...i,ij,...j->...", z.conj(), k, z))


def energy_gradient(phases, kappa) -> np.ndarray:
    """d(z^* kappa z)/d phi_j = 2 Im(conj(z_j) (kappa z)_j)."""
    k = kappa.kappa if isinstance(kappa, HermitianCouplingMatrix) else np.asarray(kappa)
    z = np.exp(1j * np.asarray(phases, dtype=float))
    return 2.0 * np.imag(z.conj() * (z @ k.T))


def second_moment(phases) -> np.ndarray:
    """Sample average of z z^* (entries mean z_i conj(z_j))."""
    z = np.exp(1j * np.asarray(phases, dtype=float))
    return (z.T @ z.conj()) / z.shape[0]


def log_likelihood_gradient(data_moment, model_moment) -> np.ndarray:
    """Gradient of the mean log-likelihood with respect to theta.

    d/dRe kappa_ij and d/dIm kappa_ij (i < j) of <z^* kappa z>_data - log Z
    equal 2 Re and 2 Im of (<z z^*>_data - <z z^*>_model)_ij.
    """
    D = np.asarray(data_moment) - np.asarray(model_moment)
    iu = pair_index(D.shape[0])
    return 2.0 * np.concatenate([D[iu].real, D[iu].imag])


def exact_log_partition(kappa, nodes: int = 64) -> float:
    """log of the integral of exp(z^* kappa z) over the N-torus, N <= 3.

    Periodic trapezoid rule on a tensor grid (spectrally accurate).
    """
    k = kappa.kappa if isinstance(kappa, HermitianCouplingMatrix) else np.asarray(kappa)
    N = k.shape[0]
    if N > 3:
        raise InvalidParameter("exact partition function is only provided for N <= 3")
    # the energy is invariant under a common rotation, so fix phi_0 = 0
    t = 2.0 * np.pi * np.arange(nodes) / nodes
    grids = np.meshgrid(*([t] * (N - 1)), indexing="ij")
    phases = np.stack([np.zeros_like(grids[0]), *grids], axis=-1).reshape(-1, N) if N > 1 else np.zeros((1, 1))
    e = energy(phases, k)
    m = e.max()
    vol = (2.0 * np.pi) ** N
    return float(m + np.log(np.mean(np.exp(e - m)) * vol))


def exact_second_moment(kappa, nodes: int = 64) -> np.ndarray:
    k = kappa.kappa if isinstance(kappa, HermitianCouplingMatrix) else np.asarray(kappa)
    N = k.shape[0]
    if N > 3:
        raise InvalidParameter("exact moments are only provided for N <= 3")
    t = 2.0 * np.pi * np.arange(nodes) / nodes
    grids = np.meshgrid(*([t] * (N - 1)), indexing="ij")
    phases = np.stack([np.zeros_like(grids[0]), *grids], axis=-1).reshape(-1, N)
    e = energy(phases, k)
    w = np.exp(e - e.max())
    w /= w.sum()
    z = np.exp(1j * phases)
    return (z * w[:, None]).T @ z.conj()


def exact_log_likelihood(phases, kappa) -> float:
    return float(np.mean(energy(phases, kappa)) - exact_log_partition(kappa))


# ---------------------------------------------------------------------------
# sampling from the energy model


def langevin_model(kappa, phases, noise_kappa: float = 1.0) -> dy.PhaseEnsemble:
    """Noisy phase ensemble whose equilibrium law is exp(z^* kappa z).

    The drift (1/N) sum K'_ij sin(phi_i - phi_j - beta_ij) with noise level
    kappa_n matches when K' = 2 N kappa_n |kappa| and beta = arg kappa.
    """
    k = kappa if isinstance(kappa, HermitianCouplingMatrix) else HermitianCouplingMatrix(kappa)
    N = k.kappa.shape[0]
    return dy.PhaseEnsemble(phases, 0.0, 2.0 * N * noise_kappa * k.K, k.beta, noise_kappa=noise_kappa)


def equilibrium_samples(kappa, n_samples: int, seed: int = 0, chains: int = 1000,
                        dt: float = 5e-3, noise_kappa: float = 1.0, spacing: float = 1.0):
    """Snapshots from the Langevin phase model after a burn-in of 100/noise_kappa time units.

    Chains start uniform; each contributes snapshots ``spacing`` time units apart.
    """
    k = kappa if isinstance(kappa, HermitianCouplingMatrix) else HermitianCouplingMatrix(kappa)
    N = k.kappa.shape[0]
    g = make_rng(seed)
    chains = int(min(chains, n_samples))
    per_chain = -(-int(n_samples) // chains)
    x0 = g.uniform(0.0, 2.0 * np.pi, (chains, N))
    model = langevin_model(k, x0[0], noise_kappa)
    cfg = dy.IntegratorConfig("euler-maruyama", dt)
    burn = int(round(100.0 / noise_kappa / dt))
    every = max(1, int(round(spacing / dt)))
    X, rec = dy.integrate_batch(model, x0, cfg, burn + per_chain * every, record_every=every, seed=seed)
    skip = burn // every
    snaps = rec[skip:skip + per_chain]  # (per_chain, chains, N)
    return snaps.reshape(-1, N)[: int(n_samples)]


class LangevinChains:
    """Persistent Euler-Maruyama chains targeting exp(z^* kappa z)."""

    def __init__(self, N: int, chains: int = 2000, dt: float = 1e-2, seed: int = 0):
        self.rng = make_rng(seed)
        self.dt = float(dt)
        self.phases = self.rng.uniform(0.0, 2.0 * np.pi, (int(chains), int(N)))

    def run(self, kappa, nsteps: int) -> np.ndarray:
        s = np.sqrt(2.0 * self.dt)
        for _ in range(int(nsteps)):
            drift = energy_gradient(self.phases, kappa)
            self.phases = np.mod(self.phases + self.dt * drift
                                 + s * self.rng.standard_normal(self.phases.shape), 2.0 * np.pi)
        return self.phases

    def state(self) -> dict:
        return {"phases": self.phases.tolist(), "dt": self.dt,
                "rng": rng_state_to_json(self.rng.bit_generator.state)}

    @classmethod
    def from_state(cls, st: dict) -> "LangevinChains":
        obj = cls.__new__(cls)
        obj.rng = make_rng(0)
        obj.rng.bit_generator.state = rng_state_from_json(st["rng"])
        obj.dt = float(st["dt"])
        obj.phases = np.array(st["phases"], dtype=float)
        return obj


# ---------------------------------------------------------------------------
# maximum likelihood

DEFAULT_LR = 1e-2
DEFAULT_CLIP = 10.0


def mle_gradient_step(problem: TrainProblem, kappa, data_batch, model_batch,
                      lr: float = DEFAULT_LR, clip: float = DEFAULT_CLIP) -> HermitianCouplingMatrix:
    """One ascent step on the mean log-likelihood.

    The gradient is the moment mismatch <z z^*>_data - <z z^*>_model (times
    2 in theta coordinates); it is masked, clipped to norm ``clip`` and the
    result is re-symmetrised so kappa stays Hermitian.
    """
    if not isinstance(kappa, HermitianCouplingMatrix):
        kappa = HermitianCouplingMatrix(kappa)
    data_batch = np.asarray(data_batch, dtype=float)
    model_batch = np.asarray(model_batch, dtype=float)
    if data_batch.size == 0 or model_batch.size == 0:
        raise DegenerateData("data and model batches must be nonempty")
    N = problem.N
    if kappa.kappa.shape != (N, N):
        raise DimensionMismatch("kappa does not match the problem size")
    return _step_from_moments(problem, kappa, second_moment(data_batch) - second_moment(model_batch), lr, clip)


@dataclass
class TrainResult:
    kappa: HermitianCouplingMatrix
    history: list
    seed: int
    wall_clock: float = 0.0
    config: dict = field(default_factory=dict)

    def report(self, include_timing: bool = False) -> dict:
        out = {"config": self.config, "seed": self.seed, "history": self.history,
               "K": self.kappa.K, "beta": self.kappa.beta}
        if include_timing:
            out["wall_clock"] = self.wall_clock
        return out


def mle_train(problem: TrainProblem, iterations: int = 1500, lr: float = DEFAULT_LR,
              clip: float = DEFAULT_CLIP, chains: int = 2000, steps_per_update: int = 10,
              dt: float = 1e-2, seed: int = 0, kappa0=None, average_fraction: float = 0.3) -> TrainResult:
    """Stochastic-gradient maximum likelihood with persistent Langevin chains.

    The returned kappa is the average of the iterates over the final
    ``average_fraction`` of the run, which removes most of the chain noise.
    """
    t0 = time.perf_counter()
    N = problem.N
    kappa = HermitianCouplingMatrix(np.zeros((N, N)) if kappa0 is None else kappa0)
    data_moment = second_moment(problem.dataset)
    sampler = LangevinChains(N, chains, dt, seed)
    history = []
    tail_start = int(iterations * (1.0 - average_fraction))
    acc = np.zeros((N, N), dtype=complex)
    count = 0
    for it in range(int(iterations)):
        model_batch = sampler.run(kappa, steps_per_update)
        mismatch = data_moment - second_moment(model_batch)
        history.append(float(np.linalg.norm(np.where(problem.mask, mismatch, 0.0))))
        kappa = _step_from_moments(problem, kappa, mismatch, lr, clip)
        if it >= tail_start:
            acc += kappa.kappa
            count += 1
    final = HermitianCouplingMatrix(acc / count) if count else kappa
    cfg = {"iterations": int(iterations), "lr": lr, "clip": clip, "chains": int(chains),
           "steps_per_update": int(steps_per_update), "dt": dt, "average_fraction": average_fraction}
    return TrainResult(final, history, int(seed), time.perf_counter() - t0, cfg)


def _step_from_moments(problem, kappa, mismatch, lr, clip):
    G = 2.0 * np.where(problem.mask, mismatch, 0.0)
    if not problem.learn_beta:
        G = G.real.astype(complex)
    np.fill_diagonal(G, 0.0)
    iu = pair_index(problem.N)
    gnorm = float(np.sqrt(np.sum(np.abs(G[iu]) ** 2)))
    if gnorm > clip:
        G *= clip / gnorm
    k = kappa.kappa + lr * G
    k = 0.5 * (k + k.conj().T)
    np.fill_diagonal(k, 0.0)
    return HermitianCouplingMatrix(k)


# ---------------------------------------------------------------------------
# score matching


def score_matching_system(phases):
    """Matrix A and vector c with J_SM(theta) = theta^T A theta / 2 + theta^T c.

    J_SM = < |grad E|^2 / 2 + laplacian E > over the data, for the model
    log-density E(phi) = z^* kappa z up to a constant.
    """
    phi = np.asarray(phases, dtype=float)
    if phi.ndim != 2 or phi.shape[1] < 2:
        raise DimensionMismatch("observations must have shape (n, N) with N >= 2")
    n, N = phi.shape
    i, j = pair_index(N)
    P = i.size
    delta = phi[:, j] - phi[:, i]  # (n, P)
    s, c = np.sin(delta), np.cos(delta)
    # features: T_re = 2 cos(delta), T_im = -2 sin(delta)
    G = np.zeros((n, N, 2 * P))
    cols = np.arange(P)
    G[:, j, cols] = -2.0 * s
    G[:, i, cols] = 2.0 * s
    G[:, j, P + cols] = -2.0 * c
    G[:, i, P + cols] = 2.0 * c
    A = np.einsum("nkp,nkq->pq", G, G) / n
    lap = np.concatenate([-4.0 * c, 4.0 * s], axis=1)
    return A, lap.mean(axis=0)


def score_matching_objective(theta, phases) -> float:
    A, c = score_matching_system(phases)
    theta = np.asarray(theta, dtype=float)
    return float(0.5 * theta @ A @ theta + theta @ c)


def score_matching_fit(phases, cond_limit: float = 1e10):
    """(K, beta) minimising the score-matching objective; raises SingularSystem on degenerate data."""
    phi = np.asarray(phases, dtype=float)
    A, c = score_matching_system(phi)
    if not np.all(np.isfinite(A)):
        raise SingularSystem("non-finite score-matching system")
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularSystem(f"score-matching system is singular (condition number {cond:.3g})")
    theta = np.linalg.solve(A, -c)
    k = kappa_from_theta(theta, phi.shape[1])
    return k.K, k.beta


def score_matching_residual(theta, phases) -> float:
    A, c = score_matching_system(phases)
    return float(np.linalg.norm(A @ np.asarray(theta) + c))


# ---------------------------------------------------------------------------
# model size accounting


def parameter_count(k: int, mode: str = "moebius") -> int:
    """Number of trainable parameters.

    moebius: k sub-ensembles, each with internal coupling, internal shift and
    three anchor positions, plus k(k-1)/2 inter-block couplings, k(k+9)/2.
    torus: d(d+4) for a d-joint torus model.
    pairwise: m(m-1) couplings and shifts of an m-oscillator network.
    """
    k = int(k)
    if k < 1:
        raise InvalidParameter("k must be >= 1")
    if mode == "moebius":
        return k * (k + 9) // 2
    if mode == "torus":
        return k * (k + 4)
    if mode == "pairwise":
        return k * (k - 1)
    raise InvalidParameter(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# trajectory matching with the evolution strategy


def simulate_phase_trajectory(phases0, K, beta, omega=0.0, dt: float = 1e-2, nsteps: int = 200,
                              record_every: int = 10) -> np.ndarray:
    """Deterministic phase trajectory, shape (nsteps // record_every, N)."""
    model = dy.PhaseEnsemble(phases0, omega, K, beta)
    cfg = dy.IntegratorConfig("projected-rk4", dt)
    _, rec = dy.integrate_batch(model, model.phases[None], cfg, nsteps, record_every)
    return rec[:, 0, :]


def trajectory_loss(predicted, observed) -> float:
    """Mean squared phase error with differences wrapped to (-pi, pi]."""
    d = np.angle(np.exp(1j * (np.asarray(predicted) - np.asarray(observed))))
    return float(np.mean(d * d))


def fit_pair_trajectory(observed, phases0, omega=0.0, dt: float = 1e-2, nsteps: int = 200,
                        record_every: int = 10, seed: int = 0, generations: int = 150,
                        step_size: float = 0.5):
    """Fit symmetric (K, beta) of a two-oscillator model to an observed trajectory.

    Searches over (K, beta) with beta treated as an angle. Returns
    (K, beta, ESResult).
    """
    from .es import ESState, ManifoldSpec, es_optimize

    observed = np.asarray(observed, dtype=float)

    def objective(p):
        pred = simulate_phase_trajectory(phases0, p[0], p[1], omega, dt, nsteps, record_every)
        return trajectory_loss(pred, observed)

    spec = ManifoldSpec((("real", 1), ("angle", 1)))
    res = es_optimize(objective, ESState.initial([1.0, 0.1], step_size, seed), spec,
                      popsize=8, max_generations=generations, ftarget=1e-14)
    return float(res.best_x[0]), float(res.best_x[1]), res
