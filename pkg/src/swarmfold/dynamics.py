"""Integration of Kuramoto-type ensembles on the circle, spheres, SO(n) and U(d).

All models are frozen dataclasses; stepping returns a new model. The hot
loops live in ``swarmfold._core`` (compiled when available). Every model can
also be integrated in batch, which runs many independent initial
conditions with the same parameters in one kernel call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.linalg import expm

from . import manifold as mf
from ._core import kernels
from .errors import (
    DegenerateInitialData,
    DimensionMismatch,
    InvalidNoiseParameter,
    InvalidParameter,
    InvalidStepSize,
    OffManifoldPoint,
)
from .noise import NoiseStream

METHODS = ("projected-rk4", "lie-euler", "euler-maruyama")
_CODE = {"projected-rk4": 0, "lie-euler": 1, "euler-maruyama": 2}
STATE_TOL = 1e-9
CHUNK = 2048


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "projected-rk4"
    dt: float = 1e-3
    renormalize: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidParameter(f"unknown method {self.method!r}; expected one of {METHODS}")
        dt = float(self.dt)
        if not (math.isfinite(dt) and 0.0 < dt <= 0.1):
            raise InvalidStepSize(f"dt must lie in (0, 0.1], got {self.dt!r}")
        object.__setattr__(self, "dt", dt)

    @property
    def code(self) -> int:
        return _CODE[self.method]


def _square(K, n, name="K"):
    K = np.asarray(K, dtype=float)
    if K.ndim == 0:
        return np.full((n, n), float(K))
    if K.shape != (n, n):
        raise DimensionMismatch(f"{name} must be {n}x{n}, got {K.shape}")
    return K.copy()


def _frozen(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


def _check_kappa(kappa):
    kappa = float(kappa)
    if not math.isfinite(kappa) or kappa < 0:
        raise InvalidNoiseParameter(f"noise_kappa must be >= 0, got {kappa!r}")
    return kappa


# ---------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class PhaseEnsemble:
    """N phase oscillators with couplings K_ij, shifts beta_ij and noise level kappa.

    ``noise_coupling`` switches on the multiplicative noise model with
    constant C; None means additive noise.
    """

    phases: np.ndarray
    omega: float = 0.0
    K: np.ndarray = 0.0
    beta: np.ndarray = 0.0
    noise_kappa: float = 0.0
    noise_coupling: Optional[float] = None

    def __post_init__(self):
        ph = np.asarray(self.phases, dtype=float).reshape(-1)
        if ph.size < 1:
            raise DimensionMismatch("an ensemble needs at least one oscillator")
        n = ph.size
        object.__setattr__(self, "phases", _frozen(mf.canonical_angle(ph)))
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "K", _frozen(_square(self.K, n)))
        object.__setattr__(self, "beta", _frozen(_square(self.beta, n, "beta")))
        object.__setattr__(self, "noise_kappa", _check_kappa(self.noise_kappa))
        if self.noise_coupling is not None:
            c = float(self.noise_coupling)
            if not abs(c) <= 1.0:
                raise InvalidNoiseParameter(f"|C| must be <= 1, got {c!r}")
            object.__setattr__(self, "noise_coupling", c)

    @classmethod
    def symmetric(cls, phases, omega=0.0, K=0.0, beta=0.0, noise_kappa=0.0):
        n = np.asarray(phases).size
        Km = _square(K, n)
        Bm = _square(beta, n, "beta")
        return cls(phases, omega, 0.5 * (Km + Km.T), 0.5 * (Bm + Bm.T), noise_kappa)

    @property
    def N(self) -> int:
        return self.phases.size

    @property
    def state(self):
        return self.phases

    def with_state(self, phases):
        return replace(self, phases=phases)

    def is_uniform(self) -> bool:
        return bool(np.all(self.K == self.K.flat[0]) and np.all(self.beta == self.beta.flat[0]))


@dataclass(frozen=True)
class GlobalCircleModel:
    """Identical globally coupled oscillators written as points z_j on the unit circle."""

    z: np.ndarray
    K: float = 0.0
    beta: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        z = np.asarray(self.z, dtype=complex).reshape(-1)
        if z.size < 1:
            raise DimensionMismatch("an ensemble needs at least one oscillator")
        if np.any(np.abs(np.abs(z) - 1.0) > STATE_TOL):
            raise OffManifoldPoint("all z_j must lie on the unit circle")
        object.__setattr__(self, "z", _frozen(z))
        object.__setattr__(self, "K", float(self.K))
        object.__setattr__(self, "beta", mf.canonical_angle(float(self.beta)))
        object.__setattr__(self, "omega", float(self.omega))

    @classmethod
    def from_phases(cls, phases, K=0.0, beta=0.0, omega=0.0):
        return cls(np.exp(1j * np.asarray(phases, dtype=float)), K, beta, omega)

    def phases(self):
        return mf.canonical_angle(np.angle(self.z))

    def to_phase_ensemble(self) -> PhaseEnsemble:
        return PhaseEnsemble(self.phases(), self.omega, self.K, self.beta)

    @property
    def N(self):
        return self.z.size

    @property
    def state(self):
        return self.z

    def with_state(self, z):
        return replace(self, z=z)


@dataclass(frozen=True)
class SubEnsembleModel:
    """D globally coupled blocks; K[k, l] and beta[k, l] act from block k on block l."""

    groups: tuple
    K: np.ndarray = 0.0
    beta: np.ndarray = 0.0
    omega: float = 0.0

    def __post_init__(self):
        groups = tuple(_frozen(mf.canonical_angle(np.atleast_1d(np.asarray(g, dtype=float)).reshape(-1)))
                       for g in self.groups)
        if len(groups) < 1 or any(g.size < 1 for g in groups):
            raise DimensionMismatch("need D >= 1 blocks of size >= 1")
        D = len(groups)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "K", _frozen(_square(self.K, D)))
        object.__setattr__(self, "beta", _frozen(_square(self.beta, D, "beta")))
        object.__setattr__(self, "omega", float(self.omega))

    @property
    def D(self):
        return len(self.groups)

    @property
    def sizes(self):
        return np.array([g.size for g in self.groups])

    @property
    def labels(self):
        return np.repeat(np.arange(self.D), self.sizes)

    @property
    def state(self):
        return np.concatenate(self.groups)

    def block_slices(self):
        edges = np.concatenate([[0], np.cumsum(self.sizes)])
        return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]

    def with_state(self, phases):
        phases = np.asarray(phases)
        return replace(self, groups=tuple(phases[s] for s in self.block_slices()))


@dataclass(frozen=True)
class SphereEnsemble:
    """Particles on S^{d-1} following dx/dt = A x + f - <x, f> x.

    Coupling is pairwise when ``labels`` is None and K is N x N, global when
    K is a scalar, and block-wise (with rotations Q[k, l]) when ``labels``
    assigns each particle to one of D sub-ensembles and K is D x D.
    """

    states: np.ndarray
    A: np.ndarray = None
    K: np.ndarray = 0.0
    labels: Optional[np.ndarray] = None
    Q: Optional[np.ndarray] = None
    noise_kappa: float = 0.0

    def __post_init__(self):
        X = np.asarray(self.states, dtype=float)
        if X.ndim != 2 or X.shape[1] < 2:
            raise DimensionMismatch(f"states must have shape (N, d) with d >= 2, got {X.shape}")
        if np.any(np.abs(np.linalg.norm(X, axis=1) - 1.0) > STATE_TOL):
            raise OffManifoldPoint("all states must be unit vectors")
        N, d = X.shape
        A = np.zeros((d, d)) if self.A is None else np.asarray(self.A, dtype=float)
        if A.shape != (d, d):
            raise DimensionMismatch(f"A must be {d}x{d}")
        mf.antisymmetric(A)
        K = np.asarray(self.K, dtype=float)
        labels = self.labels
        if labels is None and K.ndim == 0:
            labels = np.zeros(N, dtype=np.int64)
            K = K.reshape(1, 1)
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64).reshape(-1)
            if labels.shape != (N,):
                raise DimensionMismatch("labels must have one entry per particle")
            D = int(labels.max()) + 1
            if set(np.unique(labels)) != set(range(D)):
                raise DimensionMismatch("every block label 0..D-1 must be used")
            K = _square(K, D)
            Q = np.broadcast_to(np.eye(d), (D, D, d, d)).copy() if self.Q is None else np.array(self.Q, dtype=float)
            if Q.shape != (D, D, d, d):
                raise DimensionMismatch(f"Q must have shape {(D, D, d, d)}")
            object.__setattr__(self, "Q", _frozen(Q))
            object.__setattr__(self, "labels", _frozen(labels))
        else:
            K = _square(K, N)
        object.__setattr__(self, "states", _frozen(X))
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "K", _frozen(K))
        object.__setattr__(self, "noise_kappa", _check_kappa(self.noise_kappa))

    @property
    def N(self):
        return self.states.shape[0]

    @property
    def d(self):
        return self.states.shape[1]

    @property
    def state(self):
        return self.states

    @property
    def mode(self) -> int:
        return 0 if self.labels is None else 1

    def with_state(self, X):
        return replace(self, states=X)


@dataclass(frozen=True)
class ComplexSphereEnsemble:
    """Particles on the unit sphere of C^m following dz/dt = H z + g - <z, g> z."""

    states: np.ndarray
    H: np.ndarray = None
    K: np.ndarray = 0.0

    def __post_init__(self):
        Z = np.asarray(self.states, dtype=complex)
        if Z.ndim != 2 or Z.shape[1] < 1:
            raise DimensionMismatch(f"states must have shape (N, m), got {Z.shape}")
        if np.any(np.abs(np.linalg.norm(Z, axis=1) - 1.0) > STATE_TOL):
            raise OffManifoldPoint("all states must be unit vectors")
        N, m = Z.shape
        H = np.zeros((m, m), dtype=complex) if self.H is None else np.asarray(self.H, dtype=complex)
        if H.shape != (m, m):
            raise DimensionMismatch(f"H must be {m}x{m}")
        mf.antisymmetric(H)
        K = np.asarray(self.K, dtype=float)
        if K.ndim != 0:
            K = _square(K, N)
        object.__setattr__(self, "states", _frozen(Z))
        object.__setattr__(self, "H", _frozen(H))
        object.__setattr__(self, "K", _frozen(K))

    @property
    def N(self):
        return self.states.shape[0]

    @property
    def state(self):
        return self.states

    def with_state(self, Z):
        return replace(self, states=Z)


@dataclass(frozen=True)
class MatrixEnsemble:
    """Particles on SO(n) (real states) or U(d) (complex states).

    dQ_j/dt = Omega_j Q_j with Omega_j = F + (1/2N) sum_i K_ij (Q_i Q_j^H - Q_j Q_i^H),
    where F is the skew-symmetric or skew-Hermitian frequency matrix.
    """

    states: np.ndarray
    freq: np.ndarray = None
    K: np.ndarray = 0.0

    def __post_init__(self):
        S = np.asarray(self.states)
        cplx = np.iscomplexobj(S) or (self.freq is not None and np.iscomplexobj(self.freq))
        S = S.astype(complex if cplx else float)
        if S.ndim != 3 or S.shape[1] != S.shape[2]:
            raise DimensionMismatch(f"states must have shape (N, n, n), got {S.shape}")
        N, n, _ = S.shape
        if mf.orthogonality_residual(S) > STATE_TOL:
            raise OffManifoldPoint("states are not orthogonal/unitary")
        if not cplx and np.any(np.abs(np.linalg.det(S) - 1.0) > STATE_TOL):
            raise OffManifoldPoint("real states must have determinant +1")
        F = np.zeros((n, n), dtype=S.dtype) if self.freq is None else np.asarray(self.freq, dtype=S.dtype)
        if F.shape != (n, n):
            raise DimensionMismatch(f"freq must be {n}x{n}")
        mf.antisymmetric(F)
        object.__setattr__(self, "states", _frozen(S))
        object.__setattr__(self, "freq", _frozen(F))
        object.__setattr__(self, "K", _frozen(_square(self.K, N)))

    @property
    def N(self):
        return self.states.shape[0]

    @property
    def is_unitary(self) -> bool:
        return np.iscomplexobj(self.states)

    @property
    def state(self):
        return self.states

    def with_state(self, S):
        return replace(self, states=S)


MODEL_KINDS = {
    PhaseEnsemble: "phase",
    GlobalCircleModel: "circle",
    SubEnsembleModel: "subensemble",
    SphereEnsemble: "sphere",
    ComplexSphereEnsemble: "complex-sphere",
    MatrixEnsemble: "matrix",
}


def model_kind(model) -> str:
    kind = MODEL_KINDS.get(type(model))
    if kind is None:
        raise InvalidParameter(f"unsupported model type {type(model).__name__}")
    if kind == "phase" and model.noise_coupling is not None:
        return "multiplicative"
    return kind


# ---------------------------------------------------------------------------
# batched integration


def _phase_operators(model):
    """Kernel mode and coupling arrays for phase-type models."""
    if isinstance(model, SubEnsembleModel):
        K, beta = model.K, model.beta
        return (1, np.ascontiguousarray((K * np.cos(beta)).T), np.ascontiguousarray((K * np.sin(beta)).T),
                model.labels.astype(np.int64), model.sizes.astype(float))
    N = model.N
    if model.is_uniform():
        k, b = float(model.K.flat[0]), float(model.beta.flat[0])
        return (1, np.array([[k * math.cos(b)]]), np.array([[k * math.sin(b)]]),
                np.zeros(N, dtype=np.int64), np.array([float(N)]))
    K, beta = model.K, model.beta
    return (0, np.ascontiguousarray((K * np.cos(beta)).T), np.ascontiguousarray((K * np.sin(beta)).T),
            np.zeros(N, dtype=np.int64), np.array([float(N)]))


def _c(a):
    return np.array(a, order="C")


def _noise_kappa(model):
    return float(getattr(model, "noise_kappa", 0.0))


def _needs_noise(model, cfg):
    return cfg.method == "euler-maruyama" and _noise_kappa(model) > 0.0


def _stream_for(model, batch, seed):
    kind = model_kind(model)
    if kind in ("phase", "multiplicative"):
        return NoiseStream(seed, (batch, model.N), 1)
    if kind == "sphere":
        return NoiseStream(seed, (batch, model.N), model.d)
    raise InvalidParameter(f"model kind {kind!r} has no noise term")


def _run_chunk(model, cfg, X, nsteps, record_every, noise):
    """Advance a batch X of states by nsteps; returns (final, records)."""
    dt = cfg.dt
    kind = model_kind(model)
    if kind in ("phase", "multiplicative", "subensemble"):
        mode, KcT, KsT, labels, sizes = _phase_operators(model)
        kappa = _noise_kappa(model) if kind != "subensemble" else 0.0
        scale = math.sqrt(2.0 * kappa * dt)
        mult = kind == "multiplicative"
        C = model.noise_coupling if mult else 0.0
        return kernels.phase_integrate(X, model.omega, mode, KcT, KsT, labels, sizes, dt, nsteps,
                                       record_every, cfg.code, noise, scale, C, mult)
    if kind == "circle":
        if cfg.code != 0:
            raise InvalidParameter("the circle model is integrated with projected-rk4 only")
        return kernels.circle_integrate(X, model.omega, model.K, model.beta, dt, nsteps, record_every)
    if kind == "sphere":
        scale = math.sqrt(2.0 * model.noise_kappa * dt)
        labels = _c(model.labels) if model.labels is not None else np.zeros(model.N, dtype=np.int64)
        if model.mode == 1:
            sizes = np.bincount(labels).astype(float)
            Q = _c(model.Q)
            KT = _c(model.K.T)
        else:
            sizes = np.array([float(model.N)])
            Q = np.zeros((1, 1, model.d, model.d))
            KT = _c(model.K.T)
        return kernels.sphere_integrate(X, _c(model.A), model.mode, KT, labels, sizes,
                                        Q, dt, nsteps, record_every, cfg.code, noise, scale)
    if kind == "complex-sphere":
        if cfg.code != 0:
            raise InvalidParameter("the complex sphere model is integrated with projected-rk4 only")
        if model.K.ndim == 0:
            KT = np.zeros((1, 1))
            return kernels.csphere_integrate(X, _c(model.H), 1, KT, float(model.K),
                                             dt, nsteps, record_every)
        return kernels.csphere_integrate(X, _c(model.H), 0,
                                         _c(model.K.T), 0.0, dt, nsteps, record_every)
    if kind == "matrix":
        KT = _c(model.K.T)
        if cfg.code == 0:
            return kernels.matrix_integrate(X, _c(model.freq), KT, dt, nsteps, record_every)
        return _matrix_lie_euler(X, model.freq, KT, dt, nsteps, record_every)
    raise InvalidParameter(f"unsupported model kind {kind!r}")


def _matrix_lie_euler(Q, F, KT, dt, nsteps, record_every):
    from ._core import pykernels

    Q = np.array(Q)
    nrec = nsteps // record_every if record_every > 0 else 0
    rec = np.empty((nrec,) + Q.shape, dtype=Q.dtype)
    r = 0
    for step in range(nsteps):
        Om = pykernels.matrix_generator(Q, F, KT)
        E = np.empty_like(Om)
        for idx in np.ndindex(*Om.shape[:2]):
            E[idx] = expm(dt * Om[idx])
        Q = pykernels.project_group(E @ Q)
        if record_every > 0 and (step + 1) % record_every == 0:
            rec[r] = Q
            r += 1
    return Q, rec


def integrate_batch(model, initial, cfg: IntegratorConfig, nsteps: int, record_every: int = 0,
                    seed: int = 0, noise: Optional[NoiseStream] = None):
    """Integrate B initial states (leading axis of ``initial``) with the parameters of ``model``.

    Returns (final_states, records) where records holds the state after every
    ``record_every`` steps (empty when record_every is 0).
    """
    X = np.ascontiguousarray(initial)
    if model_kind(model) in ("phase", "multiplicative", "subensemble"):
        X = np.ascontiguousarray(X, dtype=float)
    B = X.shape[0]
    nsteps = int(nsteps)
    if nsteps < 0:
        raise InvalidParameter("nsteps must be >= 0")
    noisy = _needs_noise(model, cfg)
    if noisy and noise is None:
        noise = _stream_for(model, B, seed)
    r_every = int(record_every)
    recs = []
    done = 0
    chunk = CHUNK if r_every <= 0 else max(r_every, (CHUNK // r_every) * r_every)
    while done < nsteps:
        k = min(chunk, nsteps - done)
        xi = noise.draw(k) if noisy else None
        X, rec = _run_chunk(model, cfg, X, k, r_every, xi)
        if r_every > 0:
            recs.append(rec)
        done += k
    if r_every > 0 and recs:
        records = np.concatenate(recs, axis=0)
    else:
        records = np.empty((0,) + X.shape, dtype=X.dtype)
    return X, records


def _advance(model, cfg, rng, nsteps=1):
    noise = None
    if _needs_noise(model, cfg):
        if rng is None:
            raise InvalidNoiseParameter("a noise stream or seed is required for noisy stepping")
        noise = rng if isinstance(rng, NoiseStream) else _stream_for(model, 1, int(rng))
    X, _ = integrate_batch(model, np.asarray(model.state)[None], cfg, nsteps, 0, noise=noise)
    return model.with_state(X[0])


def step_phase(model: PhaseEnsemble, cfg: IntegratorConfig, rng=None) -> PhaseEnsemble:
    """One step of the (possibly noisy) phase model.

    ``rng`` is a NoiseStream (shape (1, N)) or an integer seed; it is only
    consulted under euler-maruyama with noise_kappa > 0.
    """
    if not isinstance(model, PhaseEnsemble):
        raise InvalidParameter("step_phase expects a PhaseEnsemble")
    return _advance(model, cfg, rng)


def step_phase_multiplicative(model: PhaseEnsemble, C: float, cfg: IntegratorConfig, rng=None):
    C = float(C)
    if not abs(C) <= 1.0:
        raise InvalidNoiseParameter(f"|C| must be <= 1, got {C!r}")
    if cfg.method != "euler-maruyama":
        raise InvalidParameter("the multiplicative noise model is integrated with euler-maruyama only")
    return _advance(replace(model, noise_coupling=C), cfg, rng)


def step_global_circle(model: GlobalCircleModel, cfg: IntegratorConfig) -> GlobalCircleModel:
    return _advance(model, cfg, None)


def step_subensemble(model: SubEnsembleModel, cfg: IntegratorConfig) -> SubEnsembleModel:
    return _advance(model, cfg, None)


def step_sphere_real(model: SphereEnsemble, cfg: IntegratorConfig, rng=None) -> SphereEnsemble:
    return _advance(model, cfg, rng)


def step_sphere_complex(model: ComplexSphereEnsemble, cfg: IntegratorConfig) -> ComplexSphereEnsemble:
    return _advance(model, cfg, None)


def step_matrix(model: MatrixEnsemble, cfg: IntegratorConfig) -> MatrixEnsemble:
    return _advance(model, cfg, None)


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    snapshots: np.ndarray
    rng_seed: int
    step_size: float
    method: str
    model: object = field(repr=False, default=None)

    def __post_init__(self):
        if len(self.times) != len(self.snapshots):
            raise DimensionMismatch("snapshot count must equal time count")
        if np.any(np.diff(self.times) <= 0):
            raise InvalidParameter("times must be strictly increasing")

    @property
    def kind(self) -> str:
        return model_kind(self.model)

    def final_model(self):
        return self.model.with_state(self.snapshots[-1])


def simulate(model, cfg: IntegratorConfig, t_end: float, record_every: int = 1, seed: int = 0) -> Trajectory:
    """Integrate to t_end, recording the state every ``record_every`` steps (plus t=0)."""
    t_end = float(t_end)
    if not (math.isfinite(t_end) and t_end >= 0):
        raise InvalidParameter(f"t_end must be >= 0, got {t_end!r}")
    nsteps = int(round(t_end / cfg.dt))
    record_every = max(1, int(record_every))
    x0 = np.asarray(model.state)
    _, rec = integrate_batch(model, x0[None], cfg, nsteps, record_every, seed=seed)
    snaps = np.concatenate([x0[None], rec[:, 0]], axis=0)
    times = np.arange(snaps.shape[0]) * (record_every * cfg.dt)
    return Trajectory(times, snaps, int(seed), cfg.dt, cfg.method, model)


def manifold_residual(kind: str, states) -> float:
    """Largest deviation of a batch of states from its manifold."""
    S = np.asarray(states)
    if kind in ("phase", "multiplicative", "subensemble"):
        bad = np.logical_or(S < 0.0, S >= mf.TWO_PI)
        return float(np.inf) if np.any(bad) else 0.0
    if kind == "circle":
        return float(np.max(np.abs(np.abs(S) - 1.0)))
    if kind in ("sphere", "complex-sphere"):
        return float(np.max(np.abs(np.linalg.norm(S, axis=-1) - 1.0)))
    if kind == "matrix":
        res = mf.orthogonality_residual(S)
        if not np.iscomplexobj(S):
            res = max(res, float(np.max(np.abs(np.linalg.det(S) - 1.0))))
        return res
    raise InvalidParameter(kind)


# ---------------------------------------------------------------------------
# Moebius families


def _as_circle_points(snapshots, kind):
    S = np.asarray(snapshots)
    if kind == "circle":
        return S.astype(complex)
    return np.exp(1j * S)


def select_anchors(z, tol: float = 1e-8):
    """Greedy max-min triple: farthest pair, then the point farthest from both."""
    z = np.asarray(z, dtype=complex)
    if z.size < 3:
        raise DegenerateInitialData("need at least three oscillators")
    dist = np.abs(z[:, None] - z[None, :])
    i, j = np.unravel_index(np.argmax(dist), dist.shape)
    score = np.minimum(dist[i], dist[j])
    k = int(np.argmax(score))
    if min(dist[i, j], score[k]) <= tol:
        raise DegenerateInitialData("anchor points are nearly coincident")
    return int(i), int(j), k


def moebius_family_extract(traj: Trajectory, members=None):
    """Moebius maps g_t with z_j(t) = g_t(z_j(0)), one per recorded time.

    ``members`` restricts the fit to a subset of oscillators (one block of a
    sub-ensemble model, for instance).
    """
    kind = traj.kind
    if kind not in ("circle", "phase", "subensemble", "multiplicative"):
        raise InvalidParameter("Moebius families exist for circle-valued trajectories only")
    Z = _as_circle_points(traj.snapshots, kind)
    if members is not None:
        Z = Z[:, np.asarray(members)]
    anchors = select_anchors(Z[0])
    src = Z[0, list(anchors)]
    maps = []
    for t in range(Z.shape[0]):
        maps.append(mf.moebius_from_points(src, Z[t, list(anchors)]))
    return maps
