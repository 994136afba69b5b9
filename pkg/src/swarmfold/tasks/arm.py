"""Learning the motion of a linked robot arm from joint observations.

Planar arms are modelled as coupled phase oscillators, one per joint, on
the torus T^m. Spatial arms carry a unit quaternion per joint and are
modelled as coupled particles on S^3. Both are trained by the evolution
strategy on the one-step-ahead prediction error, then polished by
nonlinear least squares.

Stochastic policies have circle (wrapped Cauchy) or S^3 (spherical Cauchy)
marginals; helpers here generate and fit them per joint.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from .. import dynamics as dy
from .. import manifold as mf
from ..dirstat import spherical_cauchy_fit, wrapped_cauchy_fit
from ..dirstat.gof import circle_chi_square
from ..dirstat.circle import wrapped_cauchy_log_density
from ..errors import DimensionMismatch, InsufficientData, InvalidParameter
from ..es import ESState, ManifoldSpec, es_optimize
from ..io import FormatError, atomic_write_text, fmt17
from ..noise import make_rng

MIN_LENGTH = 10
MAX_SUBSTEP = 1e-2
# a small ridge on couplings picks the weakest coupling among models that
# reproduce the data equally well (synchronised joints cannot tell a
# frequency offset from a coupling term)
RIDGE = 1e-6


@dataclass(frozen=True)
class ArmObservation:
    """Joint readings at increasing, equally spaced times.

    ``joints`` has shape (T, m) of angles for a planar arm, or (T, m, 4) of
    unit quaternions for a spatial one.
    """

    times: np.ndarray
    joints: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float).reshape(-1)
        J = np.array(self.joints, dtype=float)
        if J.ndim not in (2, 3) or J.shape[0] != t.size:
            raise DimensionMismatch("joints must have shape (T, m) or (T, m, 4) matching times")
        if J.ndim == 3:
            if J.shape[2] != 4:
                raise DimensionMismatch("spatial joints are quaternions with 4 components")
            if np.any(np.abs(np.linalg.norm(J, axis=2) - 1.0) > 1e-9):
                raise InvalidParameter("spatial joint readings must be unit quaternions")
        else:
            J = mf.canonical_angle(J)
        if t.size >= 2:
            h = np.diff(t)
            if np.any(h <= 0):
                raise InvalidParameter("times must be strictly increasing")
            if np.max(np.abs(h - h[0])) > 1e-9 * max(1.0, abs(h[0])):
                raise InvalidParameter("observations must be equally spaced in time")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "joints", J)

    @property
    def spatial(self) -> bool:
        return self.joints.ndim == 3

    @property
    def m(self) -> int:
        return self.joints.shape[1]

    @property
    def T(self) -> int:
        return self.times.size

    @property
    def interval(self) -> float:
        return float(self.times[1] - self.times[0])


def _check(obs: ArmObservation, D: Optional[int], spatial: bool):
    if obs.spatial != spatial:
        raise InvalidParameter("expected %s observations" % ("spatial" if spatial else "planar"))
    if obs.T < MIN_LENGTH:
        raise InsufficientData(f"need at least {MIN_LENGTH} observations, got {obs.T}")
    if D is not None and int(D) != obs.m:
        raise DimensionMismatch(f"joint count {D} does not match the data ({obs.m} joints)")
    return obs.m


def _substeps(interval):
    n = max(1, int(math.ceil(interval / MAX_SUBSTEP - 1e-12)))
    return n, interval / n


def wrapped_error(a, b):
    return np.abs(np.angle(np.exp(1j * (np.asarray(a) - np.asarray(b)))))


def quaternion_error(p, q):
    """Chordal distance between unit quaternions up to sign."""
    p = np.asarray(p)
    q = np.asarray(q)
    return np.minimum(np.linalg.norm(p - q, axis=-1), np.linalg.norm(p + q, axis=-1))


# ---------------------------------------------------------------------------
# planar arm


def _sym_from_pairs(vals, m):
    M = np.zeros((m, m))
    iu = np.triu_indices(m, 1)
    M[iu] = vals
    return M + M.T


def planar_model(params, m: int, phases) -> dy.SubEnsembleModel:
    """Unpack (omega, K pairs, beta pairs) into a model with one joint per block."""
    params = np.asarray(params, dtype=float)
    p = m * (m - 1) // 2
    K = _sym_from_pairs(params[1:1 + p], m)
    beta = _sym_from_pairs(params[1 + p:1 + 2 * p], m)
    return dy.SubEnsembleModel(tuple(np.atleast_1d(phases)), K, beta, float(params[0]))


def planar_predict(params, obs: ArmObservation, states=None) -> np.ndarray:
    """Advance every state (default: all but the last reading) by one observation interval."""
    m = obs.m
    X = obs.joints[:-1] if states is None else np.atleast_2d(states)
    n, h = _substeps(obs.interval)
    model = planar_model(params, m, X[0])
    out, _ = dy.integrate_batch(model, X, dy.IntegratorConfig("projected-rk4", h), n)
    return out


def planar_rollout(params, obs: ArmObservation) -> np.ndarray:
    """Free-running trajectory from the first reading at the observation times."""
    n, h = _substeps(obs.interval)
    model = planar_model(params, obs.m, obs.joints[0])
    _, rec = dy.integrate_batch(model, obs.joints[:1], dy.IntegratorConfig("projected-rk4", h),
                                n * (obs.T - 1), n)
    return np.concatenate([obs.joints[:1], rec[:, 0]], axis=0)


@dataclass
class ArmFit:
    params: np.ndarray
    model: object
    prediction_error: float
    predicted: np.ndarray
    history: list
    seed: int

    def report(self) -> dict:
        return {"params": self.params, "one_step_error": self.prediction_error,
                "history": self.history, "seed": self.seed}


def _train(residuals, x0, spec, seed, generations, step_size, polish):
    def loss(x):
        r = residuals(x)
        return float(np.mean(r * r))

    res = es_optimize(loss, ESState.initial(x0, step_size, seed), spec, max_generations=generations,
                      ftarget=1e-24)
    best, best_f, history = res.best_x, res.best_f, list(res.history)
    if polish:
        ls = least_squares(lambda x: residuals(spec.retract(x)), best, xtol=1e-15, ftol=1e-15,
                           gtol=1e-15, max_nfev=200 * best.size)
        cand = spec.retract(ls.x)
        f = loss(cand)
        if f < best_f:
            best, best_f = cand, f
            history.append(best_f)
    return best, best_f, history


def arm_fit_planar(obs: ArmObservation, D: Optional[int] = None, seed: int = 0,
                   generations: int = 500, step_size: float = 0.3, polish: bool = True,
                   ridge: float = RIDGE) -> ArmFit:
    """Fit the common frequency and pairwise (K, beta) of a planar arm.

    ``D`` is the joint count (checked against the data). The prediction
    error reported is the mean absolute one-step-ahead angle error in radians.
    """
    m = _check(obs, D, spatial=False)
    p = m * (m - 1) // 2
    target = obs.joints[1:]

    def residuals(x):
        r = np.angle(np.exp(1j * (planar_predict(x, obs) - target))).ravel()
        return np.concatenate([r, math.sqrt(ridge) * x[1:1 + p]])

    adv = np.angle(np.exp(1j * np.diff(obs.joints, axis=0)))
    x0 = np.concatenate([[float(np.mean(adv)) / obs.interval], np.zeros(2 * p)])
    spec = ManifoldSpec((("real", 1 + p),) + ((("angle", p),) if p else ()))
    best, _, history = _train(residuals, x0, spec, seed, generations, step_size, polish)
    err = float(np.mean(wrapped_error(planar_predict(best, obs), target)))
    return ArmFit(best, planar_model(best, m, obs.joints[0]), err, planar_rollout(best, obs), history, int(seed))


# ---------------------------------------------------------------------------
# spatial arm


def _antisym(vals, d=4):
    A = np.zeros((d, d))
    iu = np.triu_indices(d, 1)
    A[iu] = vals
    return A - A.T


def spatial_model(params, m: int, states) -> dy.SphereEnsemble:
    """Unpack (A upper triangle, K pairs): shared rotation generator, pairwise coupling."""
    params = np.asarray(params, dtype=float)
    A = _antisym(params[:6])
    K = _sym_from_pairs(params[6:6 + m * (m - 1) // 2], m)
    return dy.SphereEnsemble(states, A, K, labels=np.arange(m))


def spatial_predict(params, obs: ArmObservation, states=None) -> np.ndarray:
    X = obs.joints[:-1] if states is None else np.asarray(states)
    n, h = _substeps(obs.interval)
    model = spatial_model(params, obs.m, X[0])
    out, _ = dy.integrate_batch(model, X, dy.IntegratorConfig("projected-rk4", h), n)
    return out


def spatial_rollout(params, obs: ArmObservation) -> np.ndarray:
    n, h = _substeps(obs.interval)
    model = spatial_model(params, obs.m, obs.joints[0])
    _, rec = dy.integrate_batch(model, obs.joints[:1], dy.IntegratorConfig("projected-rk4", h),
                                n * (obs.T - 1), n)
    return np.concatenate([obs.joints[:1], rec[:, 0]], axis=0)


def arm_fit_spatial(obs: ArmObservation, D: Optional[int] = None, seed: int = 0,
                    generations: int = 500, step_size: float = 0.3, polish: bool = True,
                    ridge: float = RIDGE) -> ArmFit:
    """Fit the shared generator A in so(4) and pairwise couplings of a spatial arm.

    The reported error is the mean one-step-ahead chordal distance between
    predicted and observed quaternions (up to sign).
    """
    m = _check(obs, D, spatial=True)
    target = obs.joints[1:]

    def residuals(x):
        r = (spatial_predict(x, obs) - target).ravel()
        return np.concatenate([r, math.sqrt(ridge) * x[6:]])

    x0 = np.zeros(6 + m * (m - 1) // 2)
    spec = ManifoldSpec.euclidean(x0.size)
    best, _, history = _train(residuals, x0, spec, seed, generations, step_size, polish)
    err = float(np.mean(quaternion_error(spatial_predict(best, obs), target)))
    return ArmFit(best, spatial_model(best, m, obs.joints[0]), err, spatial_rollout(best, obs), history, int(seed))


# ---------------------------------------------------------------------------
# stochastic policies and their marginals


def planar_policy_samples(K, beta, omega, t: float, n: int, seed: int = 0, alpha0=0.5,
                          noise_kappa: float = 1.0, t_noise: float = 20.0, dt: float = 1e-2) -> np.ndarray:
    """Joint angles (n, m) drawn by a two-stage stochastic policy.

    Each joint j is an ensemble of n identical oscillators. They first
    diffuse under noise alone for t_noise, which spreads them to uniform.
    Their positions are then moved by the Moebius map carrying 0 to
    alpha0[j], and they follow the deterministic global model with K[j],
    beta[j], omega[j] for time t. The resulting marginals are wrapped Cauchy.
    """
    K = np.atleast_1d(np.asarray(K, dtype=float))
    m = K.size
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (m,))
    omega = np.broadcast_to(np.asarray(omega, dtype=float), (m,))
    alpha0 = np.broadcast_to(np.asarray(alpha0, dtype=complex), (m,))
    cfg_flow = dy.IntegratorConfig("projected-rk4", dt)
    g = make_rng(seed)
    out = np.empty((int(n), m))
    for j in range(m):
        # uncoupled noisy oscillators started together are exactly Gaussian in phase
        phi = math.sqrt(2.0 * noise_kappa * t_noise) * g.standard_normal(int(n))
        z = mf.MoebiusMap(-complex(alpha0[j]), 0.0)(np.exp(1j * phi))
        flow = dy.GlobalCircleModel(z / np.abs(z), float(K[j]), float(beta[j]), float(omega[j]))
        Z, _ = dy.integrate_batch(flow, flow.z[None], cfg_flow, int(round(t / dt)))
        out[:, j] = mf.canonical_angle(np.angle(Z[0]))
    return out


def planar_marginals(samples, bins: int = 36):
    """Wrapped Cauchy fit per joint, with the chi-square p-value of each fit."""
    S = np.atleast_2d(np.asarray(samples, dtype=float))
    fits, pvals = [], []
    for j in range(S.shape[1]):
        p = wrapped_cauchy_fit(S[:, j])
        fits.append(p)
        pvals.append(circle_chi_square(S[:, j], lambda x, p=p: wrapped_cauchy_log_density(p, x), bins=bins)[1])
    return fits, pvals


def spatial_marginals(samples):
    """Spherical Cauchy fit per joint of quaternion samples (n, m, 4)."""
    S = np.asarray(samples, dtype=float)
    if S.ndim != 3 or S.shape[2] != 4:
        raise DimensionMismatch("samples must have shape (n, m, 4)")
    return [spherical_cauchy_fit(S[:, j]) for j in range(S.shape[1])]


# ---------------------------------------------------------------------------
# files


def observation_csv_text(obs: ArmObservation) -> str:
    head = "t,joint_id," + ("q0,q1,q2,q3" if obs.spatial else "angle")
    lines = [head]
    for k in range(obs.T):
        for j in range(obs.m):
            vals = obs.joints[k, j].reshape(-1)
            lines.append(",".join([fmt17(obs.times[k]), str(j)] + [fmt17(v) for v in vals]))
    return "\n".join(lines) + "\n"


def write_observation_csv(path, obs: ArmObservation) -> None:
    atomic_write_text(path, observation_csv_text(obs))


def read_observation_csv(path) -> ArmObservation:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        rows = [r for r in reader if r]
    if header == ["t", "joint_id", "angle"]:
        width = 1
    elif header == ["t", "joint_id", "q0", "q1", "q2", "q3"]:
        width = 4
    else:
        raise FormatError("expected header t,joint_id,angle or t,joint_id,q0,q1,q2,q3")
    try:
        recs = [(float(r[0]), int(r[1]), [float(x) for x in r[2:]]) for r in rows]
    except (ValueError, IndexError) as exc:
        raise FormatError(f"malformed row: {exc}") from None
    if any(len(v) != width for _, _, v in recs):
        raise FormatError(f"every row needs {width + 2} fields")
    times = sorted({t for t, _, _ in recs})
    joints = sorted({j for _, j, _ in recs})
    if joints != list(range(len(joints))):
        raise FormatError("joint ids must be 0..m-1")
    ti = {t: k for k, t in enumerate(times)}
    data = np.full((len(times), len(joints), width), np.nan)
    for t, j, v in recs:
        data[ti[t], j] = v
    if np.isnan(data).any():
        raise FormatError("every joint needs a reading at every time")
    return ArmObservation(np.array(times), data[..., 0] if width == 1 else data)
