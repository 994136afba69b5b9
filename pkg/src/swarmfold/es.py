"""Covariance matrix adaptation evolution strategy with manifold retraction.

The search runs in a Euclidean chart. A ``ManifoldSpec`` splits the
parameter vector into segments (free reals, angles, unit vectors, ball
points, positive reals); every candidate and every mean is retracted
segment by segment before use, so the objective only ever sees valid
parameters.

The full optimiser state, including the generator state, serialises to
JSON, and a resumed run reproduces an uninterrupted one bit for bit.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParameter, ObjectiveFailure
from .io import atomic_write_text
from .noise import make_rng, rng_state_from_json, rng_state_to_json

SEGMENT_KINDS = ("real", "angle", "sphere", "ball", "positive")
BALL_RADIUS = 1.0 - 1e-9


@dataclass(frozen=True)
class ManifoldSpec:
    """Ordered (kind, size) segments covering the parameter vector."""

    segments: tuple = ()

    def __post_init__(self):
        segs = tuple((str(k), int(n)) for k, n in self.segments)
        for k, n in segs:
            if k not in SEGMENT_KINDS:
                raise InvalidParameter(f"unknown segment kind {k!r}")
            if n < 1:
                raise InvalidParameter("segment sizes must be >= 1")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def euclidean(cls, n: int):
        return cls((("real", n),))

    @property
    def dim(self) -> int:
        return sum(n for _, n in self.segments)

    def retract(self, x):
        x = np.array(x, dtype=float)
        pos = 0
        for kind, n in self.segments:
            s = x[..., pos:pos + n]
            if kind == "angle":
                s[...] = np.mod(s, 2.0 * np.pi)
            elif kind == "sphere":
                nrm = np.linalg.norm(s, axis=-1, keepdims=True)
                e = np.zeros(n)
                e[0] = 1.0
                s[...] = np.where(nrm > 0, s / np.where(nrm > 0, nrm, 1.0), e)
            elif kind == "ball":
                nrm = np.linalg.norm(s, axis=-1, keepdims=True)
                s[...] = np.where(nrm > BALL_RADIUS, s * (BALL_RADIUS / np.maximum(nrm, 1e-300)), s)
            elif kind == "positive":
                s[...] = np.maximum(s, 1e-12)
            pos += n
        return x


@dataclass
class ESState:
    """Complete CMA-ES state; JSON round trip is exact."""

    mean: np.ndarray
    covariance: np.ndarray
    step_size: float
    generation: int = 0
    p_sigma: Optional[np.ndarray] = None
    p_c: Optional[np.ndarray] = None
    rng_state: Optional[dict] = None
    best_x: Optional[np.ndarray] = None
    best_f: float = math.inf
    history: list = field(default_factory=list)

    def __post_init__(self):
        self.mean = np.array(self.mean, dtype=float).reshape(-1)
        n = self.mean.size
        self.covariance = np.array(self.covariance, dtype=float)
        if self.covariance.shape != (n, n):
            raise InvalidParameter(f"covariance must be {n}x{n}")
        if np.max(np.abs(self.covariance - self.covariance.T), initial=0.0) > 1e-12 * max(1.0, np.abs(self.covariance).max()):
            raise InvalidParameter("covariance must be symmetric")
        try:
            np.linalg.cholesky(self.covariance)
        except np.linalg.LinAlgError:
            raise InvalidParameter("covariance must be positive definite") from None
        if not (self.step_size > 0 and math.isfinite(self.step_size)):
            raise InvalidParameter("step_size must be > 0")
        self.step_size = float(self.step_size)
        self.p_sigma = np.zeros(n) if self.p_sigma is None else np.array(self.p_sigma, dtype=float)
        self.p_c = np.zeros(n) if self.p_c is None else np.array(self.p_c, dtype=float)
        if self.best_x is not None:
            self.best_x = np.array(self.best_x, dtype=float)

    @classmethod
    def initial(cls, mean, step_size: float = 0.5, seed: int = 0):
        mean = np.array(mean, dtype=float).reshape(-1)
        st = cls(mean, np.eye(mean.size), step_size)
        st.rng_state = make_rng(seed).bit_generator.state
        return st

    @property
    def dim(self):
        return self.mean.size

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(), "covariance": self.covariance.tolist(),
            "step_size": self.step_size, "generation": self.generation,
            "p_sigma": self.p_sigma.tolist(), "p_c": self.p_c.tolist(),
            "rng_state": rng_state_to_json(self.rng_state),
            "best_x": None if self.best_x is None else self.best_x.tolist(),
            "best_f": self.best_f if math.isfinite(self.best_f) else None,
            "history": list(self.history),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ESState":
        return cls(d["mean"], d["covariance"], d["step_size"], int(d["generation"]),
                   d["p_sigma"], d["p_c"], rng_state_from_json(d["rng_state"]), d["best_x"],
                   math.inf if d["best_f"] is None else float(d["best_f"]), list(d["history"]))


def save_checkpoint(path, state: ESState) -> None:
    atomic_write_text(path, json.dumps(state.to_dict(), sort_keys=True) + "\n")


def load_checkpoint(path) -> ESState:
    with open(path) as fh:
        return ESState.from_dict(json.load(fh))


@dataclass
class ESResult:
    best_x: np.ndarray
    best_f: float
    history: list
    state: ESState
    generations: int


def _strategy_constants(n, lam):
    mu = lam // 2
    w = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mueff = 1.0 / np.sum(w * w)
    cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n)
    cs = (mueff + 2.0) / (n + mueff + 5.0)
    c1 = 2.0 / ((n + 1.3) ** 2 + mueff)
    cmu = min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0) ** 2 + mueff))
    damps = 1.0 + 2.0 * max(0.0, math.sqrt((mueff - 1.0) / (n + 1.0)) - 1.0) + cs
    chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))
    return mu, w, mueff, cc, cs, c1, cmu, damps, chi_n


def default_popsize(n: int) -> int:
    return 4 + int(3 * math.log(n))


def es_optimize(objective: Callable, init: ESState, manifold: Optional[ManifoldSpec] = None,
                popsize: Optional[int] = None, max_generations: int = 200, ftarget: float = -math.inf,
                tol_sigma: float = 1e-14, checkpoint: Optional[str] = None,
                checkpoint_every: int = 0) -> ESResult:
    """Minimise ``objective`` with CMA-ES starting from ``init``.

    The best-so-far value (elitist record, recorded once per generation in
    ``history``) never increases. Any exception or non-finite value from
    the objective is re-raised as ObjectiveFailure with the generation index.
    """
    state = init
    n = state.dim
    manifold = manifold or ManifoldSpec.euclidean(n)
    if manifold.dim != n:
        raise InvalidParameter(f"manifold spec covers {manifold.dim} coordinates, state has {n}")
    lam = default_popsize(n) if popsize is None else int(popsize)
    if lam < 4:
        raise InvalidParameter("population size must be >= 4")
    mu, w, mueff, cc, cs, c1, cmu, damps, chi_n = _strategy_constants(n, lam)
    rng = make_rng(0)
    if state.rng_state is not None:
        rng.bit_generator.state = state.rng_state
    state.mean = manifold.retract(state.mean)

    while state.generation < max_generations:
        gen = state.generation
        C = 0.5 * (state.covariance + state.covariance.T)
        evals, B = np.linalg.eigh(C)
        evals = np.maximum(evals, 1e-300)
        Dg = np.sqrt(evals)
        z = rng.standard_normal((lam, n))
        y = (z * Dg) @ B.T
        cand = manifold.retract(state.mean + state.step_size * y)
        f = np.empty(lam)
        for k in range(lam):
            try:
                v = float(objective(cand[k]))
            except ObjectiveFailure:
                raise
            except Exception as exc:  # noqa: BLE001 - rewrapped with context
                raise ObjectiveFailure(f"objective raised {type(exc).__name__}: {exc}", gen) from exc
            if not math.isfinite(v):
                raise ObjectiveFailure(f"objective returned non-finite value {v!r}", gen)
            f[k] = v
        order = np.argsort(f, kind="stable")
        if f[order[0]] < state.best_f:
            state.best_f = float(f[order[0]])
            state.best_x = cand[order[0]].copy()
        # selection uses the chart displacement of the retracted candidates
        ysel = (cand[order[:mu]] - state.mean) / state.step_size
        yw = w @ ysel
        old_mean = state.mean
        state.mean = manifold.retract(old_mean + state.step_size * yw)
        inv_sqrt = (B / Dg) @ B.T
        state.p_sigma = (1.0 - cs) * state.p_sigma + math.sqrt(cs * (2.0 - cs) * mueff) * (inv_sqrt @ yw)
        ps_norm = float(np.linalg.norm(state.p_sigma))
        hsig = ps_norm / math.sqrt(1.0 - (1.0 - cs) ** (2 * (gen + 1))) / chi_n < 1.4 + 2.0 / (n + 1.0)
        state.p_c = (1.0 - cc) * state.p_c + (hsig * math.sqrt(cc * (2.0 - cc) * mueff)) * yw
        rank_mu = (ysel * w[:, None]).T @ ysel
        delta_h = (1.0 - hsig) * cc * (2.0 - cc)
        state.covariance = ((1.0 - c1 - cmu) * C + c1 * (np.outer(state.p_c, state.p_c) + delta_h * C)
                            + cmu * rank_mu)
        state.covariance = 0.5 * (state.covariance + state.covariance.T)
        state.step_size *= math.exp((cs / damps) * (ps_norm / chi_n - 1.0))
        state.generation = gen + 1
        state.history.append(state.best_f)
        state.rng_state = rng.bit_generator.state
        if checkpoint and checkpoint_every and state.generation % checkpoint_every == 0:
            save_checkpoint(checkpoint, state)
        if state.best_f <= ftarget or state.step_size * math.sqrt(float(np.max(evals))) < tol_sigma:
            break
    if checkpoint:
        save_checkpoint(checkpoint, state)
    return ESResult(state.best_x.copy(), state.best_f, list(state.history), state, state.generation)
