"""Aligning pre-embedded network layers in the Poincare ball.

Each layer is a point cloud in B^d. Inter-layer links should end up close
(hyperbolic distance below tau_near) and unlinked pairs far apart (above
tau_far). Layers move only by ball isometries, so their own geometry is
untouched.

Layer 0 stays fixed. Every other layer k is moved by the isometry generated
by a conformal vector field x -> A_k x + f_k - <x, f_k> x on the boundary
sphere (A_k antisymmetric, so d(d+1)/2 numbers per layer). The field is
integrated for unit time on d(d+1)/2 anchor points of S^{d-1}; the isometry
is then recovered from where the anchors went.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from .. import manifold as mf
from ..dirstat import uniform_sphere
from ..errors import (DimensionMismatch, InfeasibleThreshold, InvalidParameter, NoConvergence,
                      SwarmfoldError)
from ..es import ESState, ManifoldSpec, es_optimize
from ..io import FormatError, dumps, atomic_write_text
from ..noise import make_rng

FLOW_STEPS = 64
FAILED_LOSS = 1e6


@dataclass(frozen=True)
class LayerCloud:
    """Layers of points strictly inside B^d plus inter-layer links.

    ``adjacency`` rows are (layer_a, node_a, layer_b, node_b).
    """

    layers: tuple
    adjacency: np.ndarray
    tau_near: float = 0.0
    tau_far: float = 1.0

    def __post_init__(self):
        layers = tuple(np.array(L, dtype=float) for L in self.layers)
        if not layers:
            raise InvalidParameter("need at least one layer")
        d = layers[0].shape[-1] if layers[0].ndim == 2 else -1
        for L in layers:
            if L.ndim != 2 or L.shape[1] != d or L.shape[0] < 1:
                raise DimensionMismatch("every layer must be a nonempty (p, d) array with a common d")
            if np.any(np.linalg.norm(L, axis=1) >= 1.0):
                raise InvalidParameter("layer points must lie strictly inside the unit ball")
            L.setflags(write=False)
        adj = np.array(self.adjacency, dtype=np.int64).reshape(-1, 4)
        for a, i, b, j in adj:
            if not (0 <= a < len(layers) and 0 <= b < len(layers)) or a == b:
                raise InvalidParameter(f"link ({a},{i},{b},{j}) must join two different existing layers")
            if not (0 <= i < layers[a].shape[0] and 0 <= j < layers[b].shape[0]):
                raise InvalidParameter(f"link ({a},{i},{b},{j}) refers to a missing node")
        tn, tf = float(self.tau_near), float(self.tau_far)
        if not (tn >= 0 and tf > 0):
            raise InvalidParameter("thresholds need tau_near >= 0 and tau_far > 0")
        adj.setflags(write=False)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "tau_near", tn)
        object.__setattr__(self, "tau_far", tf)

    @property
    def r(self) -> int:
        return len(self.layers)

    @property
    def d(self) -> int:
        return self.layers[0].shape[1]

    def links(self, a: int, b: int) -> np.ndarray:
        """Boolean (p_a, p_b) matrix of links between layers a and b."""
        M = np.zeros((self.layers[a].shape[0], self.layers[b].shape[0]), dtype=bool)
        for la, i, lb, j in self.adjacency:
            if la == a and lb == b:
                M[i, j] = True
            elif la == b and lb == a:
                M[j, i] = True
        return M


def loss_term_count(cloud: LayerCloud) -> int:
    """One term per cross-layer node pair: p^2 r(r-1)/2 for equal layer sizes p."""
    sizes = [L.shape[0] for L in cloud.layers]
    return int(sum(sizes[a] * sizes[b] for a in range(len(sizes)) for b in range(a + 1, len(sizes))))


# ---------------------------------------------------------------------------
# loss


def hinge_residuals(cloud: LayerCloud, positions) -> np.ndarray:
    """Residual per cross-layer pair; the smooth loss is the sum of their squares.

    Linked pairs contribute max(0, d - tau_near), unlinked ones max(0, tau_far - d).
    """
    out = []
    for a in range(cloud.r):
        for b in range(a + 1, cloud.r):
            D = mf.hyperbolic_distance(positions[a][:, None, :], positions[b][None, :, :])
            L = cloud.links(a, b)
            out.append(np.where(L, np.maximum(0.0, D - cloud.tau_near),
                                np.maximum(0.0, cloud.tau_far - D)).ravel())
    return np.concatenate(out) if out else np.zeros(0)


def hard_violations(cloud: LayerCloud, positions, tol: float = 1e-6) -> int:
    """Number of 0/1 loss terms violated by more than tol."""
    return int(np.count_nonzero(hinge_residuals(cloud, positions) > tol))


def alignment_loss(cloud: LayerCloud, isometries) -> float:
    pos = [q(L) for q, L in zip(isometries, cloud.layers)]
    r = hinge_residuals(cloud, pos)
    return float(r @ r)


def threshold_conflicts(cloud: LayerCloud, tol: float = 1e-12) -> list:
    """Reasons the loss cannot reach zero whatever isometries are used.

    Isometries keep intra-layer distances, so by the triangle inequality
    two nodes linked to a common node must be within 2 tau_near of each
    other, and a linked and an unlinked neighbour of a common node must be
    at least tau_far - tau_near apart.
    """
    msgs = []
    for a in range(cloud.r):
        Da = mf.hyperbolic_distance(cloud.layers[a][:, None, :], cloud.layers[a][None, :, :])
        for b in range(cloud.r):
            if a == b:
                continue
            L = cloud.links(a, b)
            for j in range(L.shape[1]):
                linked = np.flatnonzero(L[:, j])
                if linked.size == 0:
                    continue
                sub = Da[np.ix_(linked, linked)]
                if sub.max() > 2.0 * cloud.tau_near + tol:
                    msgs.append(f"layer {a} nodes linked to layer {b} node {j} are {sub.max():.6g} apart, "
                                f"more than 2*tau_near")
                unlinked = np.flatnonzero(~L[:, j])
                if unlinked.size:
                    gap = Da[np.ix_(linked, unlinked)].min()
                    if gap < cloud.tau_far - cloud.tau_near - tol:
                        msgs.append(f"layer {a}: a linked and an unlinked neighbour of layer {b} node {j} "
                                    f"are only {gap:.6g} apart, less than tau_far - tau_near")
    return msgs


# ---------------------------------------------------------------------------
# isometries from conformal flows


def generator_size(d: int) -> int:
    return d * (d + 1) // 2


def unpack_generator(theta, d: int):
    theta = np.asarray(theta, dtype=float)
    A = np.zeros((d, d))
    iu = np.triu_indices(d, 1)
    A[iu] = theta[:len(iu[0])]
    return A - A.T, theta[len(iu[0]):]


def conformal_flow(points, A, f, t: float = 1.0, steps: int = FLOW_STEPS) -> np.ndarray:
    """Integrate x' = A x + f - <x, f> x on the unit sphere (RK4, renormalised each step)."""
    X = np.array(points, dtype=float)
    h = t / steps

    def field_(Y):
        return Y @ A.T + f - (Y @ f)[:, None] * Y

    for _ in range(steps):
        k1 = field_(X)
        k2 = field_(X + 0.5 * h * k1)
        k3 = field_(X + 0.5 * h * k2)
        k4 = field_(X + h * k3)
        X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        X /= np.linalg.norm(X, axis=1, keepdims=True)
    return X


def anchor_points(d: int, seed: int = 0) -> np.ndarray:
    """d(d+1)/2 well spread points on S^{d-1} (best of a few random draws)."""
    g = make_rng(seed)
    k = max(generator_size(d), 3)
    best, score = None, -1.0
    for _ in range(64):
        P = uniform_sphere(k, d, g)
        G = np.linalg.norm(P[:, None] - P[None], axis=-1) + 10.0 * np.eye(k)
        if G.min() > score:
            best, score = P, G.min()
    return best


def isometry_from_generator(theta, d: int, anchors) -> mf.BallIsometry:
    """Extend the boundary flow map of the generator to the ball."""
    A, f = unpack_generator(theta, d)
    moved = conformal_flow(anchors, A, f)
    return mf.ball_isometry_from_correspondences(anchors, moved)


# ---------------------------------------------------------------------------
# alignment


@dataclass
class MultilayerResult:
    isometries: list
    loss: float
    hard_violations: int
    term_count: int
    history: list
    generators: np.ndarray
    feasible: bool = True
    conflicts: list = field(default_factory=list)
    seed: int = 0

    def aligned(self, cloud: LayerCloud):
        return [q(L) for q, L in zip(self.isometries, cloud.layers)]

    def report(self) -> dict:
        return {
            "loss": self.loss, "hard_violations": self.hard_violations, "term_count": self.term_count,
            "history": self.history, "generators": self.generators, "feasible": self.feasible,
            "conflicts": self.conflicts, "seed": self.seed,
            "isometries": [{"b": q.b, "rot": q.rot} for q in self.isometries],
        }


def intra_layer_residual(cloud: LayerCloud, isometries) -> float:
    """Largest change of any intra-layer hyperbolic distance."""
    worst = 0.0
    for q, L in zip(isometries, cloud.layers):
        D0 = mf.hyperbolic_distance(L[:, None, :], L[None, :, :])
        M = q(L)
        D1 = mf.hyperbolic_distance(M[:, None, :], M[None, :, :])
        worst = max(worst, float(np.max(np.abs(D1 - D0))))
    return worst


def multilayer_align(cloud: LayerCloud, seed: int = 0, generations: int = 300, step_size: float = 0.5,
                     polish: bool = True, strict: bool = False, es_target: float = 1e-10) -> MultilayerResult:
    """Find one isometry per layer minimising the hinge loss.

    Threshold conflicts (loss bounded away from zero) are reported in the
    result; with ``strict`` they raise InfeasibleThreshold instead.
    """
    conflicts = threshold_conflicts(cloud)
    if conflicts and strict:
        raise InfeasibleThreshold("; ".join(conflicts))
    d, r = cloud.d, cloud.r
    terms = loss_term_count(cloud)
    identity = mf.BallIsometry.identity(d)
    if r == 1:
        return MultilayerResult([identity], 0.0, 0, terms, [0.0], np.zeros((0, generator_size(d))),
                                not conflicts, conflicts, int(seed))
    anchors = anchor_points(d, seed)
    g = generator_size(d)

    def isometries(x):
        return [identity] + [isometry_from_generator(x[k * g:(k + 1) * g], d, anchors) for k in range(r - 1)]

    def residuals(x):
        qs = isometries(x)
        return hinge_residuals(cloud, [q(L) for q, L in zip(qs, cloud.layers)])

    def loss(x):
        try:
            res = residuals(x)
        except (NoConvergence, SwarmfoldError, FloatingPointError):
            return FAILED_LOSS
        return float(res @ res)

    spec = ManifoldSpec.euclidean(g * (r - 1))
    es = es_optimize(loss, ESState.initial(np.zeros(g * (r - 1)), step_size, seed), spec,
                     max_generations=generations, ftarget=es_target if polish else 0.0)
    best, best_f, history = es.best_x, es.best_f, list(es.history)
    if polish and best_f > 0:
        try:
            ls = least_squares(residuals, best, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=100 * best.size)
            f = loss(ls.x)
            if f < best_f:
                best, best_f = ls.x, f
                history.append(best_f)
        except (NoConvergence, SwarmfoldError):
            pass
    qs = isometries(best)
    pos = [q(L) for q, L in zip(qs, cloud.layers)]
    return MultilayerResult(qs, best_f, hard_violations(cloud, pos), terms, history,
                            best.reshape(r - 1, g), not conflicts, conflicts, int(seed))


def planted_instance(p: int = 10, d: int = 2, seed: int = 0, shift: float = 0.3,
                     tau_near: float = 0.0, tau_far: Optional[float] = None):
    """Two layers where the second is a known isometry image of the first.

    Node i of layer 1 is linked to node i of layer 0. Returns (cloud, isometry
    mapping layer 0 onto layer 1).
    """
    g = make_rng(seed)
    L0 = uniform_sphere(p, d, g) * (0.7 * g.uniform(0.2, 1.0, (p, 1)) ** (1.0 / d))
    b = g.standard_normal(d)
    b *= shift / np.linalg.norm(b)
    R = mf.polar_project(g.standard_normal((d, d)))
    if np.linalg.det(R) < 0:
        R[:, 0] *= -1.0
    q = mf.BallIsometry(b, R)
    L1 = q(L0)
    if tau_far is None:
        D = mf.hyperbolic_distance(L0[:, None, :], L0[None, :, :]) + 1e9 * np.eye(p)
        tau_far = 0.5 * float(D.min())
    adj = [(1, i, 0, i) for i in range(p)]
    return LayerCloud((L0, L1), adj, tau_near, tau_far), q


# ---------------------------------------------------------------------------
# files


def cloud_to_json(cloud: LayerCloud) -> dict:
    return {"layers": [L.tolist() for L in cloud.layers], "adjacency": cloud.adjacency.tolist(),
            "d": cloud.d, "tau_near": cloud.tau_near, "tau_far": cloud.tau_far}


def write_layer_cloud(path, cloud: LayerCloud) -> None:
    atomic_write_text(path, dumps(cloud_to_json(cloud)))


def read_layer_cloud(path) -> LayerCloud:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc}") from None
    missing = [k for k in ("layers", "adjacency", "d", "tau_near", "tau_far") if k not in obj]
    if missing:
        raise FormatError(f"layer cloud is missing {missing}")
    cloud = LayerCloud(tuple(obj["layers"]), obj["adjacency"], obj["tau_near"], obj["tau_far"])
    if cloud.d != int(obj["d"]):
        raise FormatError(f"declared d={obj['d']} but points have {cloud.d} coordinates")
    return cloud
