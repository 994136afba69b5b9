"""Shared validation helpers for the distribution families."""
from __future__ import annotations

import numpy as np

from ..errors import DegenerateData, InvalidParams, OffManifoldPoint
from ..noise import make_rng

ON_MANIFOLD_TOL = 1e-9


def rng_of(rng):
    return make_rng(0 if rng is None else rng)


def check_n(n) -> int:
    n = int(n)
    if n < 1:
        raise InvalidParams(f"sample size must be >= 1, got {n}")
    return n


def angles(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(a)):
        raise OffManifoldPoint("angles must be finite")
    return a


def sphere_points(x, d=None, complex_=False) -> np.ndarray:
    """Validate points on a unit sphere; returns an array with a trailing coordinate axis."""
    x = np.asarray(x, dtype=complex if complex_ else float)
    if x.ndim == 0:
        raise OffManifoldPoint("expected vector-valued points")
    if d is not None and x.shape[-1] != d:
        raise OffManifoldPoint(f"points have dimension {x.shape[-1]}, expected {d}")
    norms = np.sqrt(np.sum(np.abs(x) ** 2, axis=-1))
    if not np.all(np.isfinite(norms)) or np.any(np.abs(norms - 1.0) > ON_MANIFOLD_TOL):
        raise OffManifoldPoint("points must have unit norm")
    return x


def weights_for(n, weights) -> np.ndarray:
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape != (n,) or np.any(w < 0) or not np.isfinite(w).all() or w.sum() <= 0:
        raise InvalidParams("weights must be nonnegative, finite and not all zero")
    return w / w.sum()


def require_spread(points, minimum: int, tol: float = 1e-12):
    pts = np.asarray(points)
    n = pts.shape[0]
    if n < minimum:
        raise DegenerateData(f"need at least {minimum} points, got {n}")
    flat = pts.reshape(n, -1)
    if np.max(np.abs(flat - flat[0]), initial=0.0) <= tol:
        raise DegenerateData("all points are identical")


def real_unit(v, name="mu") -> np.ndarray:
    v = np.array(v, dtype=float).reshape(-1)
    if v.size < 2 or abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise InvalidParams(f"{name} must be a unit vector of dimension >= 2")
    v = v / np.linalg.norm(v)
    v.setflags(write=False)
    return v
