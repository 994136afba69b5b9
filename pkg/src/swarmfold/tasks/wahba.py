"""Wahba's problem: the rotation that best maps reference vectors onto observations.

Two solvers are provided. ``wahba_svd`` is the closed-form optimum.
``wahba_stochastic`` learns a spherical Cauchy policy on S^3 with the
evolution strategy; policy samples are unit quaternions, sent to rotations
by the double cover after being folded into the hemisphere of the policy mean.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import manifold as mf
from ..dirstat import SphericalCauchyParams, uniform_sphere
from ..errors import DegenerateInstance, DimensionMismatch, InvalidParameter, NoConvergence
from ..es import ESState, ManifoldSpec, es_optimize
from ..io import FormatError, atomic_write_text, fmt17
from ..noise import make_rng

CSV_HEADER = ["i", "vx", "vy", "vz", "wx", "wy", "wz", "weight"]


@dataclass(frozen=True)
class WahbaInstance:
    """Unit reference vectors v, observations w and positive weights a."""

    v: np.ndarray
    w: np.ndarray
    a: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.array(self.v, dtype=float)
        w = np.array(self.w, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3 or w.shape != v.shape:
            raise DimensionMismatch("v and w must both have shape (m, 3)")
        m = v.shape[0]
        if m < 3:
            raise InvalidParameter(f"need at least 3 vector pairs, got {m}")
        if np.any(np.abs(np.linalg.norm(v, axis=1) - 1.0) > 1e-9):
            raise InvalidParameter("reference vectors must be unit vectors")
        a = np.ones(m) if self.a is None else np.array(self.a, dtype=float).reshape(-1)
        if a.shape != (m,) or not np.all(a > 0) or not np.all(np.isfinite(a)):
            raise InvalidParameter("weights must be positive, one per pair")
        for arr in (v, w, a):
            arr.setflags(write=False)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "a", a)

    @property
    def m(self) -> int:
        return self.v.shape[0]


def wahba_loss(R, inst: WahbaInstance):
    """J(R) = 1/2 sum_i a_i |w_i - R v_i|^2; R may carry leading batch axes."""
    R = np.asarray(R, dtype=float)
    pred = np.einsum("...ab,ib->...ia", R, inst.v)
    return 0.5 * np.einsum("i,...i->...", inst.a, np.sum((inst.w - pred) ** 2, axis=-1))


def attitude_profile(inst: WahbaInstance) -> np.ndarray:
    return (inst.w * inst.a[:, None]).T @ inst.v


def wahba_svd(inst: WahbaInstance) -> np.ndarray:
    """Global minimiser of J over SO(3)."""
    B = attitude_profile(inst)
    U, s, Vt = np.linalg.svd(B)
    if s[1] <= 1e-12 * max(s[0], 1e-300):
        raise DegenerateInstance("attitude profile has rank < 2; the rotation is not determined")
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U) * np.linalg.det(Vt))])
    return U @ D @ Vt


# ---------------------------------------------------------------------------
# quaternion policy


def quaternions_to_rotations(q) -> np.ndarray:
    """Batched double cover S^3 -> SO(3); only even products of q enter."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = np.moveaxis(q, -1, 0)
    ww, xx, yy, zz = w * w, x * x, y * y, z * z
    wx, wy, wz = w * x, w * y, w * z
    xy, xz, yz = x * y, x * z, y * z
    rows = [
        np.stack([ww + xx - yy - zz, 2.0 * (xy - wz), 2.0 * (xz + wy)], axis=-1),
        np.stack([2.0 * (xy + wz), ww - xx + yy - zz, 2.0 * (yz - wx)], axis=-1),
        np.stack([2.0 * (xz - wy), 2.0 * (yz + wx), ww - xx - yy + zz], axis=-1),
    ]
    return np.stack(rows, axis=-2)


def fold_hemisphere(q, mean) -> np.ndarray:
    """Representatives of +-q lying in the closed hemisphere around ``mean``."""
    q = np.asarray(q, dtype=float)
    s = np.where(q @ np.asarray(mean, dtype=float) < 0.0, -1.0, 1.0)
    return q * s[..., None]


def policy_rotations(zeta, base) -> np.ndarray:
    """Rotations of spherical Cauchy(zeta) samples built from uniform ``base`` points."""
    zeta = np.asarray(zeta, dtype=float)
    q = mf.mobius_add(zeta, base)
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    nz = np.linalg.norm(zeta)
    mean = zeta / nz if nz > 0 else np.array([1.0, 0.0, 0.0, 0.0])
    return quaternions_to_rotations(fold_hemisphere(q, mean))


def policy_loss(zeta, inst: WahbaInstance, base) -> float:
    """Monte Carlo expected loss of the policy on a fixed set of base samples."""
    return float(np.mean(wahba_loss(policy_rotations(zeta, base), inst)))


@dataclass
class WahbaResult:
    rotation: np.ndarray
    policy: SphericalCauchyParams
    loss: float
    history: list
    seed: int

    def report(self) -> dict:
        return {"rotation": self.rotation, "zeta": self.policy.zeta, "loss": self.loss,
                "history": self.history, "seed": self.seed,
                "quaternion": mf.rotation_to_quaternion(self.rotation)}


def wahba_stochastic(inst: WahbaInstance, seed: int = 0, generations: int = 400,
                     mc_samples: int = 32, step_size: float = 0.3,
                     popsize: Optional[int] = None) -> WahbaResult:
    """Learn a spherical Cauchy policy on S^3 minimising the expected Wahba loss.

    The expected loss is estimated with common random numbers, so the
    objective is a smooth deterministic function of zeta. As the policy
    concentrates, zeta approaches the boundary and the mean direction gives
    the returned rotation.
    """
    base = uniform_sphere(mc_samples, 4, make_rng(int(seed) + 0x5EED))
    spec = ManifoldSpec((("ball", 4),))
    res = es_optimize(lambda z: policy_loss(z, inst, base), ESState.initial(np.zeros(4), step_size, seed),
                      spec, popsize=popsize, max_generations=generations)
    zeta = res.best_x
    nz = float(np.linalg.norm(zeta))
    if not nz > 0:
        raise NoConvergence("policy stayed uniform; no preferred rotation was learned")
    R = quaternions_to_rotations(zeta / nz)
    return WahbaResult(R, SphericalCauchyParams(zeta), float(wahba_loss(R, inst)), res.history, int(seed))


# ---------------------------------------------------------------------------
# instances and files


def random_rotation(rng=None) -> np.ndarray:
    return quaternions_to_rotations(uniform_sphere(1, 4, make_rng(0) if rng is None else make_rng(rng))[0])


def random_instance(m: int = 20, sigma: float = 0.0, seed: int = 0, rotation=None):
    """Instance w_i = normalise(R v_i + sigma xi_i) with v_i uniform on S^2.

    Returns (instance, true rotation).
    """
    g = make_rng(seed)
    R = random_rotation(g) if rotation is None else mf.special_orthogonal(np.asarray(rotation, dtype=float))
    v = uniform_sphere(int(m), 3, g)
    w = v @ R.T
    if sigma > 0:
        w = w + sigma * g.standard_normal(w.shape)
        w /= np.linalg.norm(w, axis=1, keepdims=True)
    return WahbaInstance(v, w), R


def instance_csv_text(inst: WahbaInstance) -> str:
    lines = [",".join(CSV_HEADER)]
    for i in range(inst.m):
        vals = list(inst.v[i]) + list(inst.w[i]) + [inst.a[i]]
        lines.append(",".join([str(i)] + [fmt17(x) for x in vals]))
    return "\n".join(lines) + "\n"


def write_instance_csv(path, inst: WahbaInstance) -> None:
    atomic_write_text(path, instance_csv_text(inst))


def read_instance_csv(path) -> WahbaInstance:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != CSV_HEADER:
            raise FormatError(f"expected header {','.join(CSV_HEADER)}, got {','.join(header)}")
        rows = [r for r in reader if r]
    try:
        data = np.array([[float(x) for x in r[1:]] for r in rows])
    except ValueError as exc:
        raise FormatError(f"non-numeric entry: {exc}") from None
    if data.ndim != 2 or data.shape[1] != 7:
        raise FormatError("every row needs 8 fields")
    v = data[:, 0:3]
    # rows written with short precision are renormalised; exact files load unchanged
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    v = np.where(np.abs(norms - 1.0) > 1e-12, v / norms, v)
    return WahbaInstance(v, data[:, 3:6], data[:, 6])
