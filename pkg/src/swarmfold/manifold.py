"""Geometric primitives: circle, spheres, SO(n), U(d), disc and ball isometries.

Conventions
-----------
* Angles live in [0, 2pi).
* A disc Moebius map is stored as (alpha, psi) and acts by
  ``z -> exp(i psi) (z - alpha) / (1 - conj(alpha) z)``.
* A ball isometry is stored as (b, rot) and acts by
  ``x -> rot @ ((-b) (+) x)`` where ``(+)`` is Moebius addition in the ball.
  In two dimensions this is the same map as MoebiusMap(alpha=b, psi=angle(rot)).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import (
    DegeneratePoints,
    DimensionMismatch,
    InvalidParameter,
    NoConvergence,
    OffManifoldPoint,
    OutsideBall,
)

TWO_PI = 2.0 * np.pi
BOUNDARY_GUARD = 1e-12


def canonical_angle(x):
    """Reduce angles to [0, 2pi). Works on scalars and arrays."""
    y = np.fmod(x, TWO_PI)
    y = np.where(y < 0.0, y + TWO_PI, y)
    y = np.where(y >= TWO_PI, y - TWO_PI, y)
    if np.ndim(x) == 0:
        return float(y)
    return y


def wrap_to_pi(x):
    """Map angle differences into (-pi, pi]."""
    return np.pi - canonical_angle(np.pi - np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# validators


def unit_vector(x, tol: float = 1e-12) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise DimensionMismatch(f"unit vector needs shape (d,), d >= 2, got {v.shape}")
    if abs(np.linalg.norm(v) - 1.0) > tol:
        raise OffManifoldPoint(f"norm {np.linalg.norm(v)!r} is not 1")
    return v


def complex_unit_vector(x, tol: float = 1e-12) -> np.ndarray:
    v = np.asarray(x, dtype=complex)
    if v.ndim != 1 or v.size < 1:
        raise DimensionMismatch(f"complex unit vector needs shape (m,), got {v.shape}")
    if abs(np.linalg.norm(v) - 1.0) > tol:
        raise OffManifoldPoint(f"norm {np.linalg.norm(v)!r} is not 1")
    return v


def orthogonality_residual(Q) -> float:
    """Frobenius norm of Q^H Q - I (last two axes; max over leading axes)."""
    Q = np.asarray(Q)
    n = Q.shape[-1]
    G = np.swapaxes(Q.conj(), -1, -2) @ Q - np.eye(n)
    r = np.sqrt(np.sum(np.abs(G) ** 2, axis=(-2, -1)))
    return float(np.max(r))


def special_orthogonal(Q, tol: float = 1e-10) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {Q.shape}")
    if orthogonality_residual(Q) > tol or abs(np.linalg.det(Q) - 1.0) > tol:
        raise OffManifoldPoint("matrix is not in SO(n)")
    return Q


def unitary(U, tol: float = 1e-10) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {U.shape}")
    if orthogonality_residual(U) > tol:
        raise OffManifoldPoint("matrix is not unitary")
    return U


def skew_residual(X) -> float:
    X = np.asarray(X)
    return float(np.max(np.abs(X + X.conj().T))) if X.size else 0.0


def antisymmetric(X, tol: float = 1e-12) -> np.ndarray:
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {X.shape}")
    if skew_residual(X) > tol:
        raise InvalidParameter("matrix is not skew (X^H = -X)")
    return X


def skew_part(X):
    """Skew-Hermitian part (X - X^H)/2 over the last two axes."""
    return 0.5 * (X - np.swapaxes(np.conj(X), -1, -2))


def polar_project(M) -> np.ndarray:
    """Nearest orthogonal/unitary matrix; det forced to +1 for real input."""
    M = np.asarray(M)
    U, _, Vh = np.linalg.svd(M)
    if np.isrealobj(M) and np.linalg.det(U @ Vh) < 0:
        U = U.copy()
        U[:, -1] = -U[:, -1]
    return U @ Vh


def group_exp(X) -> np.ndarray:
    """Matrix exponential of a skew-symmetric or skew-Hermitian generator."""
    X = antisymmetric(X)
    return expm(X)


def rotation2(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


# ---------------------------------------------------------------------------
# disc Moebius group


@dataclass(frozen=True)
class MoebiusMap:
    """Orientation-preserving disc automorphism z -> e^{i psi}(z - alpha)/(1 - conj(alpha) z)."""

    alpha: complex = 0j
    psi: float = 0.0

    def __post_init__(self):
        a = complex(self.alpha)
        if not np.isfinite(a) or abs(a) >= 1.0 - BOUNDARY_GUARD:
            raise InvalidParameter(f"|alpha| must be < 1, got {abs(a)!r}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "psi", canonical_angle(float(self.psi)))

    @classmethod
    def identity(cls):
        return cls(0j, 0.0)

    def __call__(self, z):
        """Apply to points of the closed disc (no boundary check)."""
        z = np.asarray(z, dtype=complex)
        out = np.exp(1j * self.psi) * (z - self.alpha) / (1.0 - np.conj(self.alpha) * z)
        return out if out.ndim else complex(out)

    def inverse(self) -> "MoebiusMap":
        # w = e^{ipsi}(z - a)/(1 - conj(a) z)  =>  z = (w e^{-ipsi} + a)/(1 + conj(a) w e^{-ipsi})
        # which is e^{-ipsi} (w - (-a e^{ipsi})) / (1 - conj(-a e^{ipsi}) w)
        return MoebiusMap(-self.alpha * np.exp(1j * self.psi), -self.psi)

    def apply_inverse(self, w):
        w = np.asarray(w, dtype=complex)
        u = w * np.exp(-1j * self.psi)
        out = (u + self.alpha) / (1.0 + np.conj(self.alpha) * u)
        return out if out.ndim else complex(out)

    def matrix(self) -> np.ndarray:
        """A 2x2 complex matrix representing the map (up to scale)."""
        e = np.exp(1j * self.psi)
        return np.array([[e, -e * self.alpha], [-np.conj(self.alpha), 1.0]])

    @classmethod
    def from_matrix(cls, M) -> "MoebiusMap":
        a, b = M[0]
        c, d = M[1]
        # normalise to [[e, -e alpha], [-conj(alpha), 1]]
        alpha = -b / a
        return cls(alpha, float(np.angle(a / d)))


def moebius_apply(g: MoebiusMap, z):
    """Apply g to boundary points (|z| = 1 within 1e-12)."""
    za = np.asarray(z, dtype=complex)
    if np.any(np.abs(np.abs(za) - 1.0) > 1e-12):
        raise OffManifoldPoint("moebius_apply expects points on the unit circle")
    return g(z)


def moebius_compose(g1: MoebiusMap, g2: MoebiusMap) -> MoebiusMap:
    """Return g1 o g2."""
    # alpha of the composite is the point sent to 0
    alpha3 = g2.apply_inverse(g1.alpha)
    h = MoebiusMap(alpha3, 0.0)
    # the composite equals e^{i psi3} h, read psi3 off at one boundary point
    p = h.apply_inverse(1.0 + 0j)
    psi3 = float(np.angle(g1(g2(p))))
    return MoebiusMap(alpha3, psi3)


def moebius_inverse(g: MoebiusMap) -> MoebiusMap:
    return g.inverse()


def _three_point_matrix(z1, z2, z3):
    # sends z1 -> 0, z2 -> 1, z3 -> inf
    return np.array([[z2 - z3, -z1 * (z2 - z3)], [z2 - z1, -z3 * (z2 - z1)]], dtype=complex)


def moebius_from_points(src, dst, tol: float = 1e-10) -> MoebiusMap:
    """The disc automorphism sending three boundary points src to dst.

    The triples must have the same cyclic orientation, which is automatic
    when dst is the image of src under some orientation-preserving map.
    """
    src = np.asarray(src, dtype=complex)
    dst = np.asarray(dst, dtype=complex)
    for pts in (src, dst):
        if min(abs(pts[0] - pts[1]), abs(pts[1] - pts[2]), abs(pts[0] - pts[2])) <= tol:
            raise DegeneratePoints("anchor points coincide")
    M = np.linalg.solve(_three_point_matrix(*dst), _three_point_matrix(*src))
    return MoebiusMap.from_matrix(M)


def cross_ratio(z1, z2, z3, z4, tol: float = 1e-10) -> complex:
    """((z1 - z3)(z2 - z4)) / ((z1 - z4)(z2 - z3))."""
    pts = [complex(z) for z in (z1, z2, z3, z4)]
    for i in range(4):
        for j in range(i + 1, 4):
            if abs(pts[i] - pts[j]) <= tol:
                raise DegeneratePoints(f"points {i} and {j} coincide")
    z1, z2, z3, z4 = pts
    return ((z1 - z3) * (z2 - z4)) / ((z1 - z4) * (z2 - z3))


# ---------------------------------------------------------------------------
# hyperbolic ball


def mobius_add(a, x):
    """Moebius (gyro) addition a (+) x in the unit ball; broadcasts over leading axes."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    ax = np.sum(a * x, axis=-1, keepdims=True)
    aa = np.sum(a * a, axis=-1, keepdims=True)
    xx = np.sum(x * x, axis=-1, keepdims=True)
    num = (1.0 + 2.0 * ax + xx) * a + (1.0 - aa) * x
    den = 1.0 + 2.0 * ax + aa * xx
    return num / den


def hyperbolic_distance(u, v):
    """Poincare-ball distance 2 artanh |(-u) (+) v|."""
    w = mobius_add(-np.asarray(u, dtype=float), v)
    r = np.minimum(np.linalg.norm(w, axis=-1), 1.0)
    return 2.0 * np.arctanh(r)


def _check_in_closed_ball(x, tol=1e-12):
    n = np.linalg.norm(x, axis=-1)
    if np.any(n > 1.0 + tol):
        raise OutsideBall(f"point of norm {float(np.max(n))!r} lies outside the unit ball")


@dataclass(frozen=True)
class BallIsometry:
    """Orientation-preserving isometry x -> rot ((-b) (+) x) of the Poincare ball."""

    b: np.ndarray
    rot: np.ndarray = field(default=None)

    def __post_init__(self):
        b = np.array(self.b, dtype=float).reshape(-1)
        d = b.size
        if d < 1:
            raise DimensionMismatch("empty translation vector")
        if np.linalg.norm(b) >= 1.0 - BOUNDARY_GUARD:
            raise InvalidParameter(f"|b| must be < 1, got {np.linalg.norm(b)!r}")
        rot = np.eye(d) if self.rot is None else np.array(self.rot, dtype=float)
        if rot.shape != (d, d):
            raise DimensionMismatch(f"rotation shape {rot.shape} does not match d={d}")
        special_orthogonal(rot)
        b.setflags(write=False)
        rot.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "rot", rot)

    @property
    def dim(self) -> int:
        return self.b.size

    @classmethod
    def identity(cls, d: int):
        return cls(np.zeros(d), np.eye(d))

    @classmethod
    def from_moebius(cls, g: MoebiusMap):
        return cls(np.array([g.alpha.real, g.alpha.imag]), rotation2(g.psi))

    def to_moebius(self) -> MoebiusMap:
        if self.dim != 2:
            raise DimensionMismatch("only planar isometries are disc Moebius maps")
        return MoebiusMap(complex(self.b[0], self.b[1]), float(np.arctan2(self.rot[1, 0], self.rot[0, 0])))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return mobius_add(-self.b, x) @ self.rot.T

    def apply_inverse(self, y):
        y = np.asarray(y, dtype=float)
        return mobius_add(self.b, y @ self.rot)

    def inverse(self) -> "BallIsometry":
        return _isometry_from_map(self.apply_inverse, self(np.zeros(self.dim)))

    def compose(self, other: "BallIsometry") -> "BallIsometry":
        """self o other."""
        b3 = other.apply_inverse(self.apply_inverse(np.zeros(self.dim)))
        return _isometry_from_map(lambda x: self(other(x)), b3)


def _isometry_from_map(f, b):
    """Build the BallIsometry equal to f given the point b that f sends to 0."""
    d = b.size
    # y -> f(b (+) y) fixes the origin, hence is the linear map rot
    cols = f(mobius_add(b, np.eye(d)))
    return BallIsometry(b, polar_project(cols.T))


def ball_isometry_apply(q: BallIsometry, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != q.dim:
        raise DimensionMismatch(f"point dimension {x.shape[-1]} != {q.dim}")
    _check_in_closed_ball(x)
    return q(x)


def ball_isometry_compose(q1: BallIsometry, q2: BallIsometry) -> BallIsometry:
    return q1.compose(q2)


def ball_isometry_from_correspondences(x, y) -> BallIsometry:
    """Best orientation-preserving isometry with q(x_k) ~ y_k.

    Both clouds are first moved so their conformal barycenters sit at the
    origin; the remaining rotation is an orthogonal Procrustes problem. An
    exact correspondence is recovered exactly.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 2:
        raise DimensionMismatch("correspondence sets must have equal shape (k, d)")
    d = x.shape[1]
    if x.shape[0] < d:
        raise DegeneratePoints(f"need at least {d} correspondences")
    bx = ball_barycenter(x)
    by = ball_barycenter(y)
    xs = mobius_add(-bx, x)
    ys = mobius_add(-by, y)
    H = xs.T @ ys
    if np.linalg.matrix_rank(H, tol=1e-9 * max(1.0, np.abs(H).max())) < d - 1:
        raise DegeneratePoints("correspondences do not determine a rotation")
    R = polar_project(H.T)
    # q = T_{-by}^{-1} o R o T_{-bx}:  x -> by (+) R((-bx) (+) x)
    tx = BallIsometry(bx, np.eye(d))
    ty_inv = BallIsometry(-by, np.eye(d))  # y -> by (+) y
    return ty_inv.compose(BallIsometry(np.zeros(d), R).compose(tx))


# ---------------------------------------------------------------------------
# barycenters


def _atom_check(points, weights, tol=1e-9):
    # bucket coincident points on a tol-sized grid
    keys = np.round(points / tol).astype(np.int64)
    _, inv = np.unique(keys, axis=0, return_inverse=True)
    mass = np.bincount(inv.reshape(-1), weights=weights)
    if mass.max() >= 0.5 - 1e-12:
        raise NoConvergence("barycenter undefined: an atom carries half the mass or more")


def ball_barycenter(points, weights=None, step: float = 0.5, tol: float = 1e-10,
                    max_iter: int = 10_000) -> np.ndarray:
    """Conformal barycenter of points on the sphere S^{d-1} (or inside the ball).

    Damped fixed-point iteration: move the candidate centre along the
    Euclidean mean of the recentred points until that mean vanishes.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise DimensionMismatch("points must have shape (n, d)")
    n, d = pts.shape
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w < 0) or w.sum() <= 0:
        raise InvalidParameter("weights must be nonnegative with positive sum")
    w = w / w.sum()
    if n < 3:
        raise NoConvergence("barycenter needs at least three points")
    _atom_check(pts, w)
    c = np.zeros(d)
    for _ in range(max_iter):
        m = w @ mobius_add(-c, pts)
        if np.linalg.norm(m) <= tol:
            return c
        c = mobius_add(c, step * m)
        if not np.all(np.isfinite(c)) or np.linalg.norm(c) >= 1.0:
            break
    raise NoConvergence("conformal barycenter iteration did not converge")


def conformal_barycenter(points, weights=None, step: float = 0.5, tol: float = 1e-10,
                         max_iter: int = 10_000) -> complex:
    """Conformal barycenter of boundary points of the unit disc."""
    z = np.asarray(points, dtype=complex).reshape(-1)
    n = z.size
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w < 0) or w.sum() <= 0:
        raise InvalidParameter("weights must be nonnegative with positive sum")
    w = w / w.sum()
    if n < 3:
        raise NoConvergence("barycenter needs at least three points")
    _atom_check(np.column_stack([z.real, z.imag]), w)
    c = 0j
    for _ in range(max_iter):
        m = w @ ((z - c) / (1.0 - np.conj(c) * z))
        if abs(m) <= tol:
            return complex(c)
        h = step * m
        c = (h + c) / (1.0 + np.conj(c) * h)
        if not np.isfinite(c) or abs(c) >= 1.0:
            break
    raise NoConvergence("conformal barycenter iteration did not converge")


# ---------------------------------------------------------------------------
# distances and the quaternion cover


def chordal_distance(a, b) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return float(np.sqrt(np.sum(np.abs(a - b) ** 2)))


def quaternion_double_cover(q) -> np.ndarray:
    """Rotation matrix of a unit quaternion (w, x, y, z); q and -q agree exactly."""
    q = unit_vector(q, tol=1e-9)
    if q.size != 4:
        raise DimensionMismatch("quaternion must have 4 components")
    w, x, y, z = q
    # only even products appear, so the sign of q cancels bit for bit
    ww, xx, yy, zz = w * w, x * x, y * y, z * z
    wx, wy, wz = w * x, w * y, w * z
    xy, xz, yz = x * y, x * z, y * z
    return np.array([
        [ww + xx - yy - zz, 2.0 * (xy - wz), 2.0 * (xz + wy)],
        [2.0 * (xy + wz), ww - xx + yy - zz, 2.0 * (yz - wx)],
        [2.0 * (xz - wy), 2.0 * (yz + wx), ww - xx - yy + zz],
    ])


def rotation_to_quaternion(R) -> np.ndarray:
    """Inverse of the double cover, returning the representative with w >= 0."""
    R = np.asarray(R, dtype=float)
    K = np.array([
        [R[0, 0] - R[1, 1] - R[2, 2], R[1, 0] + R[0, 1], R[2, 0] + R[0, 2], R[2, 1] - R[1, 2]],
        [R[1, 0] + R[0, 1], R[1, 1] - R[0, 0] - R[2, 2], R[2, 1] + R[1, 2], R[0, 2] - R[2, 0]],
        [R[2, 0] + R[0, 2], R[2, 1] + R[1, 2], R[2, 2] - R[0, 0] - R[1, 1], R[1, 0] - R[0, 1]],
        [R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1], R[0, 0] + R[1, 1] + R[2, 2]],
    ]) / 3.0
    vals, vecs = np.linalg.eigh(K)
    v = vecs[:, -1]
    q = np.array([v[3], v[0], v[1], v[2]])
    return q if q[0] >= 0 else -q
