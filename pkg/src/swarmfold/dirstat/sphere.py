"""Distribution families on the real sphere S^{d-1} (points shaped (n, d)).

Densities are with respect to the surface measure, so the uniform density
is one over the sphere's area.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln, ive, logsumexp

from .. import manifold as mf
from ..errors import InvalidParams, NoConvergence
from ._common import check_n, real_unit, require_spread, rng_of, sphere_points, weights_for
from ._mle import minimize_nll


def log_sphere_area(d: int) -> float:
    """log of the area of S^{d-1}, 2 pi^{d/2} / Gamma(d/2)."""
    return float(np.log(2.0) + 0.5 * d * np.log(np.pi) - gammaln(0.5 * d))


def uniform_sphere(n, d, rng=None):
    g = rng_of(rng)
    x = g.standard_normal((check_n(n), d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# von Mises-Fisher


@dataclass(frozen=True)
class VonMisesFisherParams:
    mu: np.ndarray
    kappa: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mu", real_unit(self.mu))
        k = float(self.kappa)
        if not np.isfinite(k) or k < 0:
            raise InvalidParams(f"kappa must be >= 0, got {self.kappa!r}")
        object.__setattr__(self, "kappa", k)

    @property
    def d(self):
        return self.mu.size


def vmf_log_normalizer(d: int, kappa: float) -> float:
    """log of kappa^{d/2-1} / ((2 pi)^{d/2} I_{d/2-1}(kappa))."""
    if kappa < 1e-12:
        return -log_sphere_area(d)
    nu = 0.5 * d - 1.0
    return float(nu * np.log(kappa) - 0.5 * d * np.log(2.0 * np.pi) - np.log(ive(nu, kappa)) - kappa)


def vmf_log_density(p: VonMisesFisherParams, x):
    x = sphere_points(x, p.d)
    return vmf_log_normalizer(p.d, p.kappa) + p.kappa * (x @ p.mu)


def _tangent_directions(mu, n, g):
    v = g.standard_normal((n, mu.size))
    v -= np.outer(v @ mu, mu)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def vmf_sample(p: VonMisesFisherParams, n, rng=None):
    """Wood's rejection sampler for the cosine to mu plus a uniform tangent direction."""
    n = check_n(n)
    g = rng_of(rng)
    d, k = p.d, p.kappa
    m1 = d - 1.0
    b = m1 / (2.0 * k + np.sqrt(4.0 * k * k + m1 * m1))
    x0 = (1.0 - b) / (1.0 + b)
    c = k * x0 + m1 * np.log(1.0 - x0 * x0)
    w = np.empty(0)
    while w.size < n:
        m = max(1024, 2 * (n - w.size))
        z = g.beta(0.5 * m1, 0.5 * m1, m)
        cand = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = g.uniform(0.0, 1.0, m)
        keep = k * cand + m1 * np.log(1.0 - x0 * cand) - c >= np.log(u)
        w = np.concatenate([w, cand[keep]])
    w = w[:n]
    v = _tangent_directions(p.mu, n, g)
    x = w[:, None] * p.mu + np.sqrt(np.maximum(0.0, 1.0 - w * w))[:, None] * v
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def vmf_mean_resultant(d: int, kappa: float) -> float:
    """A_d(kappa) = I_{d/2}(kappa) / I_{d/2-1}(kappa)."""
    if kappa < 1e-8:
        return kappa / d
    return float(ive(0.5 * d, kappa) / ive(0.5 * d - 1.0, kappa))


def vmf_fit(x, weights=None) -> VonMisesFisherParams:
    x = sphere_points(x)
    n, d = x.shape
    require_spread(x, d + 1)
    w = weights_for(n, weights)
    m = w @ x
    R = float(np.linalg.norm(m))
    if R <= 1e-15:
        mu = np.eye(d)[0]
        return VonMisesFisherParams(mu, 0.0)
    if R >= 1.0 - 1e-15:
        raise NoConvergence("mean resultant length 1 gives infinite concentration")
    hi = max(2.0, 2.0 * d / (1.0 - R))
    while vmf_mean_resultant(d, hi) < R:
        hi *= 2.0
    kappa = brentq(lambda k: vmf_mean_resultant(d, k) - R, 0.0, hi, xtol=1e-14, rtol=1e-15, maxiter=500)
    return VonMisesFisherParams(m / R, kappa)


# ---------------------------------------------------------------------------
# spherical Cauchy (Poisson kernel of the ball)


@dataclass(frozen=True)
class SphericalCauchyParams:
    zeta: np.ndarray

    def __post_init__(self):
        z = np.array(self.zeta, dtype=float).reshape(-1)
        if z.size < 2 or not np.all(np.isfinite(z)) or np.linalg.norm(z) >= 1.0:
            raise InvalidParams("zeta must be a finite vector of dimension >= 2 with norm < 1")
        z.setflags(write=False)
        object.__setattr__(self, "zeta", z)

    @property
    def d(self):
        return self.zeta.size

    @property
    def rho(self):
        return float(np.linalg.norm(self.zeta))

    @property
    def mu(self):
        r = self.rho
        return self.zeta / r if r > 0 else np.eye(self.d)[0]


def spherical_cauchy_log_density(p: SphericalCauchyParams, x):
    x = sphere_points(x, p.d)
    rr = p.rho ** 2
    return (gammaln(0.5 * p.d) - np.log(2.0) - 0.5 * p.d * np.log(np.pi)
            + (p.d - 1) * (np.log1p(-rr) - np.log(1.0 + rr - 2.0 * (x @ p.zeta))))


def spherical_cauchy_sample(p: SphericalCauchyParams, n, rng=None):
    """Image of uniform points under the ball isometry x -> zeta (+) x."""
    x = mf.mobius_add(p.zeta, uniform_sphere(n, p.d, rng))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def spherical_cauchy_fit(x, weights=None) -> SphericalCauchyParams:
    """Maximum likelihood; its stationarity equation is the conformal barycenter condition."""
    x = sphere_points(x)
    n, d = x.shape
    require_spread(x, d + 1)
    return SphericalCauchyParams(mf.ball_barycenter(x, weights_for(n, weights)))


# ---------------------------------------------------------------------------
# Bingham

Z_LIMIT = 50.0


def _diag_entries(Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 2:
        if Z.shape[0] != Z.shape[1]:
            raise InvalidParams("Z must be square")
        if np.max(np.abs(Z - np.diag(np.diag(Z))), initial=0.0) > 0:
            raise InvalidParams("Z must be diagonal")
        Z = np.diag(Z)
    if Z.ndim != 1 or Z.size < 2 or not np.all(np.isfinite(Z)):
        raise InvalidParams("Z must be a finite diagonal of size >= 2")
    return Z.copy()


def _series_log_hyp(y, d, max_terms=8192):
    """log 1F1(1/2; d/2; diag(y)) for y >= 0 by the Dirichlet-moment series."""
    s = float(np.max(y))
    if s == 0.0:
        return 0.0
    L = 128
    while L <= max_terms:
        k = np.arange(L)
        # scaled component series a_i(k) = (1/2)_k (y_i/s)^k / k!
        logpoch = gammaln(0.5 + k) - gammaln(0.5) - gammaln(k + 1.0)
        conv = np.zeros(L)
        conv[0] = 1.0
        for yi in y:
            if yi == 0.0:
                continue
            a = np.exp(logpoch + k * np.log(yi / s))
            conv = np.convolve(conv, a)[:L]
        with np.errstate(divide="ignore"):
            logt = np.log(conv) + k * np.log(s) - (gammaln(0.5 * d + k) - gammaln(0.5 * d))
        top = int(np.argmax(logt))
        total = logsumexp(logt)
        if top < L // 2 and logt[-1] < total - 40.0:
            return float(total)
        L *= 2
    raise NoConvergence("Bingham series did not converge")


def _quadrature_log_normalizer(z):
    from .gof import sphere_integral

    d = z.size
    val = sphere_integral(lambda x: np.exp(np.sum(z * x * x, axis=-1) - np.max(z)), d)
    return float(np.log(val) + np.max(z))


def bingham_log_normalizer(Z) -> float:
    z = _diag_entries(Z)
    if np.max(np.abs(z)) > Z_LIMIT:
        raise NoConvergence(f"Bingham normaliser only supported for |Z| <= {Z_LIMIT}")
    d = z.size
    zmin = float(np.min(z))
    try:
        return log_sphere_area(d) + zmin + _series_log_hyp(z - zmin, d)
    except NoConvergence:
        if d > 4:
            raise
        return _quadrature_log_normalizer(z)


def bingham_normalizer(Z) -> float:
    """Integral of exp(x^T Z x) over S^{d-1} (surface measure); area of the sphere at Z = 0."""
    return float(np.exp(bingham_log_normalizer(Z)))


@dataclass(frozen=True)
class BinghamParams:
    """Density exp(x^T M diag(z) M^T x) / c(z).

    z is shifted so that its largest entry is exactly 0; adding a constant
    to z does not change the normalised density.
    """

    M: np.ndarray
    Z: np.ndarray = field(default=None)

    def __post_init__(self):
        M = np.array(self.M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise InvalidParams("M must be square")
        try:
            mf.special_orthogonal(M)
        except Exception as exc:
            raise InvalidParams(f"M must be special orthogonal: {exc}") from None
        z = np.zeros(M.shape[0]) if self.Z is None else _diag_entries(self.Z)
        if z.size != M.shape[0]:
            raise InvalidParams("Z and M sizes differ")
        z = z - np.max(z)
        M.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "Z", z)

    @property
    def d(self):
        return self.M.shape[0]

    @property
    def A(self):
        """The symmetric matrix M diag(z) M^T."""
        return (self.M * self.Z) @ self.M.T


def bingham_log_density(p: BinghamParams, x):
    x = sphere_points(x, p.d)
    return np.einsum("...i,ij,...j->...", x, p.A, x) - bingham_log_normalizer(p.Z)


def bingham_sample(p: BinghamParams, n, rng=None):
    """Rejection from an angular central Gaussian envelope."""
    n = check_n(n)
    g = rng_of(rng)
    d = p.d
    lam = -p.Z  # eigenvalues of the nonnegative matrix A = -M Z M^T
    A = -p.A
    if np.max(lam) == 0.0:
        b = float(d)
    else:
        b = brentq(lambda t: np.sum(1.0 / (t + 2.0 * lam)) - 1.0, 1e-12, float(d), xtol=1e-14)
    omega = np.eye(d) + 2.0 * A / b
    Linv = np.linalg.cholesky(np.linalg.inv(omega))
    log_m = -0.5 * (d - b) + 0.5 * d * np.log(d / b)
    out = np.empty((0, d))
    while out.shape[0] < n:
        m = max(1024, 2 * (n - out.shape[0]))
        y = g.standard_normal((m, d)) @ Linv.T
        x = y / np.linalg.norm(y, axis=1, keepdims=True)
        qa = np.einsum("ij,jk,ik->i", x, A, x)
        qo = np.einsum("ij,jk,ik->i", x, omega, x)
        log_ratio = -qa + 0.5 * d * np.log(qo) - log_m
        keep = np.log(g.uniform(0.0, 1.0, m)) <= log_ratio
        out = np.vstack([out, x[keep]])
    return out[:n]


def bingham_fit(x, weights=None) -> BinghamParams:
    """M from the scatter eigenvectors, z by maximum likelihood given M."""
    x = sphere_points(x)
    n, d = x.shape
    require_spread(x, d + 1)
    w = weights_for(n, weights)
    S = (x * w[:, None]).T @ x
    tau, V = np.linalg.eigh(S)
    # largest scatter eigenvalue last; its z is the pinned zero
    if np.linalg.det(V) < 0:
        V[:, 0] = -V[:, 0]
    free = np.arange(d - 1)

    def nll(zf):
        if np.any(np.abs(zf) > Z_LIMIT):
            return np.inf
        z = np.append(zf, 0.0)
        try:
            return bingham_log_normalizer(z) - float(z @ tau)
        except NoConvergence:
            return np.inf

    zf = minimize_nll(nll, [np.zeros(free.size), -np.ones(free.size)])
    return BinghamParams(V, np.append(zf, 0.0))
