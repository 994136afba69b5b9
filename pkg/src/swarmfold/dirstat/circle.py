"""Distribution families on the circle.

Points are angles in radians; densities are with respect to d(phi) on
[0, 2 pi). Every sampler returns canonical angles in [0, 2 pi).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ive

from .. import manifold as mf
from ..errors import InvalidParams, NoConvergence
from ._common import angles, check_n, require_spread, rng_of, weights_for
from ._mle import minimize_nll

LOG_2PI = np.log(2.0 * np.pi)


def _angle_param(x, name):
    x = float(x)
    if not np.isfinite(x):
        raise InvalidParams(f"{name} must be finite")
    return mf.canonical_angle(x)


def log_i0(kappa):
    return np.log(ive(0, kappa)) + kappa


def bessel_ratio(kappa):
    """A(kappa) = I1(kappa)/I0(kappa), the mean resultant length of vM(kappa)."""
    return ive(1, kappa) / ive(0, kappa)


def weighted_resultant(phi, w):
    c = float(w @ np.cos(phi))
    s = float(w @ np.sin(phi))
    return np.arctan2(s, c), np.hypot(c, s)


# ---------------------------------------------------------------------------
# von Mises


@dataclass(frozen=True)
class VonMisesParams:
    mu: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mu", _angle_param(self.mu, "mu"))
        k = float(self.kappa)
        if not np.isfinite(k) or k < 0:
            raise InvalidParams(f"kappa must be >= 0, got {self.kappa!r}")
        object.__setattr__(self, "kappa", k)


def von_mises_log_density(p: VonMisesParams, phi):
    phi = angles(phi)
    k = p.kappa
    # kappa (cos - 1) - log(2 pi ive) keeps large kappa finite
    return k * (np.cos(phi - p.mu) - 1.0) - np.log(ive(0, k)) - LOG_2PI


def von_mises_sample(p: VonMisesParams, n, rng=None):
    g = rng_of(rng)
    return mf.canonical_angle(g.vonmises(p.mu, p.kappa, check_n(n)))


def invert_bessel_ratio(R):
    """kappa with A(kappa) = R, for 0 <= R < 1."""
    if R <= 1e-15:
        return 0.0
    if R >= 1.0:
        raise NoConvergence("mean resultant length 1 gives infinite concentration")
    hi = max(2.0, 2.0 / (1.0 - R))
    while bessel_ratio(hi) < R:
        hi *= 2.0
    return brentq(lambda k: bessel_ratio(k) - R, 0.0, hi, xtol=1e-14, rtol=1e-15, maxiter=500)


def von_mises_fit(phi, weights=None) -> VonMisesParams:
    phi = angles(phi).reshape(-1)
    require_spread(phi, 3)
    w = weights_for(phi.size, weights)
    mu, R = weighted_resultant(phi, w)
    return VonMisesParams(mu, invert_bessel_ratio(R))


# ---------------------------------------------------------------------------
# wrapped Cauchy


@dataclass(frozen=True)
class WrappedCauchyParams:
    alpha: complex = 0j

    def __post_init__(self):
        a = complex(self.alpha)
        if not np.isfinite(a) or abs(a) >= 1.0:
            raise InvalidParams(f"|alpha| must be < 1, got {abs(a)!r}")
        object.__setattr__(self, "alpha", a)

    @classmethod
    def from_polar(cls, r, phi):
        if not 0.0 <= r < 1.0:
            raise InvalidParams(f"r must lie in [0, 1), got {r!r}")
        return cls(r * np.exp(1j * phi))

    @property
    def r(self):
        return abs(self.alpha)

    @property
    def phi(self):
        return mf.canonical_angle(float(np.angle(self.alpha)))


def wrapped_cauchy_log_density(p: WrappedCauchyParams, phi):
    phi = angles(phi)
    r, Phi = p.r, float(np.angle(p.alpha))
    return np.log1p(-r * r) - np.log1p(r * r - 2.0 * r * np.cos(phi - Phi)) - LOG_2PI


def wrapped_cauchy_sample(p: WrappedCauchyParams, n, rng=None):
    """Moebius image of uniform angles under the map sending 0 to alpha."""
    g = rng_of(rng)
    u = np.exp(1j * g.uniform(0.0, 2.0 * np.pi, check_n(n)))
    z = mf.MoebiusMap(-p.alpha, 0.0)(u)
    return mf.canonical_angle(np.angle(z))


def wrapped_cauchy_fit(phi, weights=None) -> WrappedCauchyParams:
    """Maximum likelihood, which coincides with the conformal barycenter."""
    phi = angles(phi).reshape(-1)
    require_spread(phi, 3)
    w = weights_for(phi.size, weights)
    return WrappedCauchyParams(mf.conformal_barycenter(np.exp(1j * phi), w))


# ---------------------------------------------------------------------------
# Kato-Jones


@dataclass(frozen=True)
class KatoJonesParams:
    """Moebius images of vM(kappa, 0); gamma, xi and eta are derived on access."""

    mu: float = 0.0
    nu: float = 0.0
    r: float = 0.0
    kappa: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mu", _angle_param(self.mu, "mu"))
        object.__setattr__(self, "nu", _angle_param(self.nu, "nu"))
        r, k = float(self.r), float(self.kappa)
        if not 0.0 <= r < 1.0:
            raise InvalidParams(f"r must lie in [0, 1), got {self.r!r}")
        if not np.isfinite(k) or k < 0:
            raise InvalidParams(f"kappa must be >= 0, got {self.kappa!r}")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "kappa", k)

    @property
    def gamma(self):
        return mf.canonical_angle(self.mu + self.nu)

    @property
    def xi(self):
        r2 = self.r * self.r
        return float(np.sqrt(r2 * r2 + 2.0 * r2 * np.cos(2.0 * self.nu) + 1.0))

    @property
    def eta(self):
        r2 = self.r * self.r
        c = r2 * np.cos(2.0 * self.nu) + 1.0 + 1j * r2 * np.sin(2.0 * self.nu)
        return mf.canonical_angle(self.mu + float(np.angle(c)))

    def moebius_map(self) -> mf.MoebiusMap:
        """The map carrying vM(kappa, 0) onto this distribution."""
        return mf.MoebiusMap(-self.r * np.exp(1j * self.nu), self.mu)

    @classmethod
    def from_moebius(cls, g: mf.MoebiusMap, kappa: float):
        r = abs(g.alpha)
        nu = float(np.angle(-g.alpha)) if r > 0 else 0.0
        return cls(g.psi, nu, r, kappa)


def kato_jones_log_density(p: KatoJonesParams, phi):
    phi = angles(phi)
    r, k = p.r, p.kappa
    den = 1.0 + r * r - 2.0 * r * np.cos(phi - p.gamma)
    expo = k * (p.xi * np.cos(phi - p.eta) - 2.0 * r * np.cos(p.nu)) / den
    # subtract kappa inside the exponent to pair with the scaled Bessel function
    return np.log1p(-r * r) - LOG_2PI - np.log(ive(0, k)) + (expo - k) - np.log(den)


def kato_jones_sample(p: KatoJonesParams, n, rng=None):
    base = von_mises_sample(VonMisesParams(0.0, p.kappa), n, rng)
    return mf.canonical_angle(np.angle(p.moebius_map()(np.exp(1j * base))))


def _kj_from_vector(x):
    mu, bx, by, lk = x
    b = complex(bx, by)
    s = abs(b)
    r = np.tanh(s)
    nu = float(np.angle(b)) if s > 0 else 0.0
    return KatoJonesParams(mu, nu, min(r, 1.0 - 1e-12), float(np.exp(lk)))


def kato_jones_fit(phi, weights=None, starts: int = 8) -> KatoJonesParams:
    """Multi-start numerical maximum likelihood."""
    phi = angles(phi).reshape(-1)
    require_spread(phi, 4)
    w = weights_for(phi.size, weights)
    sub = np.arange(phi.size)[:: max(1, phi.size // 5000)]
    ws = w[sub] / w[sub].sum()

    def nll_on(idx, wt):
        def f(x):
            try:
                return -float(wt @ kato_jones_log_density(_kj_from_vector(x), phi[idx]))
            except InvalidParams:
                return np.inf
        return f

    m, R = weighted_resultant(phi, w)
    k0 = max(invert_bessel_ratio(min(R, 0.99)), 0.1)
    x0s = []
    for j in range(starts):
        ang = 2.0 * np.pi * j / starts
        s = 0.3 if j % 2 == 0 else 0.8
        x0s.append([m, np.arctanh(s) * np.cos(ang), np.arctanh(s) * np.sin(ang), np.log(k0)])
    x = minimize_nll(nll_on(slice(None), w), x0s, nll_coarse=nll_on(sub, ws))
    return _kj_from_vector(x)


# ---------------------------------------------------------------------------
# hyperbolic von Mises


@dataclass(frozen=True)
class HyperbolicVonMisesParams:
    """Density proportional to (1 + tanh(eta) cos(psi - phi))^(-alpha_exp).

    ``C`` is the multiplicative-noise constant of the generating model; it
    does not enter the density and is kept for provenance only.
    """

    eta: float = 0.0
    alpha_exp: float = 0.0
    psi: float = 0.0
    C: float = 0.0

    def __post_init__(self):
        e, a, c = float(self.eta), float(self.alpha_exp), float(self.C)
        if not np.isfinite(e) or e < 0:
            raise InvalidParams(f"eta must be >= 0, got {self.eta!r}")
        if not np.isfinite(a):
            raise InvalidParams("alpha_exp must be finite")
        if not abs(c) <= 1.0:
            raise InvalidParams(f"|C| must be <= 1, got {self.C!r}")
        object.__setattr__(self, "eta", e)
        object.__setattr__(self, "alpha_exp", a)
        object.__setattr__(self, "psi", _angle_param(self.psi, "psi"))
        object.__setattr__(self, "C", c)


def _log_base(t, a, theta):
    return -a * np.log1p(t * np.cos(theta))


def hyperbolic_normalizer_log(eta: float, a: float, max_nodes: int = 1 << 20) -> float:
    """log of the integral over the circle of (1 + tanh(eta) cos)^(-a).

    Periodic trapezoid rule with doubling node counts; the integrand is
    analytic and periodic so convergence is geometric.
    """
    t = np.tanh(eta)
    if t == 1.0:
        raise InvalidParams("eta too large: tanh(eta) rounds to 1")
    shift = -a * np.log1p(-t) if a > 0 else -a * np.log1p(t)  # log of the integrand maximum
    prev = None
    m = 64
    while m <= max_nodes:
        theta = 2.0 * np.pi * np.arange(m) / m
        val = (2.0 * np.pi / m) * np.sum(np.exp(_log_base(t, a, theta) - shift))
        if prev is not None and abs(val - prev) <= 1e-14 * val:
            return float(np.log(val) + shift)
        prev = val
        m *= 2
    raise InvalidParams("hyperbolic von Mises normaliser did not converge for these parameters")


def legendre_p(nu: float, x: float) -> float:
    """Legendre function P_nu(x) for x >= 1 via its Laplace integral."""
    if x < 1.0:
        raise InvalidParams("legendre_p is implemented for x >= 1")
    eta = float(np.arccosh(x))
    # P_nu(cosh eta) = cosh(eta)^nu / (2 pi) * integral of (1 + tanh(eta) cos)^nu
    return float(np.exp(hyperbolic_normalizer_log(eta, -nu) + nu * np.log(x)) / (2.0 * np.pi))


def hyperbolic_von_mises_log_density(p: HyperbolicVonMisesParams, phi):
    phi = angles(phi)
    t = np.tanh(p.eta)
    return _log_base(t, p.alpha_exp, p.psi - phi) - hyperbolic_normalizer_log(p.eta, p.alpha_exp)


def hyperbolic_von_mises_sample(p: HyperbolicVonMisesParams, n, rng=None):
    """Rejection from the uniform envelope."""
    n = check_n(n)
    g = rng_of(rng)
    t, a = np.tanh(p.eta), p.alpha_exp
    log_max = -a * np.log1p(-t) if a > 0 else -a * np.log1p(t)
    out = np.empty(0)
    while out.size < n:
        m = max(1024, 2 * (n - out.size))
        phi = g.uniform(0.0, 2.0 * np.pi, m)
        u = g.uniform(0.0, 1.0, m)
        keep = np.log(u) <= _log_base(t, a, p.psi - phi) - log_max
        out = np.concatenate([out, phi[keep]])
    return out[:n]


def _hvm_from_vector(x, C=0.0):
    psi, le, a = x
    return HyperbolicVonMisesParams(float(np.exp(le)), a, psi, C)


def hyperbolic_von_mises_fit(phi, weights=None, C: float = 0.0) -> HyperbolicVonMisesParams:
    """Numerical maximum likelihood over (psi, eta, alpha_exp)."""
    phi = angles(phi).reshape(-1)
    require_spread(phi, 4)
    w = weights_for(phi.size, weights)
    sub = np.arange(phi.size)[:: max(1, phi.size // 5000)]
    ws = w[sub] / w[sub].sum()

    def nll_on(idx, wt):
        def f(x):
            if abs(x[1]) > 6.0 or abs(x[2]) > 200.0:
                return np.inf
            try:
                return -float(wt @ hyperbolic_von_mises_log_density(_hvm_from_vector(x), phi[idx]))
            except InvalidParams:
                return np.inf
        return f

    m, _ = weighted_resultant(phi, w)
    x0s = []
    for a in (-4.0, -1.0, 1.0, 4.0):
        psi0 = m if a < 0 else m + np.pi
        for e in (0.3, 1.2):
            x0s.append([psi0, np.log(e), a])
    x = minimize_nll(nll_on(slice(None), w), x0s, nll_coarse=nll_on(sub, ws))
    return _hvm_from_vector(x, C)
