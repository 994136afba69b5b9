"""Directional-statistics families with densities, samplers, fitters and group pushforwards.

Generic entry points dispatch on the parameter type::

    p = WrappedCauchyParams.from_polar(0.5, 1.0)
    x = sample(p, 1000, rng=3)
    q = fit("wrapped-cauchy", x)
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import manifold as mf
from ..errors import InvalidParams
from ._common import check_n, rng_of
from .bergman import (BergmanSphericalCauchyParams, ball_automorphism, bergman_fit,
                      bergman_log_density, bergman_sample, uniform_complex_sphere)
from .circle import (HyperbolicVonMisesParams, KatoJonesParams, VonMisesParams,
                     WrappedCauchyParams, hyperbolic_normalizer_log, hyperbolic_von_mises_fit,
                     hyperbolic_von_mises_log_density, hyperbolic_von_mises_sample,
                     invert_bessel_ratio, kato_jones_fit, kato_jones_log_density,
                     kato_jones_sample, legendre_p, von_mises_fit, von_mises_log_density,
                     von_mises_sample, wrapped_cauchy_fit, wrapped_cauchy_log_density,
                     wrapped_cauchy_sample)
from .sphere import (BinghamParams, SphericalCauchyParams, VonMisesFisherParams,
                     bingham_fit, bingham_log_density, bingham_log_normalizer,
                     bingham_normalizer, bingham_sample, log_sphere_area,
                     spherical_cauchy_fit, spherical_cauchy_log_density,
                     spherical_cauchy_sample, uniform_sphere, vmf_fit, vmf_log_density,
                     vmf_sample)


@dataclass(frozen=True)
class HypDiscRadialParams:
    """Fixed radial law p(r) = 2 sinh r / (e + 1/e - 2) on hyperbolic radius r in [0, 1]."""


FAMILIES = {
    "von-mises": (VonMisesParams, von_mises_log_density, von_mises_sample, von_mises_fit),
    "wrapped-cauchy": (WrappedCauchyParams, wrapped_cauchy_log_density, wrapped_cauchy_sample,
                       wrapped_cauchy_fit),
    "kato-jones": (KatoJonesParams, kato_jones_log_density, kato_jones_sample, kato_jones_fit),
    "hyperbolic-von-mises": (HyperbolicVonMisesParams, hyperbolic_von_mises_log_density,
                             hyperbolic_von_mises_sample, hyperbolic_von_mises_fit),
    "vmf": (VonMisesFisherParams, vmf_log_density, vmf_sample, vmf_fit),
    "spherical-cauchy": (SphericalCauchyParams, spherical_cauchy_log_density,
                         spherical_cauchy_sample, spherical_cauchy_fit),
    "bergman-cauchy": (BergmanSphericalCauchyParams, bergman_log_density, bergman_sample,
                       bergman_fit),
    "bingham": (BinghamParams, bingham_log_density, bingham_sample, bingham_fit),
}
CIRCLE_FAMILIES = ("von-mises", "wrapped-cauchy", "kato-jones", "hyperbolic-von-mises")


def family_of(params) -> str:
    for name, (cls, *_rest) in FAMILIES.items():
        if isinstance(params, cls):
            return name
    raise InvalidParams(f"unknown parameter type {type(params).__name__}")


def log_density(params, x):
    return FAMILIES[family_of(params)][1](params, x)


def density(params, x):
    return np.exp(log_density(params, x))


def sample(params, n, rng=None):
    """n points drawn from params; deterministic for an integer seed."""
    return FAMILIES[family_of(params)][2](params, n, rng)


def fit(family: str, points, weights=None):
    if family not in FAMILIES:
        raise InvalidParams(f"unknown family {family!r}; choose from {sorted(FAMILIES)}")
    return FAMILIES[family][3](points, weights)


def log_likelihood(params, points, weights=None) -> float:
    ll = log_density(params, points)
    if weights is None:
        return float(np.mean(ll))
    w = np.asarray(weights, dtype=float)
    return float(w @ ll / w.sum())


def params_to_dict(params) -> dict:
    fam = family_of(params)
    if isinstance(params, VonMisesParams):
        body = {"mu": params.mu, "kappa": params.kappa}
    elif isinstance(params, WrappedCauchyParams):
        body = {"alpha": params.alpha, "r": params.r, "phi": params.phi}
    elif isinstance(params, KatoJonesParams):
        body = {"mu": params.mu, "nu": params.nu, "r": params.r, "kappa": params.kappa,
                "gamma": params.gamma, "eta": params.eta, "xi": params.xi}
    elif isinstance(params, HyperbolicVonMisesParams):
        body = {"eta": params.eta, "alpha_exp": params.alpha_exp, "psi": params.psi, "C": params.C}
    elif isinstance(params, VonMisesFisherParams):
        body = {"mu": params.mu, "kappa": params.kappa}
    elif isinstance(params, SphericalCauchyParams):
        body = {"zeta": params.zeta, "rho": params.rho}
    elif isinstance(params, BergmanSphericalCauchyParams):
        body = {"w": params.w}
    else:
        body = {"M": params.M, "Z": params.Z}
    return {"family": fam, "params": body}


def fit_report(family: str, points, weights=None) -> dict:
    """Fitted parameters with the mean log-likelihood, ready for JSON output."""
    p = fit(family, points, weights)
    out = params_to_dict(p)
    out["log_likelihood"] = log_likelihood(p, points, weights)
    out["n"] = int(np.asarray(points).shape[0])
    return out


# ---------------------------------------------------------------------------
# group pushforwards


def pushforward_moebius(params, g: mf.MoebiusMap):
    """Law of g(x) for x ~ params (wrapped Cauchy, Kato-Jones or von Mises).

    Wrapped Cauchy parameters move as points of the disc, alpha -> g(alpha);
    Kato-Jones parameters compose the carrying Moebius map with g.
    """
    if isinstance(params, WrappedCauchyParams):
        return WrappedCauchyParams(complex(g(params.alpha)))
    if isinstance(params, VonMisesParams):
        params = KatoJonesParams(params.mu, 0.0, 0.0, params.kappa)
    if isinstance(params, KatoJonesParams):
        return KatoJonesParams.from_moebius(mf.moebius_compose(g, params.moebius_map()), params.kappa)
    raise InvalidParams("pushforward_moebius needs circle parameters")


def pushforward_ball_isometry(params: SphericalCauchyParams, q: mf.BallIsometry) -> SphericalCauchyParams:
    """Law of q(x) for x ~ spherical Cauchy(zeta): spherical Cauchy(q(zeta))."""
    if not isinstance(params, SphericalCauchyParams):
        raise InvalidParams("pushforward_ball_isometry needs spherical Cauchy parameters")
    if q.dim != params.d:
        raise InvalidParams(f"isometry dimension {q.dim} != {params.d}")
    return SphericalCauchyParams(q(params.zeta))


def push_samples_moebius(g: mf.MoebiusMap, phi):
    return mf.canonical_angle(np.angle(g(np.exp(1j * np.asarray(phi, dtype=float)))))


def push_samples_ball(q: mf.BallIsometry, x):
    y = q(np.asarray(x, dtype=float))
    return y / np.linalg.norm(y, axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# hyperbolic disc

_COSH1M1 = np.cosh(1.0) - 1.0


def hyperbolic_radial_cdf(r):
    """(cosh r - 1)/(cosh 1 - 1) on [0, 1]."""
    r = np.clip(np.asarray(r, dtype=float), 0.0, 1.0)
    return (np.cosh(r) - 1.0) / _COSH1M1


def sample_hyperbolic_disc(n, rng=None, return_radius: bool = False):
    """Points of the Poincare disc, shape (n, 2), with hyperbolic radius density 2 sinh r/(e + 1/e - 2).

    The angle is uniform; the radius is drawn by inverting its CDF and
    placed at Euclidean radius tanh(r/2).
    """
    n = check_n(n)
    g = rng_of(rng)
    theta = g.uniform(0.0, 2.0 * np.pi, n)
    u = g.uniform(0.0, 1.0, n)
    r = np.arccosh(1.0 + u * _COSH1M1)
    rho = np.tanh(0.5 * r)
    pts = np.column_stack([rho * np.cos(theta), rho * np.sin(theta)])
    return (pts, r) if return_radius else pts


__all__ = [
    "BergmanSphericalCauchyParams", "BinghamParams", "CIRCLE_FAMILIES", "FAMILIES",
    "HypDiscRadialParams", "HyperbolicVonMisesParams", "KatoJonesParams",
    "SphericalCauchyParams", "VonMisesFisherParams", "VonMisesParams", "WrappedCauchyParams",
    "ball_automorphism", "bingham_log_normalizer", "bingham_normalizer", "density", "family_of",
    "fit", "fit_report", "hyperbolic_normalizer_log", "hyperbolic_radial_cdf", "invert_bessel_ratio",
    "legendre_p", "log_density", "log_likelihood", "log_sphere_area", "params_to_dict",
    "push_samples_ball", "push_samples_moebius", "pushforward_ball_isometry", "pushforward_moebius",
    "sample", "sample_hyperbolic_disc", "uniform_complex_sphere", "uniform_sphere",
]
