"""Cauchy-type family on the complex sphere S^{2m-1} in C^m.

The density is the Poisson-Szego kernel of the complex unit ball,

    p(zeta) = Gamma(m) / (2 pi^m) * (1 - |w|^2)^m / |1 - <zeta, w>|^{2m},

with <a, b> = sum a_k conj(b_k). It is the law of phi_w(U) for U uniform,
where phi_w is the involutive ball automorphism exchanging 0 and w.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ..errors import InvalidParams
from ._common import check_n, require_spread, rng_of, sphere_points, weights_for
from ._mle import minimize_nll


@dataclass(frozen=True)
class BergmanSphericalCauchyParams:
    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=complex).reshape(-1)
        if w.size < 1 or not np.all(np.isfinite(w)) or np.linalg.norm(w) >= 1.0:
            raise InvalidParams("w must be a finite complex vector with norm < 1")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def m(self):
        return self.w.size


def inner(a, b):
    return np.sum(np.asarray(a) * np.conj(b), axis=-1)


def ball_automorphism(a, z):
    """phi_a(z) = (a - P_a z - s_a Q_a z) / (1 - <z, a>), an involution of the ball."""
    a = np.asarray(a, dtype=complex)
    z = np.asarray(z, dtype=complex)
    aa = float(np.real(inner(a, a)))
    za = inner(z, a)
    if aa == 0.0:
        return -z
    Pz = (za / aa)[..., None] * a
    Qz = z - Pz
    s = np.sqrt(1.0 - aa)
    return (a - Pz - s * Qz) / (1.0 - za)[..., None]


def uniform_complex_sphere(n, m, rng=None):
    g = rng_of(rng)
    z = g.standard_normal((check_n(n), m)) + 1j * g.standard_normal((n, m))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def bergman_log_density(p: BergmanSphericalCauchyParams, zeta):
    zeta = sphere_points(zeta, p.m, complex_=True)
    m = p.m
    ww = float(np.real(inner(p.w, p.w)))
    return (gammaln(m) - np.log(2.0) - m * np.log(np.pi) + m * np.log1p(-ww)
            - 2.0 * m * np.log(np.abs(1.0 - inner(zeta, p.w))))


def bergman_sample(p: BergmanSphericalCauchyParams, n, rng=None):
    z = ball_automorphism(p.w, uniform_complex_sphere(n, p.m, rng))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _to_w(x, m):
    v = x[:m] + 1j * x[m:]
    r = np.linalg.norm(v)
    return v * (np.tanh(r) / r) if r > 0 else v


def _from_w(w):
    r = np.linalg.norm(w)
    v = w * (np.arctanh(r) / r) if r > 0 else w
    return np.concatenate([v.real, v.imag])


def bergman_fit(zeta, weights=None) -> BergmanSphericalCauchyParams:
    """Maximum likelihood started from the sample mean (which is unbiased for w)."""
    zeta = sphere_points(zeta, complex_=True)
    n, m = zeta.shape
    require_spread(zeta, 2 * m + 1)
    wt = weights_for(n, weights)
    mean = wt @ zeta
    r = np.linalg.norm(mean)
    if r >= 0.999:
        mean = mean * (0.999 / r)

    def nll(x):
        w = _to_w(x, m)
        if np.linalg.norm(w) >= 1.0:
            return np.inf
        return -float(wt @ bergman_log_density(BergmanSphericalCauchyParams(w), zeta))

    x = minimize_nll(nll, [_from_w(mean)])
    return BergmanSphericalCauchyParams(_to_w(x, m))
