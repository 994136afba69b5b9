"""Potentials of the consensus models and their Riemannian gradients.

Drift relations (zero frequencies, symmetric K, noise off):

* SO(n) and U(d): dQ_j/dt = N * grad_j V, so V never decreases.
* spheres: dx_j/dt = -N * grad_j V_sph, so V_sph never increases.
* circle: dphi_j/dt - omega = N * dE/dphi_j when beta is antisymmetric
  (beta_ji = -beta_ij, i.e. the complex coupling matrix is Hermitian),
  so E never decreases. A symmetric nonzero beta breaks the gradient
  structure.

Flat gradients hold directional derivatives along an explicit tangent basis
(see ``algebra_basis`` and ``sphere_tangent_basis``), which makes them directly comparable with central
finite differences along the same curves.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import expm

from . import manifold as mf
from .errors import DimensionMismatch, NonHermitian


@dataclass(frozen=True)
class PotentialValue:
    value: float
    gradient: Optional[np.ndarray] = None
    tangent: Optional[np.ndarray] = None  # ambient tangent vectors, one per particle


@dataclass(frozen=True)
class HermitianCouplingMatrix:
    kappa: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.kappa, dtype=complex)
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise DimensionMismatch("kappa must be square")
        if np.max(np.abs(k - k.conj().T), initial=0.0) > 1e-12:
            raise NonHermitian("coupling matrix is not Hermitian")
        k = k.copy()
        k.setflags(write=False)
        object.__setattr__(self, "kappa", k)

    @classmethod
    def from_polar(cls, K, beta):
        return cls(np.asarray(K) * np.exp(1j * np.asarray(beta)))

    @property
    def K(self):
        return np.abs(self.kappa)

    @property
    def beta(self):
        return np.angle(self.kappa)


def _coupling(K, N):
    K = np.asarray(K, dtype=float)
    if K.ndim == 0:
        return np.full((N, N), float(K))
    if K.shape != (N, N):
        raise DimensionMismatch(f"K must be {N}x{N}, got {K.shape}")
    return K


# ---------------------------------------------------------------------------
# tangent bases


def algebra_basis(n: int, complex_: bool = False):
    """Basis of so(n) (or u(n) when complex_) as a stack of matrices."""
    basis = []
    for a in range(n):
        for b in range(a + 1, n):
            E = np.zeros((n, n), dtype=complex if complex_ else float)
            E[a, b], E[b, a] = -1.0, 1.0
            basis.append(E)
    if complex_:
        for a in range(n):
            for b in range(a + 1, n):
                E = np.zeros((n, n), dtype=complex)
                E[a, b] = E[b, a] = 1j
                basis.append(E)
        for a in range(n):
            E = np.zeros((n, n), dtype=complex)
            E[a, a] = 1j
            basis.append(E)
    return np.array(basis)


def sphere_tangent_basis(x) -> np.ndarray:
    """Orthonormal basis (d, d-1) of the tangent space at unit vector x."""
    x = np.asarray(x, dtype=float)
    d = x.size
    # Householder reflection sending e_k to x, k chosen for stability
    k = int(np.argmax(np.abs(x)))
    e = np.zeros(d)
    e[k] = 1.0
    v = x - e if x[k] < 0 else x + e
    H = np.eye(d) - 2.0 * np.outer(v, v) / (v @ v)
    cols = [i for i in range(d) if i != k]
    return H[:, cols]


# ---------------------------------------------------------------------------
# potentials


def _group_potential(states, K, complex_):
    S = np.asarray(states)
    if S.ndim != 3 or S.shape[1] != S.shape[2]:
        raise DimensionMismatch("states must have shape (N, n, n)")
    N, n, _ = S.shape
    K = _coupling(K, N)
    gram = np.einsum("iab,jab->ij", S.conj(), S)  # Tr(Q_i^H Q_j)
    value = float(np.real(np.sum(K * gram))) / (2.0 * N * N)
    E = np.einsum("ij,iab->jab", K, S) / (N * N)  # Euclidean gradient, K symmetric
    Y = np.swapaxes(S.conj(), -1, -2) @ E
    Xi = mf.skew_part(Y)
    tangent = S @ Xi
    basis = algebra_basis(n, complex_)
    # directional derivative along Q_j X equals Re Tr(Y^H X)
    grad = np.real(np.einsum("jab,kab->jk", Y.conj(), basis)).reshape(-1)
    return PotentialValue(value, grad, tangent)


def potential_so(states, K) -> PotentialValue:
    """V = (1/2N^2) sum_ij K_ij Tr(Q_i^T Q_j) on SO(n)^N."""
    return _group_potential(np.asarray(states, dtype=float), K, False)


def potential_u(states, K) -> PotentialValue:
    """V = (1/2N^2) sum_ij K_ij Re Tr(U_i^* U_j) on U(d)^N."""
    return _group_potential(np.asarray(states, dtype=complex), K, True)


def potential_sphere(states, K) -> PotentialValue:
    """V_sph = (1/2N^2) sum_ij K_ij (1 - <x_i, x_j>) on (S^{d-1})^N."""
    X = np.asarray(states, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("states must have shape (N, d)")
    N, d = X.shape
    K = _coupling(K, N)
    G = X @ X.T
    value = float(np.sum(K * (1.0 - G))) / (2.0 * N * N)
    E = -(K.T @ X) / (N * N)
    ip = np.sum(E * X, axis=1, keepdims=True)
    tangent = E - ip * X
    grad = np.concatenate([sphere_tangent_basis(X[j]).T @ tangent[j] for j in range(N)])
    return PotentialValue(value, grad, tangent)


def potential_circle(phases, K, beta=0.0) -> PotentialValue:
    """E = (1/2N^2) sum_ij K_ij cos(phi_i - phi_j - beta_ij)."""
    phi = np.asarray(phases, dtype=float).reshape(-1)
    N = phi.size
    K = _coupling(K, N)
    B = _coupling(beta, N)
    D = phi[:, None] - phi[None, :] - B  # D[i, j]
    value = float(np.sum(K * np.cos(D))) / (2.0 * N * N)
    # dE/dphi_j collects j as the second index (+sin) and as the first (-sin)
    grad = (np.sum(K * np.sin(D), axis=0) - np.sum(K * np.sin(D), axis=1)) / (2.0 * N * N)
    return PotentialValue(value, grad, grad.copy())


def energy_complex(z, kappa) -> float:
    """Hermitian form z^* kappa z; equals 2 N^2 E for kappa_ij = K_ij exp(i beta_ij)."""
    if not isinstance(kappa, HermitianCouplingMatrix):
        kappa = HermitianCouplingMatrix(kappa)
    z = np.asarray(z, dtype=complex).reshape(-1)
    if kappa.kappa.shape != (z.size, z.size):
        raise DimensionMismatch("kappa and z sizes differ")
    return float(np.real(np.conj(z) @ kappa.kappa @ z))


# ---------------------------------------------------------------------------
# finite-difference helpers used by tests and diagnostics


def fd_gradient_group(fun, states, h=1e-5, complex_=False):
    S = np.asarray(states)
    N, n, _ = S.shape
    basis = algebra_basis(n, complex_)
    out = []
    for j in range(N):
        for X in basis:
            plus = S.copy()
            minus = S.copy()
            plus[j] = S[j] @ expm(h * X)
            minus[j] = S[j] @ expm(-h * X)
            out.append((fun(plus) - fun(minus)) / (2.0 * h))
    return np.array(out)


def fd_gradient_sphere(fun, states, h=1e-5):
    X = np.asarray(states, dtype=float)
    out = []
    for j in range(X.shape[0]):
        for b in sphere_tangent_basis(X[j]).T:
            plus = X.copy()
            minus = X.copy()
            plus[j] = (X[j] + h * b) / np.linalg.norm(X[j] + h * b)
            minus[j] = (X[j] - h * b) / np.linalg.norm(X[j] - h * b)
            out.append((fun(plus) - fun(minus)) / (2.0 * h))
    return np.array(out)


def fd_gradient_circle(fun, phases, h=1e-5):
    phi = np.asarray(phases, dtype=float)
    out = []
    for j in range(phi.size):
        p = phi.copy()
        m = phi.copy()
        p[j] += h
        m[j] -= h
        out.append((fun(p) - fun(m)) / (2.0 * h))
    return np.array(out)
