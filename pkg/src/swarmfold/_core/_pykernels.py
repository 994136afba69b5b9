"""Pure numpy integration kernels.

Every function here has a twin of the same name and signature in the
compiled ``_ckernels`` module. Arrays carry a leading batch axis B so that
many independent ensembles can be stepped together.

Method codes: 0 = rk4, 1 = euler, 2 = euler-maruyama.
Phase coupling modes: 0 = pairwise (KcT, KsT are N x N, transposed so that
KcT[j, i] = K_ij cos(beta_ij)), 1 = block (labels, sizes, KcT/KsT are
D x D with KcT[l, k] = K_kl cos(beta_kl)).
"""
import numpy as np

TWO_PI = 2.0 * np.pi


def _canon(phi):
    y = np.fmod(phi, TWO_PI)
    y = np.where(y < 0.0, y + TWO_PI, y)
    return np.where(y >= TWO_PI, y - TWO_PI, y)


def phase_drift(phi, omega, mode, KcT, KsT, labels, sizes):
    c = np.cos(phi)
    s = np.sin(phi)
    if mode == 0:
        N = phi.shape[1]
        a = s @ KcT.T - c @ KsT.T
        b = c @ KcT.T + s @ KsT.T
        return omega + (c * a - s * b) / N
    D = KcT.shape[0]
    B = phi.shape[0]
    Cs = np.zeros((B, D))
    Ss = np.zeros((B, D))
    for k in range(D):
        m = labels == k
        Cs[:, k] = c[:, m].sum(axis=1)
        Ss[:, k] = s[:, m].sum(axis=1)
    kc = KcT[labels]  # (N, D): KcT[l_j, k]
    ks = KsT[labels]
    acc = np.zeros_like(phi)
    for k in range(D):
        sk = Ss[:, k:k + 1]
        ck = Cs[:, k:k + 1]
        acc = acc + (kc[:, k] * (c * sk - s * ck) - ks[:, k] * (s * sk + c * ck)) / sizes[k]
    return omega + acc


def noise_amplitude(phi, C):
    c = np.cos(phi)
    s = np.sin(phi)
    N = phi.shape[1]
    amp = np.zeros_like(phi)
    for i in range(N):
        rad = 1.0 + C * (c[:, i:i + 1] * c + s[:, i:i + 1] * s)
        amp = amp + np.sqrt(np.maximum(rad, 0.0))
    return amp / N


def phase_integrate(phi0, omega, mode, KcT, KsT, labels, sizes, dt, nsteps,
                    record_every, method, noise, noise_scale, mult_c, multiplicative):
    phi = np.array(phi0, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    sizes = np.asarray(sizes, dtype=float)
    nrec = nsteps // record_every if record_every > 0 else 0
    rec = np.empty((nrec,) + phi.shape)
    f = lambda p: phase_drift(p, omega, mode, KcT, KsT, labels, sizes)
    r = 0
    for step in range(nsteps):
        if method == 0:
            k1 = f(phi)
            k2 = f(phi + (0.5 * dt) * k1)
            k3 = f(phi + (0.5 * dt) * k2)
            k4 = f(phi + dt * k3)
            phi = phi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        elif method == 1 or noise is None:
            phi = phi + dt * f(phi)
        else:
            inc = noise_scale * noise[step]
            if multiplicative:
                inc = noise_amplitude(phi, mult_c) * inc
            phi = phi + dt * f(phi) + inc
        phi = _canon(phi)
        if record_every > 0 and (step + 1) % record_every == 0:
            rec[r] = phi
            r += 1
    return phi, rec


def circle_drift(z, omega, K, beta):
    N = z.shape[1]
    f = (1j * K / (2.0 * N)) * np.exp(1j * beta) * np.conj(z.sum(axis=1, keepdims=True))
    return 1j * (f * z * z + omega * z + np.conj(f))


def circle_integrate(z0, omega, K, beta, dt, nsteps, record_every):
    z = np.array(z0, dtype=complex)
    nrec = nsteps // record_every if record_every > 0 else 0
    rec = np.empty((nrec,) + z.shape, dtype=complex)
    f = lambda u: circle_drift(u, omega, K, beta)
    r = 0
    for step in range(nsteps):
        k1 = f(z)
        k2 = f(z + (0.5 * dt) * k1)
        k3 = f(z + (0.5 * dt) * k2)
        k4 = f(z + dt * k3)
        z = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        z = z / np.abs(z)
        if record_every > 0 and (step + 1) % record_every == 0:
            rec[r] = z
            r += 1
    return z, rec


def sphere_coupling(X, mode, KT, labels, sizes, Q):
    """Coupling field f_j for every particle; X has shape (B, N, d)."""
    if mode == 0:
        N = X.shape[1]
        return np.einsum("ji,bid->bjd", KT, X) / N
    D = KT.shape[0]
    M = np.stack([X[:, labels == k, :].sum(axis=1) for k in range(D)], axis=1)  # (B, D, d)
    F = np.zeros_like(M)
    for l in range(D):
        acc = np.zeros_like(M[:, 0, :])
        for k in range(D):
            acc = acc + (KT[l, k] / sizes[k]) * (M[:, k, :] @ Q[k, l].T)
        F[:, l, :] = acc / D
    return F[:, labels, :]


def sphere_drift(X, A, mode, KT, labels, sizes, Q):
    F = sphere_coupling(X, mode, KT, labels, sizes, Q)
    ip = np.sum(X * F, axis=2, keepdims=True)
    return X @ A.T + F - ip * X


def _normalize_rows(X):
    return X / np.linalg.norm(X, axis=-1, keepdims=True)


def sphere_integrate(X0, A, mode, KT, labels, sizes, Q, dt, nsteps, record_every,
                     method, noise, noise_scale):
    X = np.array(X0, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    sizes = np.asarray(sizes, dtype=float)
    nrec = nsteps // record_every if record_every > 0 else 0
    rec = np.empty((nrec,) + X.shape)
    f = lambda Y: sphere_drift(Y, A, mode, KT, labels, sizes, Q)
    r = 0
    for step in range(nsteps):
        if method == 0:
            k1 = f(X)
            k2 = f(X + (0.5 * dt) * k1)
            k3 = f(X + (0.5 * dt) * k2)
            k4 = f(X + dt * k3)
            X = X + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        elif method == 1 or noise is None:
            X = X + dt * f(X)
        else:
            xi = noise_scale * noise[step]
            ip = np.sum(X * xi, axis=2, keepdims=True)
            X = X + dt * f(X) + (xi - ip * X)
        X = _normalize_rows(X)
        if record_every > 0 and (step + 1) % record_every == 0:
            rec[r] = X
            r += 1
    return X, rec


def csphere_drift(Z, H, mode, KT, Kglob):
    N = Z.shape[1]
    if mode == 0:
        G = np.einsum("ji,bim->bjm", KT, Z) / N
    else:
        G = (Kglob / N) * Z.sum(axis=1, keepdims=True) * np.ones((1, N, 1))
    ip = np.sum(Z * np.conj(G), axis=2, keepdims=True)
    return Z @ H.T + G - ip * Z


def csphere_integrate(Z0, H, mode, KT, Kglob, dt, nsteps, record_every):
    Z = np.array(Z0, dtype=complex)
    nrec = nsteps // record_every if record_every > 0 else 0
    rec = np.empty((nrec,) + Z.shape, dtype=complex)
    f = lambda Y: csphere_drift(Y, H, mode, KT, Kglob)
    r = 0
    for step in range(nsteps):
        k1 = f(Z)
        k2 = f(Z + (0.5 * dt) * k1)
        k3 = f(Z + (0.5 * dt) * k2)
        k4 = f(Z + dt * k3)
        Z = Z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        Z = _normalize_rows(Z)
        if record_every > 0 and (step + 1) % record_every == 0:
            rec[r] = Z
            r += 1
    return Z, rec


def _ct(M):
    return np.swapaxes(np.conj(M), -1, -2)


def matrix_generator(Q, J, KT):
    """Right-invariant velocity Omega_j with dQ_j/dt = Omega_j Q_j."""
    N = Q.shape[1]
    S = np.einsum("ji,bikl->bjkl", KT, Q)
    return J + (S @ _ct(Q) - Q @ _ct(S)) / (2.0 * N)


def matrix_drift(Q, J, KT):
    return matrix_generator(Q, J, KT) @ Q


def project_group(Q, tol=1e-12, max_iter=6):
    """Newton-Schulz polar iteration applied to matrices whose residual exceeds tol."""
    n = Q.shape[-1]
    eye = np.eye(n)
    for _ in range(max_iter):
        G = _ct(Q) @ Q - eye
        res = np.sqrt(np.sum(np.abs(G) ** 2, axis=(-2, -1)))
        bad = res > tol
        if not np.any(bad):
            break
        Qn = Q @ (1.5 * eye - 0.5 * (_ct(Q) @ Q))
        Q = np.where(bad[..., None, None], Qn, Q)
    return Q


def matrix_integrate(Q0, J, KT, dt, nsteps, record_every):
    Q = np.array(Q0)
    nrec = nsteps // record_every if record_every > 0 else 0
    rec = np.empty((nrec,) + Q.shape, dtype=Q.dtype)
    f = lambda P: matrix_drift(P, J, KT)
    r = 0
    for step in range(nsteps):
        k1 = f(Q)
        k2 = f(Q + (0.5 * dt) * k1)
        k3 = f(Q + (0.5 * dt) * k2)
        k4 = f(Q + dt * k3)
        Q = Q + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        Q = project_group(Q)
        if record_every > 0 and (step + 1) % record_every == 0:
            rec[r] = Q
            r += 1
    return Q, rec
