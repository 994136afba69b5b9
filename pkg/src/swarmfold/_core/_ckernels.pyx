# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration kernels; same names and signatures as _pykernels."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, sqrt, fmod, M_PI

cnp.import_array()

cdef double TWO_PI = 2.0 * M_PI

ctypedef fused scalar:
    double
    double complex


cdef inline double _canon(double x) noexcept nogil:
    cdef double y = fmod(x, TWO_PI)
    if y < 0.0:
        y = y + TWO_PI
    if y >= TWO_PI:
        y = y - TWO_PI
    return y


cdef inline double _abs2(double complex z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


cdef inline scalar _conj(scalar x) noexcept nogil:
    if scalar is double:
        return x
    else:
        return x.real - 1j * x.imag


# ---------------------------------------------------------------------------
# phase oscillators

cdef void _phase_drift_row(const double* phi, Py_ssize_t N, double omega, int mode,
                           const double[:, ::1] KcT, const double[:, ::1] KsT,
                           const cnp.int64_t[::1] labels, const double[::1] sizes,
                           double* c, double* s, double* Cs, double* Ss,
                           double* out) noexcept nogil:
    cdef Py_ssize_t i, j, k, l, D
    cdef double a, b, acc, cj, sj
    for i in range(N):
        c[i] = cos(phi[i])
        s[i] = sin(phi[i])
    if mode == 0:
        for j in range(N):
            a = 0.0
            b = 0.0
            for i in range(N):
                a = a + (KcT[j, i] * s[i] - KsT[j, i] * c[i])
                b = b + (KcT[j, i] * c[i] + KsT[j, i] * s[i])
            out[j] = omega + (c[j] * a - s[j] * b) / N
    else:
        D = KcT.shape[0]
        for k in range(D):
            Cs[k] = 0.0
            Ss[k] = 0.0
        for i in range(N):
            k = labels[i]
            Cs[k] = Cs[k] + c[i]
            Ss[k] = Ss[k] + s[i]
        for j in range(N):
            l = labels[j]
            cj = c[j]
            sj = s[j]
            acc = 0.0
            for k in range(D):
                acc = acc + (KcT[l, k] * (cj * Ss[k] - sj * Cs[k])
                             - KsT[l, k] * (sj * Ss[k] + cj * Cs[k])) / sizes[k]
            out[j] = omega + acc


cdef void _noise_amp_row(const double* phi, Py_ssize_t N, double C, double* c, double* s,
                         double* amp) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double rad, acc
    for i in range(N):
        c[i] = cos(phi[i])
        s[i] = sin(phi[i])
    for j in range(N):
        acc = 0.0
        for i in range(N):
            rad = 1.0 + C * (c[i] * c[j] + s[i] * s[j])
            if rad < 0.0:
                rad = 0.0
            acc = acc + sqrt(rad)
        amp[j] = acc / N


def phase_drift(double[:, ::1] phi, double omega, int mode, double[:, ::1] KcT,
                double[:, ::1] KsT, cnp.int64_t[::1] labels, double[::1] sizes):
    cdef Py_ssize_t B = phi.shape[0], N = phi.shape[1], D = KcT.shape[0], bi
    out = np.empty((B, N))
    cdef double[:, ::1] o = out
    cdef double[::1] c = np.empty(N), s = np.empty(N), Cs = np.empty(D), Ss = np.empty(D)
    with nogil:
        for bi in range(B):
            _phase_drift_row(&phi[bi, 0], N, omega, mode, KcT, KsT, labels, sizes,
                             &c[0], &s[0], &Cs[0], &Ss[0], &o[bi, 0])
    return out


def noise_amplitude(double[:, ::1] phi, double C):
    cdef Py_ssize_t B = phi.shape[0], N = phi.shape[1], bi
    out = np.empty((B, N))
    cdef double[:, ::1] o = out
    cdef double[::1] c = np.empty(N), s = np.empty(N)
    with nogil:
        for bi in range(B):
            _noise_amp_row(&phi[bi, 0], N, C, &c[0], &s[0], &o[bi, 0])
    return out


def phase_integrate(phi0, double omega, int mode, double[:, ::1] KcT, double[:, ::1] KsT,
                    labels_in, sizes_in, double dt, Py_ssize_t nsteps,
                    Py_ssize_t record_every, int method, noise, double noise_scale,
                    double mult_c, bint multiplicative):
    phi_arr = np.array(phi0, dtype=np.float64, order="C")
    cdef double[:, ::1] phi = phi_arr
    cdef cnp.int64_t[::1] labels = np.ascontiguousarray(labels_in, dtype=np.int64)
    cdef double[::1] sizes = np.ascontiguousarray(sizes_in, dtype=np.float64)
    cdef Py_ssize_t B = phi.shape[0], N = phi.shape[1], D = KcT.shape[0]
    cdef Py_ssize_t nrec = nsteps // record_every if record_every > 0 else 0
    rec_arr = np.empty((nrec, B, N))
    cdef double[:, :, ::1] rec = rec_arr
    cdef double[:, :, ::1] xi
    cdef bint has_noise = noise is not None and method == 2
    if has_noise:
        xi = np.ascontiguousarray(noise, dtype=np.float64)
    cdef double[::1] c = np.empty(N), s = np.empty(N), Cs = np.empty(max(D, 1)), Ss = np.empty(max(D, 1))
    cdef double[::1] k1 = np.empty(N), k2 = np.empty(N), k3 = np.empty(N), k4 = np.empty(N)
    cdef double[::1] tmp = np.empty(N), amp = np.empty(N)
    cdef Py_ssize_t step, bi, j, r = 0
    cdef double h = 0.5 * dt, sixth = dt / 6.0, inc
    with nogil:
        for step in range(nsteps):
            for bi in range(B):
                if method == 0:
                    _phase_drift_row(&phi[bi, 0], N, omega, mode, KcT, KsT, labels, sizes,
                                     &c[0], &s[0], &Cs[0], &Ss[0], &k1[0])
                    for j in range(N):
                        tmp[j] = phi[bi, j] + h * k1[j]
                    _phase_drift_row(&tmp[0], N, omega, mode, KcT, KsT, labels, sizes,
                                     &c[0], &s[0], &Cs[0], &Ss[0], &k2[0])
                    for j in range(N):
                        tmp[j] = phi[bi, j] + h * k2[j]
                    _phase_drift_row(&tmp[0], N, omega, mode, KcT, KsT, labels, sizes,
                                     &c[0], &s[0], &Cs[0], &Ss[0], &k3[0])
                    for j in range(N):
                        tmp[j] = phi[bi, j] + dt * k3[j]
                    _phase_drift_row(&tmp[0], N, omega, mode, KcT, KsT, labels, sizes,
                                     &c[0], &s[0], &Cs[0], &Ss[0], &k4[0])
                    for j in range(N):
                        phi[bi, j] = _canon(phi[bi, j] + sixth * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
                else:
                    _phase_drift_row(&phi[bi, 0], N, omega, mode, KcT, KsT, labels, sizes,
                                     &c[0], &s[0], &Cs[0], &Ss[0], &k1[0])
                    if has_noise:
                        if multiplicative:
                            _noise_amp_row(&phi[bi, 0], N, mult_c, &c[0], &s[0], &amp[0])
                        for j in range(N):
                            inc = noise_scale * xi[step, bi, j]
                            if multiplicative:
                                inc = amp[j] * inc
                            phi[bi, j] = _canon(phi[bi, j] + dt * k1[j] + inc)
                    else:
                        for j in range(N):
                            phi[bi, j] = _canon(phi[bi, j] + dt * k1[j])
            if record_every > 0 and (step + 1) % record_every == 0:
                rec[r, :, :] = phi
                r = r + 1
    return phi_arr, rec_arr


# ---------------------------------------------------------------------------
# global circle model in Riccati form

cdef void _circle_drift_row(const double complex* z, Py_ssize_t N, double omega,
                            double complex pref, double complex* out) noexcept nogil:
    cdef Py_ssize_t j
    cdef double complex tot = 0.0, f, fc
    for j in range(N):
        tot = tot + z[j]
    f = pref * (tot.real - 1j * tot.imag)
    fc = f.real - 1j * f.imag
    for j in range(N):
        out[j] = 1j * (f * z[j] * z[j] + omega * z[j] + fc)


def circle_drift(double complex[:, ::1] z, double omega, double K, double beta):
    cdef Py_ssize_t B = z.shape[0], N = z.shape[1], bi
    out = np.empty((B, N), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef double complex pref = (1j * K / (2.0 * N)) * (cos(beta) + 1j * sin(beta))
    for bi in range(B):
        _circle_drift_row(&z[bi, 0], N, omega, pref, &o[bi, 0])
    return out


def circle_integrate(z0, double omega, double K, double beta, double dt,
                     Py_ssize_t nsteps, Py_ssize_t record_every):
    z_arr = np.array(z0, dtype=np.complex128, order="C")
    cdef double complex[:, ::1] z = z_arr
    cdef Py_ssize_t B = z.shape[0], N = z.shape[1]
    cdef Py_ssize_t nrec = nsteps // record_every if record_every > 0 else 0
    rec_arr = np.empty((nrec, B, N), dtype=np.complex128)
    cdef double complex[:, :, ::1] rec = rec_arr
    cdef double complex[::1] k1 = np.empty(N, np.complex128), k2 = np.empty(N, np.complex128)
    cdef double complex[::1] k3 = np.empty(N, np.complex128), k4 = np.empty(N, np.complex128)
    cdef double complex[::1] tmp = np.empty(N, np.complex128)
    cdef double complex pref = (1j * K / (2.0 * N)) * (cos(beta) + 1j * sin(beta))
    cdef double complex w
    cdef Py_ssize_t step, bi, j, r = 0
    cdef double h = 0.5 * dt, sixth = dt / 6.0, nrm
    with nogil:
        for step in range(nsteps):
            for bi in range(B):
                _circle_drift_row(&z[bi, 0], N, omega, pref, &k1[0])
                for j in range(N):
                    tmp[j] = z[bi, j] + h * k1[j]
                _circle_drift_row(&tmp[0], N, omega, pref, &k2[0])
                for j in range(N):
                    tmp[j] = z[bi, j] + h * k2[j]
                _circle_drift_row(&tmp[0], N, omega, pref, &k3[0])
                for j in range(N):
                    tmp[j] = z[bi, j] + dt * k3[j]
                _circle_drift_row(&tmp[0], N, omega, pref, &k4[0])
                for j in range(N):
                    w = z[bi, j] + sixth * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
                    nrm = sqrt(_abs2(w))
                    z[bi, j] = w / nrm
            if record_every > 0 and (step + 1) % record_every == 0:
                rec[r, :, :] = z
                r = r + 1
    return z_arr, rec_arr


# ---------------------------------------------------------------------------
# real sphere

cdef void _sphere_drift_row(const double* X, Py_ssize_t N, Py_ssize_t d,
                            const double[:, ::1] A, int mode, const double[:, ::1] KT,
                            const cnp.int64_t[::1] labels, const double[::1] sizes,
                            const double[:, :, :, ::1] Q, double* M, double* F,
                            double* out) noexcept nogil:
    # M: D*d block sums, F: N*d (pairwise) or D*d (block) coupling
    cdef Py_ssize_t i, j, k, l, a, b, D
    cdef double acc, ip, w
    if mode == 0:
        for j in range(N):
            for a in range(d):
                F[j * d + a] = 0.0
            for i in range(N):
                w = KT[j, i]
                if w != 0.0:
                    for a in range(d):
                        F[j * d + a] = F[j * d + a] + w * X[i * d + a]
            for a in range(d):
                F[j * d + a] = F[j * d + a] / N
    else:
        D = KT.shape[0]
        for k in range(D * d):
            M[k] = 0.0
        for i in range(N):
            k = labels[i]
            for a in range(d):
                M[k * d + a] = M[k * d + a] + X[i * d + a]
        for l in range(D):
            for a in range(d):
                acc = 0.0
                for k in range(D):
                    w = 0.0
                    for b in range(d):
                        w = w + Q[k, l, a, b] * M[k * d + b]
                    acc = acc + (KT[l, k] / sizes[k]) * w
                F[l * d + a] = acc / D
    for j in range(N):
        if mode == 0:
            l = j
        else:
            l = labels[j]
        ip = 0.0
        for a in range(d):
            ip = ip + X[j * d + a] * F[l * d + a]
        for a in range(d):
            acc = 0.0
            for b in range(d):
                acc = acc + A[a, b] * X[j * d + b]
            out[j * d + a] = acc + F[l * d + a] - ip * X[j * d + a]


def sphere_drift(double[:, :, ::1] X, double[:, ::1] A, int mode, double[:, ::1] KT,
                 labels_in, sizes_in, double[:, :, :, ::1] Q):
    cdef cnp.int64_t[::1] labels = np.ascontiguousarray(labels_in, dtype=np.int64)
    cdef double[::1] sizes = np.ascontiguousarray(sizes_in, dtype=np.float64)
    cdef Py_ssize_t B = X.shape[0], N = X.shape[1], d = X.shape[2], bi
    out = np.empty((B, N, d))
    cdef double[:, :, ::1] o = out
    cdef double[::1] M = np.empty(max(KT.shape[0], 1) * d), F = np.empty(max(N, KT.shape[0]) * d)
    for bi in range(B):
        _sphere_drift_row(&X[bi, 0, 0], N, d, A, mode, KT, labels, sizes, Q, &M[0], &F[0], &o[bi, 0, 0])
    return out


cdef inline void _renorm(double* x, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t a
    cdef double n = 0.0
    for a in range(d):
        n = n + x[a] * x[a]
    n = sqrt(n)
    for a in range(d):
        x[a] = x[a] / n


def sphere_integrate(X0, double[:, ::1] A, int mode, double[:, ::1] KT, labels_in, sizes_in,
                     double[:, :, :, ::1] Q, double dt, Py_ssize_t nsteps,
                     Py_ssize_t record_every, int method, noise, double noise_scale):
    X_arr = np.array(X0, dtype=np.float64, order="C")
    cdef double[:, :, ::1] X = X_arr
    cdef cnp.int64_t[::1] labels = np.ascontiguousarray(labels_in, dtype=np.int64)
    cdef double[::1] sizes = np.ascontiguousarray(sizes_in, dtype=np.float64)
    cdef Py_ssize_t B = X.shape[0], N = X.shape[1], d = X.shape[2], nd = N * X.shape[2]
    cdef Py_ssize_t nrec = nsteps // record_every if record_every > 0 else 0
    rec_arr = np.empty((nrec, B, N, d))
    cdef double[:, :, :, ::1] rec = rec_arr
    cdef double[:, :, :, ::1] xi
    cdef bint has_noise = noise is not None and method == 2
    if has_noise:
        xi = np.ascontiguousarray(noise, dtype=np.float64)
    cdef double[::1] M = np.empty(max(KT.shape[0], 1) * d), F = np.empty(max(N, KT.shape[0]) * d)
    cdef double[::1] k1 = np.empty(nd), k2 = np.empty(nd), k3 = np.empty(nd), k4 = np.empty(nd)
    cdef double[::1] tmp = np.empty(nd)
    cdef Py_ssize_t step, bi, j, a, p, r = 0
    cdef double h = 0.5 * dt, sixth = dt / 6.0, ip
    cdef double* x
    with nogil:
        for step in range(nsteps):
            for bi in range(B):
                x = &X[bi, 0, 0]
                _sphere_drift_row(x, N, d, A, mode, KT, labels, sizes, Q, &M[0], &F[0], &k1[0])
                if method == 0:
                    for p in range(nd):
                        tmp[p] = x[p] + h * k1[p]
                    _sphere_drift_row(&tmp[0], N, d, A, mode, KT, labels, sizes, Q, &M[0], &F[0], &k2[0])
                    for p in range(nd):
                        tmp[p] = x[p] + h * k2[p]
                    _sphere_drift_row(&tmp[0], N, d, A, mode, KT, labels, sizes, Q, &M[0], &F[0], &k3[0])
                    for p in range(nd):
                        tmp[p] = x[p] + dt * k3[p]
                    _sphere_drift_row(&tmp[0], N, d, A, mode, KT, labels, sizes, Q, &M[0], &F[0], &k4[0])
                    for p in range(nd):
                        x[p] = x[p] + sixth * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p])
                elif has_noise:
                    for j in range(N):
                        ip = 0.0
                        for a in range(d):
                            ip = ip + x[j * d + a] * (noise_scale * xi[step, bi, j, a])
                        for a in range(d):
                            tmp[j * d + a] = x[j * d + a] + dt * k1[j * d + a] + (
                                noise_scale * xi[step, bi, j, a] - ip * x[j * d + a])
                    for p in range(nd):
                        x[p] = tmp[p]
                else:
                    for p in range(nd):
                        x[p] = x[p] + dt * k1[p]
                for j in range(N):
                    _renorm(&x[j * d], d)
            if record_every > 0 and (step + 1) % record_every == 0:
                rec[r, :, :, :] = X
                r = r + 1
    return X_arr, rec_arr


# ---------------------------------------------------------------------------
# complex sphere

cdef void _csphere_drift_row(const double complex* Z, Py_ssize_t N, Py_ssize_t m,
                             const double complex[:, ::1] H, int mode, const double[:, ::1] KT,
                             double Kglob, double complex* G, double complex* out) noexcept nogil:
    cdef Py_ssize_t i, j, a, b, l
    cdef double complex acc, ip
    cdef double w
    if mode == 0:
        for j in range(N):
            for a in range(m):
                G[j * m + a] = 0.0
            for i in range(N):
                w = KT[j, i]
                if w != 0.0:
                    for a in range(m):
                        G[j * m + a] = G[j * m + a] + w * Z[i * m + a]
            for a in range(m):
                G[j * m + a] = G[j * m + a] / N
    else:
        for a in range(m):
            acc = 0.0
            for i in range(N):
                acc = acc + Z[i * m + a]
            G[a] = (Kglob / N) * acc
    for j in range(N):
        l = j if mode == 0 else 0
        ip = 0.0
        for a in range(m):
            ip = ip + Z[j * m + a] * (G[l * m + a].real - 1j * G[l * m + a].imag)
        for a in range(m):
            acc = 0.0
            for b in range(m):
                acc = acc + H[a, b] * Z[j * m + b]
            out[j * m + a] = acc + G[l * m + a] - ip * Z[j * m + a]


def csphere_drift(double complex[:, :, ::1] Z, double complex[:, ::1] H, int mode,
                  double[:, ::1] KT, double Kglob):
    cdef Py_ssize_t B = Z.shape[0], N = Z.shape[1], m = Z.shape[2], bi
    out = np.empty((B, N, m), dtype=np.complex128)
    cdef double complex[:, :, ::1] o = out
    cdef double complex[::1] G = np.empty(N * m, np.complex128)
    for bi in range(B):
        _csphere_drift_row(&Z[bi, 0, 0], N, m, H, mode, KT, Kglob, &G[0], &o[bi, 0, 0])
    return out


def csphere_integrate(Z0, double complex[:, ::1] H, int mode, double[:, ::1] KT, double Kglob,
                      double dt, Py_ssize_t nsteps, Py_ssize_t record_every):
    Z_arr = np.array(Z0, dtype=np.complex128, order="C")
    cdef double complex[:, :, ::1] Z = Z_arr
    cdef Py_ssize_t B = Z.shape[0], N = Z.shape[1], m = Z.shape[2], nm = N * Z.shape[2]
    cdef Py_ssize_t nrec = nsteps // record_every if record_every > 0 else 0
    rec_arr = np.empty((nrec, B, N, m), dtype=np.complex128)
    cdef double complex[:, :, :, ::1] rec = rec_arr
    cdef double complex[::1] G = np.empty(nm, np.complex128)
    cdef double complex[::1] k1 = np.empty(nm, np.complex128), k2 = np.empty(nm, np.complex128)
    cdef double complex[::1] k3 = np.empty(nm, np.complex128), k4 = np.empty(nm, np.complex128)
    cdef double complex[::1] tmp = np.empty(nm, np.complex128)
    cdef Py_ssize_t step, bi, j, a, p, r = 0
    cdef double h = 0.5 * dt, sixth = dt / 6.0, nrm
    cdef double complex* z
    with nogil:
        for step in range(nsteps):
            for bi in range(B):
                z = &Z[bi, 0, 0]
                _csphere_drift_row(z, N, m, H, mode, KT, Kglob, &G[0], &k1[0])
                for p in range(nm):
                    tmp[p] = z[p] + h * k1[p]
                _csphere_drift_row(&tmp[0], N, m, H, mode, KT, Kglob, &G[0], &k2[0])
                for p in range(nm):
                    tmp[p] = z[p] + h * k2[p]
                _csphere_drift_row(&tmp[0], N, m, H, mode, KT, Kglob, &G[0], &k3[0])
                for p in range(nm):
                    tmp[p] = z[p] + dt * k3[p]
                _csphere_drift_row(&tmp[0], N, m, H, mode, KT, Kglob, &G[0], &k4[0])
                for p in range(nm):
                    z[p] = z[p] + sixth * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p])
                for j in range(N):
                    nrm = 0.0
                    for a in range(m):
                        nrm = nrm + _abs2(z[j * m + a])
                    nrm = sqrt(nrm)
                    for a in range(m):
                        z[j * m + a] = z[j * m + a] / nrm
            if record_every > 0 and (step + 1) % record_every == 0:
                rec[r, :, :, :] = Z
                r = r + 1
    return Z_arr, rec_arr


# ---------------------------------------------------------------------------
# SO(n) and U(d)

cdef void _matrix_drift_row(const scalar* Q, Py_ssize_t N, Py_ssize_t n,
                            const scalar[:, ::1] J, const double[:, ::1] KT,
                            scalar* S, scalar* Om, scalar* out) noexcept nogil:
    # Omega_j = J + (S_j Q_j^H - Q_j S_j^H)/(2N), out_j = Omega_j Q_j
    cdef Py_ssize_t i, j, a, b, c, nn = n * n
    cdef scalar acc, acc2
    cdef double w
    for j in range(N):
        for a in range(nn):
            S[a] = 0.0
        for i in range(N):
            w = KT[j, i]
            if w != 0.0:
                for a in range(nn):
                    S[a] = S[a] + w * Q[i * nn + a]
        # P = S_j Q_j^H is stored in Om, then Omega = J + (P - P^H)/(2N)
        for a in range(n):
            for b in range(n):
                acc = 0.0
                for c in range(n):
                    acc = acc + S[a * n + c] * _conj(Q[j * nn + b * n + c])
                Om[a * n + b] = acc
        for a in range(n):
            for b in range(a, n):
                acc = Om[a * n + b]
                acc2 = Om[b * n + a]
                Om[a * n + b] = J[a, b] + (acc - _conj(acc2)) / (2.0 * N)
                if b != a:
                    Om[b * n + a] = J[b, a] + (acc2 - _conj(acc)) / (2.0 * N)
        for a in range(n):
            for b in range(n):
                acc = 0.0
                for c in range(n):
                    acc = acc + Om[a * n + c] * Q[j * nn + c * n + b]
                out[j * nn + a * n + b] = acc


cdef double _ortho_residual(const scalar* Q, Py_ssize_t n, scalar* G) noexcept nogil:
    cdef Py_ssize_t a, b, c
    cdef scalar acc
    cdef double res = 0.0
    for a in range(n):
        for b in range(n):
            acc = 0.0
            for c in range(n):
                acc = acc + _conj(Q[c * n + a]) * Q[c * n + b]
            G[a * n + b] = acc
            if a == b:
                acc = acc - 1.0
            if scalar is double:
                res = res + acc * acc
            else:
                res = res + _abs2(acc)
    return sqrt(res)


cdef void _project(scalar* Q, Py_ssize_t n, scalar* G, scalar* T) noexcept nogil:
    # Newton-Schulz: Q <- Q (3I - Q^H Q)/2 while the residual exceeds 1e-12
    cdef Py_ssize_t a, b, c, it
    cdef scalar acc
    for it in range(6):
        if _ortho_residual(Q, n, G) <= 1e-12:
            return
        for a in range(n):
            for b in range(n):
                acc = 0.0
                for c in range(n):
                    if c == b:
                        acc = acc + Q[a * n + c] * (1.5 - 0.5 * G[c * n + b])
                    else:
                        acc = acc + Q[a * n + c] * (-0.5 * G[c * n + b])
                T[a * n + b] = acc
        for a in range(n * n):
            Q[a] = T[a]


def matrix_drift(scalar[:, :, :, ::1] Q, scalar[:, ::1] J, double[:, ::1] KT):
    cdef Py_ssize_t B = Q.shape[0], N = Q.shape[1], n = Q.shape[2], bi
    dtype = np.float64 if scalar is double else np.complex128
    out = np.empty((B, N, n, n), dtype=dtype)
    cdef scalar[:, :, :, ::1] o = out
    cdef scalar[::1] S = np.empty(n * n, dtype), Om = np.empty(n * n, dtype)
    for bi in range(B):
        _matrix_drift_row(&Q[bi, 0, 0, 0], N, n, J, KT, &S[0], &Om[0], &o[bi, 0, 0, 0])
    return out


def _matrix_integrate(scalar[:, :, :, ::1] Q, scalar[:, ::1] J, double[:, ::1] KT, double dt,
                      Py_ssize_t nsteps, Py_ssize_t record_every, rec_arr):
    cdef Py_ssize_t B = Q.shape[0], N = Q.shape[1], n = Q.shape[2], nn = n * n
    cdef Py_ssize_t tot = N * nn
    dtype = np.float64 if scalar is double else np.complex128
    cdef scalar[:, :, :, :, ::1] rec = rec_arr
    cdef scalar[::1] S = np.empty(nn, dtype), Om = np.empty(nn, dtype)
    cdef scalar[::1] G = np.empty(nn, dtype), T = np.empty(nn, dtype)
    cdef scalar[::1] k1 = np.empty(tot, dtype), k2 = np.empty(tot, dtype)
    cdef scalar[::1] k3 = np.empty(tot, dtype), k4 = np.empty(tot, dtype)
    cdef scalar[::1] tmp = np.empty(tot, dtype)
    cdef Py_ssize_t step, bi, j, p, r = 0
    cdef double h = 0.5 * dt, sixth = dt / 6.0
    cdef scalar* q
    with nogil:
        for step in range(nsteps):
            for bi in range(B):
                q = &Q[bi, 0, 0, 0]
                _matrix_drift_row(q, N, n, J, KT, &S[0], &Om[0], &k1[0])
                for p in range(tot):
                    tmp[p] = q[p] + h * k1[p]
                _matrix_drift_row(&tmp[0], N, n, J, KT, &S[0], &Om[0], &k2[0])
                for p in range(tot):
                    tmp[p] = q[p] + h * k2[p]
                _matrix_drift_row(&tmp[0], N, n, J, KT, &S[0], &Om[0], &k3[0])
                for p in range(tot):
                    tmp[p] = q[p] + dt * k3[p]
                _matrix_drift_row(&tmp[0], N, n, J, KT, &S[0], &Om[0], &k4[0])
                for p in range(tot):
                    q[p] = q[p] + sixth * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p])
                for j in range(N):
                    _project(&q[j * nn], n, &G[0], &T[0])
            if record_every > 0 and (step + 1) % record_every == 0:
                rec[r, :, :, :, :] = Q
                r = r + 1


def project_group(Q_in, double tol=1e-12, int max_iter=6):
    Q_arr = np.array(Q_in, order="C")
    shape = Q_arr.shape
    n = shape[len(shape) - 1]
    if np.iscomplexobj(Q_arr):
        flat = np.ascontiguousarray(Q_arr.reshape(-1, n, n), dtype=np.complex128)
        _project_many_c(flat)
    else:
        flat = np.ascontiguousarray(Q_arr.reshape(-1, n, n), dtype=np.float64)
        _project_many_d(flat)
    return flat.reshape(shape)


cdef void _project_many_d(double[:, :, ::1] Q):
    cdef Py_ssize_t M = Q.shape[0], n = Q.shape[1], i
    cdef double[::1] G = np.empty(n * n), T = np.empty(n * n)
    for i in range(M):
        _project(&Q[i, 0, 0], n, &G[0], &T[0])


cdef void _project_many_c(double complex[:, :, ::1] Q):
    cdef Py_ssize_t M = Q.shape[0], n = Q.shape[1], i
    cdef double complex[::1] G = np.empty(n * n, np.complex128), T = np.empty(n * n, np.complex128)
    for i in range(M):
        _project(&Q[i, 0, 0], n, &G[0], &T[0])


def matrix_integrate(Q0, J, double[:, ::1] KT, double dt, Py_ssize_t nsteps,
                     Py_ssize_t record_every):
    cplx = np.iscomplexobj(Q0) or np.iscomplexobj(J)
    dtype = np.complex128 if cplx else np.float64
    Q_arr = np.array(Q0, dtype=dtype, order="C")
    J_arr = np.ascontiguousarray(J, dtype=dtype)
    nrec = nsteps // record_every if record_every > 0 else 0
    rec_arr = np.empty((nrec,) + Q_arr.shape, dtype=dtype)
    _matrix_integrate(Q_arr, J_arr, KT, dt, nsteps, record_every, rec_arr)
    return Q_arr, rec_arr
