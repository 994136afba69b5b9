"""Quadrature on circles and low-dimensional spheres, plus goodness-of-fit tests.

Sphere coordinates used for grids and histogram cells:

* S^1: angle t, measure dt.
* S^2: (z, t) with x = (sqrt(1-z^2) cos t, sqrt(1-z^2) sin t, z), measure dz dt.
* S^3: (u, t1, t2) with x = (sqrt(1-u) e^{i t1}, sqrt(u) e^{i t2}) realified,
  measure du dt1 dt2 / 2.

Each chart is equal-area in its first coordinate, so uniform cells carry
equal uniform mass.
"""
from __future__ import annotations

import numpy as np
from scipy import stats
from scipy.integrate import quad

from ..errors import DimensionMismatch

TWO_PI = 2.0 * np.pi


def _gl(a, b, q):
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def chart_point(d, coords):
    """Map chart coordinates (..., d-1) to points on S^{d-1}."""
    c = np.asarray(coords, dtype=float)
    if d == 2:
        t = c[..., 0]
        return np.stack([np.cos(t), np.sin(t)], axis=-1)
    if d == 3:
        z, t = c[..., 0], c[..., 1]
        s = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        return np.stack([s * np.cos(t), s * np.sin(t), z], axis=-1)
    if d == 4:
        u, t1, t2 = c[..., 0], c[..., 1], c[..., 2]
        a, b = np.sqrt(np.maximum(0.0, 1.0 - u)), np.sqrt(np.maximum(0.0, u))
        return np.stack([a * np.cos(t1), a * np.sin(t1), b * np.cos(t2), b * np.sin(t2)], axis=-1)
    raise DimensionMismatch("charts are provided for S^1, S^2 and S^3 only")


def chart_coords(x):
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    if d == 2:
        return (np.arctan2(x[..., 1], x[..., 0]) % TWO_PI)[..., None]
    if d == 3:
        return np.stack([np.clip(x[..., 2], -1.0, 1.0), np.arctan2(x[..., 1], x[..., 0]) % TWO_PI], axis=-1)
    if d == 4:
        u = np.clip(x[..., 2] ** 2 + x[..., 3] ** 2, 0.0, 1.0)
        return np.stack([u, np.arctan2(x[..., 1], x[..., 0]) % TWO_PI,
                         np.arctan2(x[..., 3], x[..., 2]) % TWO_PI], axis=-1)
    raise DimensionMismatch("charts are provided for S^1, S^2 and S^3 only")


def _ranges(d):
    if d == 2:
        return [(0.0, TWO_PI)], 1.0
    if d == 3:
        return [(-1.0, 1.0), (0.0, TWO_PI)], 1.0
    if d == 4:
        return [(0.0, 1.0), (0.0, TWO_PI), (0.0, TWO_PI)], 0.5
    raise DimensionMismatch("charts are provided for S^1, S^2 and S^3 only")


def _cell_rule(d, edges, q):
    """Quadrature nodes and weights for every cell of a product grid.

    Returns points (ncell, nq, d) and weights (ncell, nq).
    """
    _, jac = _ranges(d)
    per_axis = []
    for e in edges:
        nodes, wts = [], []
        for a, b in zip(e[:-1], e[1:]):
            x, w = _gl(a, b, q)
            nodes.append(x)
            wts.append(w)
        per_axis.append((np.array(nodes), np.array(wts)))
    grids = np.meshgrid(*[np.arange(len(e) - 1) for e in edges], indexing="ij")
    cells = np.stack([g.reshape(-1) for g in grids], axis=-1)
    qgrid = np.meshgrid(*[np.arange(q)] * len(edges), indexing="ij")
    qidx = np.stack([g.reshape(-1) for g in qgrid], axis=-1)
    coords = np.empty((cells.shape[0], qidx.shape[0], len(edges)))
    weights = np.full((cells.shape[0], qidx.shape[0]), jac)
    for k, (nodes, wts) in enumerate(per_axis):
        coords[..., k] = nodes[cells[:, k]][:, qidx[:, k]]
        weights *= wts[cells[:, k]][:, qidx[:, k]]
    return chart_point(d, coords), weights


def sphere_integral(f, d, n=None):
    """Integral of f over S^{d-1} (surface measure) for d = 2, 3, 4.

    d = 2 uses adaptive quadrature; d = 3 and 4 use Gauss-Legendre product
    grids refined until two successive levels agree to 1e-10 relative.
    """
    if d == 2:
        val, _ = quad(lambda t: float(f(np.array([np.cos(t), np.sin(t)]))), 0.0, TWO_PI,
                      limit=500, epsabs=0.0, epsrel=1e-12)
        return val
    ranges, _ = _ranges(d)
    cells = [8] * len(ranges) if n is None else [n] * len(ranges)
    prev = None
    for _ in range(4):
        edges = [np.linspace(a, b, c + 1) for (a, b), c in zip(ranges, cells)]
        pts, wts = _cell_rule(d, edges, 8)
        val = float(np.sum(f(pts.reshape(-1, d)).reshape(wts.shape) * wts))
        if prev is not None and abs(val - prev) <= 1e-10 * abs(val):
            return val
        prev = val
        cells = [2 * c for c in cells]
    return val


def circle_integral(f, a=0.0, b=TWO_PI):
    val, _ = quad(lambda t: float(f(np.array([t]))[0]), a, b, limit=500, epsabs=0.0, epsrel=1e-12)
    return val


def _pooled_chisquare(observed, expected_prob, min_expected=5.0):
    n = observed.sum()
    exp = expected_prob / expected_prob.sum() * n
    order = np.argsort(exp)
    small = exp[order] < min_expected
    keep = order[~small]
    pool = order[small]
    obs = list(observed[keep])
    ex = list(exp[keep])
    if pool.size:
        obs.append(observed[pool].sum())
        ex.append(exp[pool].sum())
    res = stats.chisquare(np.array(obs, dtype=float), np.array(ex))
    return float(res.statistic), float(res.pvalue)


def circle_chi_square(phi, log_density, bins: int = 36, q: int = 16):
    """Chi-square test of angles against a density, with equal-width bins."""
    phi = np.asarray(phi, dtype=float) % TWO_PI
    edges = np.linspace(0.0, TWO_PI, bins + 1)
    obs = np.histogram(phi, edges)[0]
    probs = np.empty(bins)
    for k in range(bins):
        x, w = _gl(edges[k], edges[k + 1], q)
        probs[k] = np.sum(np.exp(log_density(x)) * w)
    return _pooled_chisquare(obs, probs)


def _cell_index(coords, edges):
    idx = np.zeros(coords.shape[0], dtype=np.int64)
    for k, e in enumerate(edges):
        j = np.clip(np.searchsorted(e, coords[:, k], side="right") - 1, 0, len(e) - 2)
        idx = idx * (len(e) - 1) + j
    return idx


def sphere_edges(d, bins):
    ranges, _ = _ranges(d)
    if np.isscalar(bins):
        bins = [int(bins)] * len(ranges)
    return [np.linspace(a, b, c + 1) for (a, b), c in zip(ranges, bins)]


def sphere_chi_square(x, log_density, bins=12, q: int = 6):
    """Chi-square test of points on S^{d-1} (d = 2, 3, 4) against a density.

    Cells form a product grid in the equal-area chart; expected cell
    masses come from Gauss-Legendre quadrature of the density, and cells
    with expected count below 5 are pooled.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[1]
    if d == 2:
        return circle_chi_square(chart_coords(x)[:, 0],
                                 lambda t: log_density(chart_point(2, t[:, None])),
                                 bins=bins if np.isscalar(bins) else bins[0])
    edges = sphere_edges(d, bins)
    pts, wts = _cell_rule(d, edges, q)
    probs = np.sum(np.exp(log_density(pts.reshape(-1, d))).reshape(wts.shape) * wts, axis=1)
    obs = np.bincount(_cell_index(chart_coords(x), edges), minlength=probs.size)
    return _pooled_chisquare(obs, probs)


def two_sample_sphere(a, b, bins=10):
    """Chi-square homogeneity test for two samples on S^{d-1} (d = 2, 3, 4)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = a.shape[1]
    edges = sphere_edges(d, bins)
    ncell = int(np.prod([len(e) - 1 for e in edges]))
    ca = np.bincount(_cell_index(chart_coords(a), edges), minlength=ncell)
    cb = np.bincount(_cell_index(chart_coords(b), edges), minlength=ncell)
    keep = (ca + cb) >= 10
    table = np.vstack([np.append(ca[keep], ca[~keep].sum()), np.append(cb[keep], cb[~keep].sum())])
    table = table[:, table.sum(axis=0) > 0]
    res = stats.chi2_contingency(table, correction=False)
    return float(res.statistic), float(res.pvalue)


def two_sample_circle(a, b):
    """Two-sample Kolmogorov-Smirnov test on angles in [0, 2 pi)."""
    res = stats.ks_2samp(np.asarray(a) % TWO_PI, np.asarray(b) % TWO_PI)
    return float(res.statistic), float(res.pvalue)


def rayleigh_test(phi):
    """Rayleigh test of circular uniformity; returns (R-bar, p-value)."""
    phi = np.asarray(phi, dtype=float)
    n = phi.size
    Rn = np.hypot(np.sum(np.cos(phi)), np.sum(np.sin(phi)))
    p = np.exp(np.sqrt(1.0 + 4.0 * n + 4.0 * (n * n - Rn * Rn)) - (1.0 + 2.0 * n))
    return float(Rn / n), float(min(1.0, p))


def realify(z):
    """Complex points (n, m) as real points (n, 2m) ordered (Re z1, Im z1, Re z2, ...)."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def complexify(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]
