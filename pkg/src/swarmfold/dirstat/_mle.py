"""Small numerical maximum-likelihood helper used by families without closed-form fits."""
from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

from ..errors import NoConvergence


def fd_gradient(fun, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (fun(x + e) - fun(x - e)) / (2.0 * h)
    return g


def fd_hessian(fun, x, h=1e-4):
    x = np.asarray(x, dtype=float)
    p = x.size
    H = np.empty((p, p))
    for k in range(p):
        e = np.zeros(p)
        e[k] = h
        H[k] = (fd_gradient(fun, x + e) - fd_gradient(fun, x - e)) / (2.0 * h)
    return 0.5 * (H + H.T)


def _safe(fun):
    def wrapped(x):
        v = fun(x)
        return v if np.isfinite(v) else 1e300
    return wrapped


def minimize_nll(nll, starts, nll_coarse=None, gtol=1e-10, newton_steps=8):
    """Minimise a mean negative log-likelihood from several starts.

    Starts are screened on ``nll_coarse`` (a subsample objective) when given;
    the winner is refined on the full objective by BFGS and a few Newton
    steps with a finite-difference Hessian.
    """
    f = _safe(nll)
    screen = _safe(nll_coarse) if nll_coarse is not None else f
    best = None
    for x0 in starts:
        res = minimize(screen, np.asarray(x0, dtype=float), jac=lambda x: fd_gradient(screen, x),
                       method="BFGS", options={"gtol": 1e-7, "maxiter": 500})
        if best is None or res.fun < best.fun:
            best = res
    res = minimize(f, best.x, jac=lambda x: fd_gradient(f, x), method="BFGS",
                   options={"gtol": gtol, "maxiter": 2000})
    x, fx = res.x, res.fun
    for _ in range(newton_steps):
        g = fd_gradient(f, x)
        if np.linalg.norm(g) < 1e-9:
            break
        try:
            step = np.linalg.solve(fd_hessian(f, x), g)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        while t > 1e-4:
            cand = x - t * step
            fc = f(cand)
            if fc <= fx:
                x, fx = cand, fc
                break
            t *= 0.5
        else:
            break
    if not np.isfinite(fx) or fx >= 1e299:
        raise NoConvergence("likelihood optimisation failed")
    return x
