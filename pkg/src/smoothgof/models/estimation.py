"""Generic numerical maximum likelihood."""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

from ..exceptions import ConvergenceError, EstimationError, ParameterError, SmoothGofError

GTOL = 1e-7


def _projected_gradient(beta, grad, bounds, tol=1e-12):
    pg = grad.copy()
    for k, (lo, hi) in enumerate(bounds):
        if beta[k] <= lo + tol and pg[k] < 0:
            pg[k] = 0.0
        if beta[k] >= hi - tol and pg[k] > 0:
            pg[k] = 0.0
    return pg


def fit_mle(family, data, init, bounds, max_iter=2000, gtol=GTOL):
    """Maximize the mean log-likelihood of ``family(beta)`` over a box.

    ``family`` maps a parameter vector to a model (e.g. ``model.with_params``).
    Nelder-Mead with box clamping locates the optimum; a projected Newton
    polish driven by the analytic score then brings the projected gradient
    of the mean log-likelihood below ``gtol``.
    """
    data = np.asarray(data, dtype=float)
    init = np.atleast_1d(np.asarray(init, dtype=float))
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    if np.any(init < lo) or np.any(init > hi):
        raise EstimationError(f"initial value {init} outside bounds {bounds}")

    def model_at(beta):
        try:
            return family(np.clip(beta, lo, hi))
        except (ParameterError, SmoothGofError):
            return None

    def loglik(beta):
        m = model_at(beta)
        if m is None:
            return -np.inf
        with np.errstate(all="ignore"):
            ll = m.logpdf(data)
        return float(np.mean(ll)) if np.all(np.isfinite(ll)) else -np.inf

    start_ll = loglik(init)
    if not np.isfinite(start_ll):
        raise EstimationError("log-likelihood is not finite at the initial value")

    res = minimize(lambda b: -loglik(b), init, method="Nelder-Mead",
                   bounds=list(zip(lo, hi)),
                   options={"maxiter": max_iter, "xatol": 1e-8, "fatol": 1e-13,
                            "adaptive": init.size > 2})
    beta = np.clip(res.x, lo, hi)
    best_ll = loglik(beta)
    if best_ll < start_ll:
        beta, best_ll = init, start_ll
    if not np.isfinite(best_ll):
        raise EstimationError("log-likelihood not finite along the search path")
    if res.nit >= max_iter and not res.success:
        raise ConvergenceError(f"Nelder-Mead hit {max_iter} iterations", best=beta)

    beta, best_ll, pg = _newton_polish(model_at, loglik, data, beta, best_ll, lo, hi,
                                       list(zip(lo, hi)), gtol)
    if np.linalg.norm(pg) >= gtol:
        raise ConvergenceError(
            f"projected gradient {np.linalg.norm(pg):.3g} above {gtol}", best=beta
        )
    return beta


def _mean_score(model_at, data, beta):
    m = model_at(beta)
    if m is None:
        return None
    with np.errstate(all="ignore"):
        s = m.score(data).mean(axis=0)
    return s if np.all(np.isfinite(s)) else None


def _hessian(model_at, data, beta, lo, hi):
    p = beta.size
    H = np.empty((p, p))
    for k in range(p):
        h = 1e-6 * max(1.0, abs(beta[k]))
        up, dn = beta.copy(), beta.copy()
        up[k] = min(beta[k] + h, hi[k])
        dn[k] = max(beta[k] - h, lo[k])
        su, sd = _mean_score(model_at, data, up), _mean_score(model_at, data, dn)
        if su is None or sd is None or up[k] == dn[k]:
            return None
        H[:, k] = (su - sd) / (up[k] - dn[k])
    return 0.5 * (H + H.T)


def _ascent_direction(H, grad, free):
    """Newton direction with the Hessian eigenvalues replaced by their
    magnitudes, so flat or indefinite directions still give an ascent step."""
    d = np.zeros_like(grad)
    if H is None:
        d[free] = grad[free]
        return d
    lam, V = np.linalg.eigh(H[np.ix_(free, free)])
    floor = 1e-10 * max(1.0, float(np.max(np.abs(lam))))
    d[free] = V @ ((V.T @ grad[free]) / np.maximum(np.abs(lam), floor))
    return d


def _newton_polish(model_at, loglik, data, beta, ll, lo, hi, bounds, gtol, max_steps=100):
    grad = _mean_score(model_at, data, beta)
    if grad is None:
        raise EstimationError("score not finite at the Nelder-Mead optimum")
    pg = _projected_gradient(beta, grad, bounds)
    for _ in range(max_steps):
        if np.linalg.norm(pg) < gtol:
            break
        free = pg != 0
        direction = _ascent_direction(_hessian(model_at, data, beta, lo, hi), grad, free)
        best = None
        # try the full step, expand while it keeps improving, else backtrack
        step = 1.0
        for _ in range(60):
            cand = np.clip(beta + step * direction, lo, hi)
            cand_ll = loglik(cand)
            if cand_ll > ll and (best is None or cand_ll > best[1]):
                best = (cand, cand_ll)
                if step >= 1.0:
                    step *= 2.0
                    continue
                break
            if best is not None:
                break
            step *= 0.5
        if best is None:
            break
        beta, ll = best
        grad = _mean_score(model_at, data, beta)
        if grad is None:
            raise EstimationError("score not finite during the Newton polish")
        pg = _projected_gradient(beta, grad, bounds)
    return beta, ll, pg
