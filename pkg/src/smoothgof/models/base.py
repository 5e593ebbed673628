"""Base class for parametric univariate models plus the score-derived
quantities every test needs (Fisher information, orthonormalized score,
estimator influence functions)."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..exceptions import (
    DegenerateMomentError,
    IllPosedModelError,
    NotPositiveDefiniteError,
    ParameterError,
    SupportViolationError,
)
from ..numerics import (
    DEFAULT_NODES,
    DEFAULT_PANELS,
    composite_rule,
    principal_inverse_sqrt,
    split_rule,
    weighted_gram,
)

QUAD_TAIL = 1e-12
FD_STEP = 1e-6


class ParametricModel:
    """A univariate density ``g_beta`` with a subset of free parameters.

    Subclasses declare ``param_names`` and implement ``_pdf``, ``_cdf`` and
    optionally ``_quantile`` and ``_score_all`` (derivatives of the log
    density with respect to every natural parameter). ``params`` is the
    vector of *free* parameters only, in the order given by ``free``.
    """

    family = "abstract"
    param_names: tuple = ()

    def __init__(self, values, support, free=()):
        lo, hi = (float(support[0]), float(support[1]))
        if not lo < hi:
            raise ParameterError(f"empty support ({lo}, {hi})")
        self.support = (lo, hi)
        self._values = {k: float(values[k]) for k in self.param_names}
        free = tuple(free)
        unknown = set(free) - set(self.param_names)
        if unknown:
            raise ParameterError(f"{self.family}: unknown free parameters {sorted(unknown)}")
        self.free = free
        self._cache = {}
        self._validate()

    # -- parameters -------------------------------------------------------
    def _validate(self):
        pass

    @property
    def param_dim(self):
        return len(self.free)

    @property
    def params(self):
        return np.array([self._values[k] for k in self.free], dtype=float)

    def value(self, name):
        return self._values[name]

    def with_params(self, params):
        params = np.atleast_1d(np.asarray(params, dtype=float))
        if params.shape != (self.param_dim,):
            raise ParameterError(
                f"expected {self.param_dim} parameters, got shape {params.shape}"
            )
        new = copy.copy(self)
        new._values = dict(self._values)
        new._values.update(zip(self.free, map(float, params)))
        new._cache = {}
        new._validate()
        return new

    def param_bounds(self):
        return [(-np.inf, np.inf)] * self.param_dim

    def initial_params(self, data):
        return self.params

    # -- density interface ------------------------------------------------
    @property
    def finite_support(self):
        return bool(np.isfinite(self.support[0]) and np.isfinite(self.support[1]))

    @property
    def breakpoints(self):
        return ()

    def in_support(self, x):
        lo, hi = self.support
        return (x >= lo) & (x <= hi)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = self.in_support(x)
        out[inside] = self._pdf(x[inside])
        return out

    def logpdf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(x))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        out = np.where(x >= hi, 1.0, 0.0)
        inside = (x > lo) & (x < hi)
        out[inside] = self._cdf(x[inside])
        return np.clip(out, 0.0, 1.0)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return self._quantile(np.clip(u, 0.0, 1.0))

    def _quantile(self, u):
        return invert_cdf(self, u)

    def sample(self, rng, n):
        """Inverse-CDF draws; one uniform per observation."""
        u = rng.random(n)
        return self.quantile(np.clip(u, 1e-300, 1.0 - 2 ** -53))

    def score(self, x):
        """``grad_beta log g_beta(x)`` for the free parameters, shape ``(N, p)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.param_dim == 0:
            return np.zeros((x.size, 0))
        return self._score_free(x)

    def _score_free(self, x):
        analytic = self._score_all(x) or {}
        cols = [analytic[k] if k in analytic else self._score_fd(k, x) for k in self.free]
        return np.column_stack(cols)

    def _score_all(self, x):
        """Analytic ``d log g / d name`` per natural parameter, or ``None``."""
        return None

    def _score_fd(self, name, x):
        v = self._values[name]
        h = FD_STEP * max(1.0, abs(v))
        up, dn = copy.copy(self), copy.copy(self)
        for m, val in ((up, v + h), (dn, v - h)):
            m._values = dict(self._values)
            m._values[name] = val
            m._cache = {}
            m._validate()
        return (up.logpdf(x) - dn.logpdf(x)) / (2 * h)

    # -- quadrature -------------------------------------------------------
    def quadrature_rule(self, panels=DEFAULT_PANELS, nodes_per_panel=DEFAULT_NODES):
        key = ("rule", panels, nodes_per_panel)
        if key not in self._cache:
            if self.finite_support:
                rule = split_rule(*self.support, self.breakpoints, panels, nodes_per_panel)
            else:
                rule = composite_rule(self._tail_edges(panels), nodes_per_panel)
            self._cache[key] = rule
        return self._cache[key]

    def _tail_edges(self, panels):
        # infinite support: truncate at the 1e-12 tails, panels equispaced
        # in probability with geometric refinement towards both tails
        tails = np.logspace(np.log10(QUAD_TAIL), -3, 10)
        central = np.linspace(1e-3, 1 - 1e-3, panels + 1)
        kinks = [float(self.cdf(np.array([b]))[0]) for b in self.breakpoints]
        u = np.unique(np.concatenate([tails, central, 1.0 - tails, kinks]))
        u = u[(u >= QUAD_TAIL) & (u <= 1 - QUAD_TAIL)]
        x = np.unique(self.quantile(u))
        return x

    # -- identity ---------------------------------------------------------
    def describe(self):
        return {
            "family": self.family,
            "params": dict(self._values),
            "free": list(self.free),
            "support": list(self.support),
        }

    @property
    def model_hash(self):
        blob = json.dumps(self.describe(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def check_data(self, data):
        data = np.asarray(data, dtype=float)
        bad = np.flatnonzero(~np.isfinite(data) | ~self.in_support(data))
        if bad.size:
            raise SupportViolationError(
                f"{bad.size} observation(s) outside support {self.support}, "
                f"first at index {bad[0]} (value {data[bad[0]]!r})",
                indices=bad,
            )
        return data

    def fit(self, data):
        """Maximum likelihood refit; returns a new model at the estimate."""
        from .estimation import fit_mle

        data = self.check_data(data)
        if self.param_dim == 0:
            return self
        beta = fit_mle(self.with_params, data, self.initial_params(data), self.param_bounds())
        return self.with_params(beta)

    def __repr__(self):
        parts = [f"{k}={v:.6g}" for k, v in self._values.items()] + [f"free={self.free}"]
        return f"{type(self).__name__}({', '.join(parts)})"


def invert_cdf(model, u, grid_size=2049, tol=1e-14, max_iter=100):
    """Vectorized safeguarded Newton inversion of ``model.cdf``."""
    u = np.asarray(u, dtype=float)
    shape = u.shape
    u = u.ravel()
    if "cdf_grid" not in model._cache:
        if model.finite_support:
            lo, hi = model.support
        else:
            raise ParameterError("numeric inversion needs a finite support")
        g = np.union1d(np.linspace(lo, hi, grid_size),
                       [b for b in model.breakpoints if lo < b < hi])
        c = model.cdf(g)
        c[0], c[-1] = 0.0, 1.0
        c = np.maximum.accumulate(c)
        model._cache["cdf_grid"] = (g, c)
    g, c = model._cache["cdf_grid"]
    k = np.clip(np.searchsorted(c, u, side="right") - 1, 0, g.size - 2)
    a, b = g[k].copy(), g[k + 1].copy()
    ca, cb = c[k], c[k + 1]
    span = np.where(cb > ca, cb - ca, 1.0)
    x = a + (b - a) * np.clip((u - ca) / span, 0.0, 1.0)
    active = np.ones(u.size, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xi = x[idx]
        r = model.cdf(xi) - u[idx]
        done = np.abs(r) <= tol
        lo_i, hi_i = a[idx], b[idx]
        lo_i = np.where(r < 0, xi, lo_i)
        hi_i = np.where(r > 0, xi, hi_i)
        dens = model.pdf(xi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = xi - r / dens
        bad = ~np.isfinite(step) | (step <= lo_i) | (step >= hi_i)
        step = np.where(bad, 0.5 * (lo_i + hi_i), step)
        converged = done | (hi_i - lo_i <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(xi)))
        x[idx] = np.where(done, xi, step)
        a[idx], b[idx] = lo_i, hi_i
        active[idx[converged]] = False
    return x.reshape(shape)


# -- score-derived quantities ------------------------------------------------

def fisher_information(model, rule=None):
    """``<u^T, u^T>`` under the model (outer-product form)."""
    rule = rule or model.quadrature_rule()
    x = rule.nodes
    u = model.score(x)
    if u.shape[1] == 0:
        return np.zeros((0, 0))
    gamma = weighted_gram(u, u, rule.weights * model.pdf(x))
    gamma = 0.5 * (gamma + gamma.T)
    w = np.linalg.eigvalsh(gamma)
    if not np.all(np.isfinite(gamma)) or w.min() <= 1e-12 * max(w.max(), 1e-300):
        raise IllPosedModelError(f"Fisher information is not positive definite: {w}")
    return gamma


class OrthonormalScore:
    """``b = Gamma^{-1/2} u``; callable returning ``(N, p)`` values."""

    def __init__(self, model, rule=None):
        self.model = model
        self.fisher = fisher_information(model, rule)
        try:
            self.root = principal_inverse_sqrt(self.fisher)
        except NotPositiveDefiniteError as exc:
            raise IllPosedModelError(str(exc)) from exc

    def __call__(self, x):
        return self.model.score(x) @ self.root

    @property
    def dim(self):
        return self.fisher.shape[0]


def orthonormal_score(model, rule=None):
    return OrthonormalScore(model, rule)


@dataclass(frozen=True)
class EstimatorSpec:
    """Influence function ``psi`` of a locally asymptotically linear estimator."""

    kind: str
    psi: Callable[[np.ndarray], np.ndarray]


def psi_for(model, kind="mle", rule=None):
    rule = rule or model.quadrature_rule()
    x, w = rule.nodes, rule.weights * model.pdf(rule.nodes)
    if kind == "mle":
        inv = np.linalg.inv(fisher_information(model, rule))
        return EstimatorSpec("mle", lambda t: model.score(t) @ inv)
    if kind == "moments":
        p = model.param_dim
        powers = np.arange(1, p + 1)
        mu = (x[:, None] ** powers * w[:, None]).sum(axis=0)

        def phi(t):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            return t[:, None] ** powers - mu

        cross = weighted_gram(phi(x), model.score(x), w)
        if not np.all(np.isfinite(cross)) or abs(np.linalg.det(cross)) < 1e-14 * max(
            1.0, np.abs(cross).max() ** p
        ):
            raise DegenerateMomentError("moment/score cross matrix is singular")
        inv_t = np.linalg.inv(cross).T
        return EstimatorSpec("moments", lambda t: phi(t) @ inv_t)
    raise ValueError(f"unknown estimator kind {kind!r}")
