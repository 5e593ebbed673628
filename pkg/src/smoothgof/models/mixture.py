"""Finite mixtures with fixed, free or residual ("rest") weights."""

from __future__ import annotations

import numpy as np

from ..exceptions import ParameterError
from .base import ParametricModel

FREE = "free"
REST = "rest"


class Mixture(ParametricModel):
    """Convex combination of component models sharing one support.

    ``weights`` holds, per component, a number (fixed weight), ``"free"``
    (a free parameter) or ``"rest"`` (one minus the others; at most one).
    Free parameters are the free weights in component order followed by
    each component's own free parameters.
    """

    family = "mixture"

    def __init__(self, components, weights, values=None):
        self.components = tuple(components)
        if len(weights) != len(self.components) or not self.components:
            raise ParameterError("one weight spec per component required")
        self.weight_spec = tuple(
            w if isinstance(w, str) else float(w) for w in weights
        )
        bad = [w for w in self.weight_spec if isinstance(w, str) and w not in (FREE, REST)]
        if bad:
            raise ParameterError(f"unknown weight spec {bad}")
        if self.weight_spec.count(REST) > 1:
            raise ParameterError("at most one 'rest' weight")
        if FREE in self.weight_spec and REST not in self.weight_spec:
            raise ParameterError("free weights need a 'rest' component")
        supports = {c.support for c in self.components}
        if len(supports) != 1:
            raise ParameterError(f"components must share a support, got {supports}")
        self._free_w = [i for i, w in enumerate(self.weight_spec) if w == FREE]
        self._rest = self.weight_spec.index(REST) if REST in self.weight_spec else None
        if values is None:
            values = [1.0 / len(self.components)] * len(self._free_w)
        self.support = supports.pop()
        self._cache = {}
        self._set_weights(np.asarray(values, dtype=float))

    def _set_weights(self, free_values):
        w = np.array([0.0 if isinstance(s, str) else s for s in self.weight_spec])
        w[self._free_w] = free_values
        if self._rest is not None:
            w[self._rest] = 1.0 - (w.sum() - w[self._rest])
        if not np.all(np.isfinite(w)) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ParameterError(f"mixture weights {w} are outside the simplex")
        self.weights = w

    # -- parameters -------------------------------------------------------
    @property
    def free(self):
        names = [f"w{i}" for i in self._free_w]
        for i, c in enumerate(self.components):
            names += [f"c{i}.{k}" for k in c.free]
        return tuple(names)

    @property
    def param_dim(self):
        return len(self._free_w) + sum(c.param_dim for c in self.components)

    @property
    def params(self):
        parts = [self.weights[self._free_w]] + [c.params for c in self.components]
        return np.concatenate(parts) if parts else np.zeros(0)

    def with_params(self, params):
        params = np.atleast_1d(np.asarray(params, dtype=float))
        if params.shape != (self.param_dim,):
            raise ParameterError(f"expected {self.param_dim} parameters, got {params.shape}")
        k = len(self._free_w)
        comps, pos = [], k
        for c in self.components:
            comps.append(c.with_params(params[pos:pos + c.param_dim]) if c.param_dim else c)
            pos += c.param_dim
        return Mixture(comps, self.weight_spec, params[:k])

    def param_bounds(self):
        out = [(0.0, 1.0)] * len(self._free_w)
        for c in self.components:
            out += c.param_bounds()
        return out

    def value(self, name):
        return dict(zip(self.free, self.params))[name]

    # -- density ----------------------------------------------------------
    @property
    def breakpoints(self):
        return tuple(sorted({b for c in self.components for b in c.breakpoints}))

    def _component_pdfs(self, x):
        return np.stack([c.pdf(x) for c in self.components], axis=-1)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return self._component_pdfs(x) @ self.weights

    def _pdf(self, x):
        return self.pdf(x)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip(np.stack([c.cdf(x) for c in self.components], axis=-1) @ self.weights,
                       0.0, 1.0)

    def _cdf(self, x):
        return self.cdf(x)

    def score(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.param_dim == 0:
            return np.zeros((x.size, 0))
        f = self._component_pdfs(x)
        g = f @ self.weights
        cols = [(f[:, i] - f[:, self._rest])[:, None] for i in self._free_w]
        for i, c in enumerate(self.components):
            if c.param_dim:
                cols.append((self.weights[i] * f[:, i])[:, None] * c.score(x))
        dg = np.hstack(cols)
        with np.errstate(divide="ignore", invalid="ignore"):
            return dg / g[:, None]

    def initial_params(self, data):
        """One responsibility step from the configured parameter values.

        Free weights become the average posterior membership of the data (the
        data mass near each component's mode); free component parameters get
        membership-weighted moments.
        """
        data = np.asarray(data, dtype=float)
        f = self._component_pdfs(data) * self.weights
        resp = f / np.maximum(f.sum(axis=1, keepdims=True), 1e-300)
        w_free = resp.mean(axis=0)[self._free_w]
        fixed = sum(w for w in self.weight_spec if not isinstance(w, str))
        if w_free.sum() + fixed > 1.0:
            w_free = w_free * (1.0 - fixed) / (w_free.sum() + 1e-12) * 0.999
        parts = [w_free]
        for i, c in enumerate(self.components):
            if c.param_dim:
                if hasattr(c, "initial_params") and resp[:, i].sum() > 0:
                    try:
                        parts.append(c.initial_params(data, weights=resp[:, i]))
                        continue
                    except TypeError:
                        pass
                parts.append(c.params)
        return np.concatenate(parts) if parts else np.zeros(0)

    def describe(self):
        return {
            "family": "mixture",
            "weights": [w if isinstance(w, str) else float(w) for w in self.weight_spec],
            "weight_values": [float(w) for w in self.weights],
            "components": [c.describe() for c in self.components],
        }

    def __repr__(self):
        inner = ", ".join(f"{w:.4g}*{c!r}" for w, c in zip(self.weights, self.components))
        return f"Mixture({inner})"


def mixture_model(components, free_params=None):
    """Build a mixture from ``(weight_spec, component)`` pairs.

    ``free_params`` optionally gives starting values of the free weights.
    """
    weights = [w for w, _ in components]
    comps = [c for _, c in components]
    return Mixture(comps, weights, free_params)
