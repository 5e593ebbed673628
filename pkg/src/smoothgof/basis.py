"""Orthonormal bases in L2(G_beta), their score residuals, and the
function-parametric empirical process indexed by them."""

from __future__ import annotations

import numpy as np

from .models.base import orthonormal_score
from .numerics import legendre_matrix, weighted_gram


class BasisSet:
    """``M`` basis functions over a model with their score residuals.

    Subclasses provide ``raw(x)`` and ``residual(x)`` returning ``(N, M)``
    arrays. ``gram`` holds ``<h~_i, h~_j>`` and ``mean`` holds
    ``<h~_j, 1>``, both under the model, from the model's quadrature rule.
    """

    kind = "abstract"

    def __init__(self, model, size, rule=None):
        if size < 1:
            raise ValueError("basis size M must be >= 1")
        self.model = model
        self.size = int(size)
        self.rule = rule or model.quadrature_rule()

    def _finalize(self):
        x = self.rule.nodes
        w = self.rule.weights * self.model.pdf(x)
        res = self.residual(x)
        self.gram = 0.5 * (weighted_gram(res, res, w) + weighted_gram(res, res, w).T)
        self.mean = w @ res
        self.gram.setflags(write=False)
        self.mean.setflags(write=False)

    def raw(self, x):
        raise NotImplementedError

    def residual(self, x):
        raise NotImplementedError

    def eval(self, j, x):
        self._check_index(j)
        return self.raw(np.atleast_1d(x))[:, j - 1]

    def eval_residual(self, j, x):
        self._check_index(j)
        return self.residual(np.atleast_1d(x))[:, j - 1]

    def _check_index(self, j):
        if not 1 <= j <= self.size:
            raise IndexError(f"basis index {j} outside 1..{self.size}")

    def raw_gram(self):
        x = self.rule.nodes
        h = self.raw(x)
        return weighted_gram(h, h, self.rule.weights * self.model.pdf(x))


class LegendreBasis(BasisSet):
    """``h_j o G_beta`` with ``h_j`` the normalized shifted Legendre polynomials."""

    kind = "legendre-composed"

    def __init__(self, model, size, rule=None, score=None):
        super().__init__(model, size, rule)
        # ``score`` may replace the model's orthonormal score with any
        # orthonormal, mean-zero family of functions (e.g. an extended one)
        self.score = score if score is not None else orthonormal_score(model, self.rule)
        x = self.rule.nodes
        w = self.rule.weights * model.pdf(x)
        # <b_k, h_j>, shape (p, M)
        self.score_coef = weighted_gram(self.score(x), self.raw(x), w)
        self._finalize()

    def raw(self, x):
        return legendre_matrix(self.model.cdf(np.asarray(x, dtype=float)), self.size)

    def residual(self, x):
        x = np.asarray(x, dtype=float)
        return self.raw(x) - self.score(x) @ self.score_coef


def legendre_composed_basis(model, M, rule=None):
    return LegendreBasis(model, M, rule)


def process_values(basis, data, check=True):
    """Empirical process ``v(h~_j)`` for every basis function.

    ``data`` of shape ``(n,)`` gives ``(M,)``; shape ``(R, n)`` gives one row
    per replicate. The mean term ``sqrt(n) <h~_j, 1>`` is always subtracted.
    """
    data = np.asarray(data, dtype=float)
    if check:
        basis.model.check_data(data.ravel())
    n = data.shape[-1]
    vals = basis.residual(data.ravel()).reshape(data.shape + (basis.size,))
    return vals.sum(axis=-2) / np.sqrt(n) - np.sqrt(n) * basis.mean


def empirical_process(basis, j, data):
    basis._check_index(j)
    return float(process_values(basis, np.atleast_1d(data))[j - 1])


def function_process(h, model, data, rule=None):
    """Empirical process indexed by an arbitrary function ``h``."""
    rule = rule or model.quadrature_rule()
    data = model.check_data(np.atleast_1d(data))
    n = data.size
    mean = rule.weights @ (h(rule.nodes) * model.pdf(rule.nodes))
    return float(np.sum(h(data)) / np.sqrt(n) - np.sqrt(n) * mean)


def estimate_coefficients(basis, data):
    """Sample means of the raw basis functions (expansion coefficients)."""
    data = basis.model.check_data(np.atleast_1d(data))
    return basis.raw(data).mean(axis=0)


def projection_pi(h, model, psi, rule=None):
    """``x -> h(x) - psi(x)^T <u^T, h>`` for estimator influence ``psi``."""
    rule = rule or model.quadrature_rule()
    x = rule.nodes
    w = rule.weights * model.pdf(x)
    coef = (model.score(x) * w[:, None]).T @ np.asarray(h(x), dtype=float)

    def projected(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.asarray(h(t), dtype=float) - psi.psi(t) @ coef

    return projected
