"""Deterministic numerical kernels: quadrature, shifted Legendre
polynomials and small symmetric linear algebra."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import (
    DomainError,
    EvaluationError,
    InvalidIntervalError,
    NotPositiveDefiniteError,
)

DEFAULT_PANELS = 32
DEFAULT_NODES = 16


@dataclass(frozen=True)
class QuadratureRule:
    """Composite rule on ``interval``; integrates ``f`` as ``weights @ f(nodes)``."""

    nodes: np.ndarray
    weights: np.ndarray
    interval: tuple[float, float]

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def __len__(self):
        return self.nodes.size

    def integrate(self, values):
        return self.weights @ values


@lru_cache(maxsize=32)
def _gl_reference(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _check_interval(lo, hi):
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
        raise InvalidIntervalError(f"invalid interval ({lo}, {hi})")


def composite_rule(edges, nodes_per_panel=DEFAULT_NODES):
    """Gauss-Legendre rule with one ``nodes_per_panel`` panel per edge gap."""
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise InvalidIntervalError("need at least two panel edges")
    _check_interval(edges[0], edges[-1])
    if np.any(np.diff(edges) <= 0) or not np.all(np.isfinite(edges)):
        raise InvalidIntervalError("panel edges must be finite and increasing")
    if nodes_per_panel < 2:
        raise ValueError("nodes_per_panel must be >= 2")
    x, w = _gl_reference(int(nodes_per_panel))
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    nodes = (mid + half * x).ravel()
    weights = (half * w).ravel()
    return QuadratureRule(nodes, weights, (float(edges[0]), float(edges[-1])))


def gauss_legendre_rule(panels, nodes_per_panel, lo, hi):
    """Composite Gauss-Legendre rule with equal panels on ``[lo, hi]``.

    Exact for polynomials of degree ``2 * nodes_per_panel - 1`` on each panel.
    """
    _check_interval(lo, hi)
    if panels < 1:
        raise ValueError("panels must be >= 1")
    if nodes_per_panel < 2:
        raise ValueError("nodes_per_panel must be >= 2")
    return composite_rule(np.linspace(lo, hi, int(panels) + 1), nodes_per_panel)


def split_rule(lo, hi, breakpoints=(), panels=DEFAULT_PANELS,
               nodes_per_panel=DEFAULT_NODES):
    """Rule with ``panels`` panels shared among the pieces cut at ``breakpoints``.

    Kinks of the integrand must sit on panel edges for the composite rule to
    keep its order; panels are allotted proportionally to piece length.
    """
    _check_interval(lo, hi)
    cuts = sorted({float(b) for b in breakpoints if lo < b < hi})
    bounds = [lo, *cuts, hi]
    lengths = np.diff(bounds)
    counts = np.maximum(1, np.round(panels * lengths / (hi - lo)).astype(int))
    # keep the total at ``panels`` when rounding overshoots
    while counts.sum() > panels and counts.max() > 1:
        counts[np.argmax(counts)] -= 1
    edges = [lo]
    for a, b, k in zip(bounds[:-1], bounds[1:], counts):
        edges.extend(np.linspace(a, b, k + 1)[1:])
    return composite_rule(edges, nodes_per_panel)


def legendre_matrix(u, M, start=1):
    """Normalized shifted Legendre values ``h_j(u)`` for ``j = start..M``.

    Returns shape ``(len(u), M - start + 1)``; three-term recurrence on
    ``t = 2u - 1``.
    """
    u = np.asarray(u, dtype=float)
    t = 2.0 * u - 1.0
    out = np.empty(u.shape + (M + 1,))
    out[..., 0] = 1.0
    if M >= 1:
        out[..., 1] = t
    for k in range(1, M):
        out[..., k + 1] = ((2 * k + 1) * t * out[..., k] - k * out[..., k - 1]) / (k + 1)
    out *= np.sqrt(2.0 * np.arange(M + 1) + 1.0)
    return out[..., start:]


def legendre_shifted_normalized(j, u):
    """``h_j(u)``, orthonormal on ``[0, 1]`` under Lebesgue measure."""
    if j < 0:
        raise ValueError("degree must be non-negative")
    arr = np.asarray(u, dtype=float)
    if np.any((arr < 0.0) | (arr > 1.0)) or np.any(np.isnan(arr)):
        raise DomainError("u must lie in [0, 1]")
    val = legendre_matrix(arr, j, start=j)[..., 0]
    return float(val) if np.ndim(u) == 0 else val


def inner_product(f, g, model, rule):
    """``sum_i w_i f(x_i) g(x_i) pdf(x_i)``, i.e. the inner product under ``model``."""
    x = rule.nodes
    fx = np.asarray(f(x), dtype=float)
    gx = np.asarray(g(x), dtype=float)
    for name, vals in (("f", fx), ("g", gx)):
        bad = ~np.isfinite(vals)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise EvaluationError(f"{name} is not finite at node x={x[i]!r}")
    return float(rule.weights @ (fx * gx * model.pdf(x)))


def weighted_gram(values_a, values_b, weights):
    """Outer-product inner products ``<a^T, b^T>`` from node values."""
    return (values_a * weights[:, None]).T @ values_b


def _check_symmetric(m, tol=1e-12):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if np.max(np.abs(m - m.T), initial=0.0) > tol * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (m + m.T)


def jacobi_eigh(m, tol=1e-14, max_sweeps=100):
    """Cyclic Jacobi eigendecomposition of a small symmetric matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvectors in columns.
    """
    a = _check_symmetric(m).copy()
    n = a.shape[0]
    v = np.eye(n)
    norm = np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * max(norm, 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    return np.diag(a).copy(), v


def principal_inverse_sqrt(m):
    """Symmetric ``S`` with ``S @ m @ S = I`` (principal root of ``m^-1``)."""
    m = _check_symmetric(m)
    if m.size == 0:
        return np.zeros((0, 0))
    w, v = jacobi_eigh(m)
    if w.max() <= 0 or w.min() <= 1e-12 * w.max():
        raise NotPositiveDefiniteError(
            f"matrix not positive definite (eigenvalues {w.min():.3g}..{w.max():.3g})"
        )
    s = (v / np.sqrt(w)) @ v.T
    return 0.5 * (s + s.T)


def cholesky(m):
    """Lower Cholesky factor; raises with the failing leading-minor index."""
    m = _check_symmetric(m)
    n = m.shape[0]
    L = np.zeros_like(m)
    for j in range(n):
        d = m[j, j] - L[j, :j] @ L[j, :j]
        if not d > 0.0:
            raise NotPositiveDefiniteError(
                f"leading minor {j + 1} is not positive definite", minor=j + 1
            )
        L[j, j] = np.sqrt(d)
        L[j + 1:, j] = (m[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def solve_spd(m, v):
    """Solve ``m x = v`` for SPD ``m`` by Cholesky factorization."""
    L = cholesky(m)
    v = np.asarray(v, dtype=float)
    n = L.shape[0]
    y = np.empty(n)
    for i in range(n):
        y[i] = (v[i] - L[i, :i] @ y[:i]) / L[i, i]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - L[i + 1:, i] @ x[i + 1:]) / L[i, i]
    return x
