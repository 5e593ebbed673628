"""Smooth-test statistics and the data-driven order/subset selection rules.

Every function accepts either one vector of process values ``v`` (shape
``(M,)``) or a stack of replicates (shape ``(R, M)``); the stacked forms
are what the resampling engines call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np

from .exceptions import ComplexityGuardError, ParameterError, StateError
from .numerics import cholesky, solve_spd

FORMS = ("normalized", "unnormalized")
SELECTIONS = ("fixed-m", "order", "subset")
MAX_ENUM_M = 20


@dataclass(frozen=True)
class StatConfig:
    form: str = "unnormalized"
    M: int = 6
    selection: str = "order"
    fixed_m: int | None = None

    def __post_init__(self):
        if self.form not in FORMS:
            raise ParameterError(f"form must be one of {FORMS}, got {self.form!r}")
        if self.selection not in SELECTIONS:
            raise ParameterError(f"selection must be one of {SELECTIONS}, got {self.selection!r}")
        if self.M < 1:
            raise ParameterError("M must be >= 1")
        if self.selection == "fixed-m":
            if self.fixed_m is None or not 1 <= self.fixed_m <= self.M:
                raise ParameterError(f"fixed_m must lie in 1..{self.M}")

    @property
    def descriptor(self):
        sel = f"fixed-m={self.fixed_m}" if self.selection == "fixed-m" else self.selection
        return f"{sel}/{self.form}/M={self.M}"

    def to_dict(self):
        return {"form": self.form, "M": self.M, "selection": self.selection,
                "fixed_m": self.fixed_m}


@dataclass(frozen=True)
class StatResult:
    value: float
    chosen: tuple
    components: np.ndarray = field(repr=False)

    def to_dict(self):
        return {"value": self.value, "chosen": list(self.chosen),
                "components": [float(c) for c in self.components]}


def _prep(v, gram, form):
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    V = np.atleast_2d(v)
    M = V.shape[1]
    if form == "normalized":
        if gram is None:
            raise ParameterError("normalized form needs the Gram matrix")
        gram = np.asarray(gram, dtype=float)
        if gram.shape[0] < M:
            raise ParameterError(f"Gram matrix {gram.shape} too small for {M} components")
        gram = gram[:M, :M]
    return V, gram, single


def score_stat(v, gram=None, form="unnormalized"):
    """``v^T gram^{-1} v`` (normalized) or ``sum v_j^2`` (unnormalized)."""
    if form not in FORMS:
        raise ParameterError(f"unknown form {form!r}")
    V, gram, single = _prep(v, gram, form)
    if form == "unnormalized":
        out = np.sum(V * V, axis=1)
    else:
        out = np.array([row @ solve_spd(gram, row) for row in V])
    return float(out[0]) if single else out


def _prefix_stats(V, gram, form):
    """``S_m`` for m = 1..M on every row, shape ``(R, M)``."""
    if form == "unnormalized":
        return np.cumsum(V * V, axis=1)
    # leading blocks of a Cholesky factor are the factors of the leading
    # blocks, so S_m is the prefix sum of squares of L^{-1} v
    L = cholesky(gram)
    W = np.linalg.solve(L, V.T).T
    return np.cumsum(W * W, axis=1)


def order_selection_many(V, gram=None, form="unnormalized"):
    """Order-selection values and chosen orders for a stack of replicates."""
    V, gram, _ = _prep(V, gram, form)
    ratios = _prefix_stats(V, gram, form) / np.arange(1, V.shape[1] + 1)
    idx = np.argmax(ratios, axis=1)  # first maximum, i.e. smallest m on ties
    return ratios[np.arange(len(V)), idx], idx + 1


def order_selection(v, gram=None, form="unnormalized"):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise ParameterError("order_selection expects a non-empty vector")
    val, m = order_selection_many(v[None, :], gram, form)
    return StatResult(float(val[0]), (int(m[0]),), v.copy())


@lru_cache(maxsize=None)
def lex_subsets(M):
    """All nonempty subsets of ``range(M)`` in lexicographic order."""
    subsets = [s for k in range(1, M + 1) for s in combinations(range(M), k)]
    return tuple(sorted(subsets))


def _subset_fast(V):
    # prefix means of the descending-sorted squares; their maximum is the
    # largest single square, attained first by the lowest index holding it
    sq = V * V
    order = np.argsort(-sq, axis=1, kind="stable")
    srt = np.take_along_axis(sq, order, axis=1)
    means = np.cumsum(srt, axis=1) / np.arange(1, V.shape[1] + 1)
    k = np.argmax(means, axis=1)
    vals = means[np.arange(len(V)), k]
    chosen = [tuple(sorted(order[r, : k[r] + 1])) for r in range(len(V))]
    return vals, chosen


def _subset_enumerate(V, gram, form):
    M = V.shape[1]
    subsets = lex_subsets(M)
    vals = np.empty((len(V), len(subsets)))
    for s, B in enumerate(subsets):
        VB = V[:, B]
        if form == "unnormalized":
            q = np.sum(VB * VB, axis=1)
        else:
            q = np.einsum("ri,ri->r", VB, np.linalg.solve(gram[np.ix_(B, B)], VB.T).T)
        vals[:, s] = q / len(B)
    idx = np.argmax(vals, axis=1)  # lexicographically smallest maximizer
    return vals[np.arange(len(V)), idx], [subsets[i] for i in idx]


def subset_selection_many(V, gram=None, form="unnormalized", method="auto"):
    """Subset-selection values (and 0-based chosen subsets) for stacked rows.

    ``method='auto'`` takes the sorting fast path for the unnormalized form
    and full enumeration otherwise; ``'enumerate'`` forces enumeration.
    """
    V, gram, _ = _prep(V, gram, form)
    M = V.shape[1]
    if form == "unnormalized" and method == "auto":
        return _subset_fast(V)
    if M > MAX_ENUM_M:
        raise ComplexityGuardError(
            f"subset enumeration over M={M} > {MAX_ENUM_M} components refused"
        )
    if form == "normalized":
        cholesky(gram)  # fail early with the offending minor
    return _subset_enumerate(V, gram, form)


def subset_selection(v, gram=None, form="unnormalized", method="auto"):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise ParameterError("subset_selection expects a non-empty vector")
    vals, chosen = subset_selection_many(v[None, :], gram, form, method)
    return StatResult(float(vals[0]), tuple(int(j) + 1 for j in chosen[0]), v.copy())


def statistic_many(V, gram, config):
    """Statistic values only, one per row of ``V`` (first ``M`` columns)."""
    V = np.atleast_2d(np.asarray(V, dtype=float))[:, : config.M]
    if config.selection == "order":
        return order_selection_many(V, gram, config.form)[0]
    if config.selection == "subset":
        return subset_selection_many(V, gram, config.form)[0]
    m = config.fixed_m
    return _prefix_stats(V, None if gram is None else np.asarray(gram)[: config.M, : config.M],
                         config.form)[:, m - 1]


def evaluate(v, gram, config):
    """Statistic of one process vector as a :class:`StatResult`."""
    v = np.asarray(v, dtype=float)[: config.M]
    if config.selection == "order":
        return order_selection(v, gram, config.form)
    if config.selection == "subset":
        return subset_selection(v, gram, config.form)
    m = config.fixed_m
    g = None if gram is None else np.asarray(gram)[:m, :m]
    return StatResult(score_stat(v[:m], g, config.form), tuple(range(1, m + 1)), v.copy())


def critical_value(null, alpha):
    """Higher empirical ``1 - alpha`` quantile of a null sample."""
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    values = np.sort(np.asarray(getattr(null, "values", null), dtype=float))
    R = values.size
    if R == 0:
        raise StateError("critical value of an empty null sample")
    k = max(1, math.ceil((1.0 - alpha) * R - 1e-9))
    return float(values[min(k, R) - 1])
