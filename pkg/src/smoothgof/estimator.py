"""scikit-learn style front end for the smooth test."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ParameterError
from .models import ParametricModel, build_model
from .stats import StatConfig
from .workflows import BASES, ENGINES, run_test


def _as_model(spec, name):
    if spec is None:
        return None
    if isinstance(spec, ParametricModel):
        return spec
    if isinstance(spec, dict):
        return build_model(spec)
    raise ParameterError(f"{name} must be a model or a model spec dict, got {type(spec).__name__}")


def check_sample(X):
    """Validate one univariate sample given as ``(n,)`` or ``(n, 1)``."""
    X = check_array(X, ensure_2d=False, dtype=np.float64, ensure_all_finite=True)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature, got {X.shape[1]} columns")
        X = X[:, 0]
    return X


class SmoothTest(TransformerMixin, BaseEstimator):
    """Data-driven smooth goodness-of-fit test of a parametric model.

    ``fit`` estimates the model, builds the residualized basis (composed
    Legendre, or K2-transformed from ``reference``), evaluates the
    statistic and simulates its null. ``transform`` maps observations to
    the residual basis functions at the fitted parameters.

    Fitted attributes: ``model_``, ``reference_``, ``basis_``,
    ``components_`` (process values), ``statistic_``, ``chosen_``,
    ``null_``, ``pvalue_``, ``critical_value_``, ``reject_``.
    """

    def __init__(self, model=None, M=6, basis="legendre", reference=None,
                 form="unnormalized", selection="order", engine="projected",
                 n_replicates=999, alpha=0.05, random_state=0, n_jobs=1):
        self.model = model
        self.M = M
        self.basis = basis
        self.reference = reference
        self.form = form
        self.selection = selection
        self.engine = engine
        self.n_replicates = n_replicates
        self.alpha = alpha
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _validate_params(self):
        if self.basis not in BASES:
            raise ParameterError(f"basis must be one of {BASES}")
        if self.engine not in ENGINES or self.engine == "montecarlo":
            raise ParameterError("engine must be 'projected' or 'parametric'")
        if not 0 < self.alpha < 1:
            raise ParameterError("alpha must lie in (0, 1)")
        if not isinstance(self.random_state, (int, np.integer)) or self.random_state < 0:
            raise ParameterError("random_state must be a non-negative integer seed")
        model = _as_model(self.model, "model")
        if model is None:
            raise ParameterError("a model is required")
        return model, _as_model(self.reference, "reference"), \
            StatConfig(self.form, self.M, self.selection)

    def fit(self, X, y=None):
        model, reference, stat = self._validate_params()
        X = check_sample(X)
        out = run_test(model, X, [stat], basis=self.basis, M=self.M, reference=reference,
                       engine=self.engine, R=self.n_replicates, seed=int(self.random_state),
                       alphas=(self.alpha,), threads=self.n_jobs)
        key = stat.descriptor
        self.model_ = out.model
        self.reference_ = out.reference
        self.basis_ = out.basis
        self.components_ = out.components
        self.statistic_ = out.results[key].value
        self.chosen_ = out.results[key].chosen
        self.null_ = out.nulls[key]
        self.pvalue_ = out.pvalues[key]
        self.critical_value_ = out.critical[key][str(self.alpha)]
        self.reject_ = bool(self.pvalue_ <= self.alpha)
        self.identity_residuals_ = out.identity_residuals
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        X = check_sample(X)
        self.model_.check_data(X)
        return self.basis_.residual(X)
