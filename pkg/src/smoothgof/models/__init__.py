"""Parametric models, estimators and score-derived quantities."""

from .base import (
    EstimatorSpec,
    OrthonormalScore,
    ParametricModel,
    fisher_information,
    invert_cdf,
    orthonormal_score,
    psi_for,
)
from .estimation import fit_mle
from .families import (
    AsymmetricLaplace,
    ConvolvedLine,
    TruncatedLaplace,
    TruncatedNormal,
    Uniform,
    asym_laplace_equation,
    asym_laplace_model,
    convolved_line_model,
    fit_asym_laplace,
)
from .mixture import Mixture, mixture_model
from .registry import build_model, FAMILIES

__all__ = [
    "AsymmetricLaplace",
    "ConvolvedLine",
    "EstimatorSpec",
    "FAMILIES",
    "Mixture",
    "OrthonormalScore",
    "ParametricModel",
    "TruncatedLaplace",
    "TruncatedNormal",
    "Uniform",
    "asym_laplace_equation",
    "asym_laplace_model",
    "build_model",
    "convolved_line_model",
    "fisher_information",
    "fit_asym_laplace",
    "fit_mle",
    "invert_cdf",
    "mixture_model",
    "orthonormal_score",
    "psi_for",
]
