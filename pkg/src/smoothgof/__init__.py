"""Data-driven smooth goodness-of-fit tests with projected-bootstrap and
K2-transformed (asymptotically distribution-free) bases."""

__version__ = "0.1.0"

from .basis import LegendreBasis, empirical_process, estimate_coefficients, process_values
from .estimator import SmoothTest
from .k2 import K2Basis, k2_basis
from .resample import (
    NullDistribution,
    ks_two_sample,
    monte_carlo_null,
    p_value,
    parametric_bootstrap,
    projected_bootstrap,
)
from .stats import StatConfig, critical_value, order_selection, score_stat, subset_selection

__all__ = [
    "K2Basis",
    "LegendreBasis",
    "NullDistribution",
    "SmoothTest",
    "StatConfig",
    "critical_value",
    "empirical_process",
    "estimate_coefficients",
    "k2_basis",
    "ks_two_sample",
    "monte_carlo_null",
    "order_selection",
    "p_value",
    "parametric_bootstrap",
    "process_values",
    "projected_bootstrap",
    "score_stat",
    "subset_selection",
]
