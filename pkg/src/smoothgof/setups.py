"""Ready-made model configurations used by the examples, the CLI and the
acceptance suite."""

from __future__ import annotations

import numpy as np

from .models import (
    AsymmetricLaplace,
    ConvolvedLine,
    Mixture,
    TruncatedLaplace,
    TruncatedNormal,
    Uniform,
)

# -- asymmetric Laplace with only the skewness free --------------------------
ASYM_THETA, ASYM_SIGMA, ASYM_BETA0 = -10.0, 2.0, 0.1


def asym_laplace(beta=ASYM_BETA0):
    return AsymmetricLaplace(ASYM_THETA, ASYM_SIGMA, beta, free=("beta",))


# -- three-component mixtures on [-10, 10] -----------------------------------
MIX_SUPPORT = (-10.0, 10.0)


def truth_q():
    """Data-generating mixture 0.3 N(-5, 3) + 0.5 Laplace(5, 3) + 0.2 U, truncated."""
    lo, hi = MIX_SUPPORT
    return Mixture(
        [TruncatedNormal(-5, 3, lo, hi), TruncatedLaplace(5, 3, lo, hi), Uniform(lo, hi)],
        [0.3, 0.5, 0.2],
    )


def reference_truncnorm(mu=0.0, sigma=5.0):
    lo, hi = MIX_SUPPORT
    return TruncatedNormal(mu, sigma, lo, hi, free=("mu", "sigma"))


def target_g1(mu=-2.0, sigma=3.0):
    lo, hi = MIX_SUPPORT
    return Mixture(
        [TruncatedNormal(mu, sigma, lo, hi, free=("mu", "sigma")), Uniform(lo, hi)],
        [0.5, 0.5],
    )


def target_g2(mu=3.0, sigma=4.0):
    lo, hi = MIX_SUPPORT
    return Mixture(
        [TruncatedNormal(-5, 1, lo, hi), TruncatedNormal(mu, sigma, lo, hi, free=("mu", "sigma"))],
        [0.3, 0.7],
    )


def target_g3(w1=0.3, w2=0.3):
    lo, hi = MIX_SUPPORT
    return Mixture(
        [TruncatedNormal(-4, 1, lo, hi), TruncatedLaplace(4, 1, lo, hi), Uniform(lo, hi)],
        ["free", "free", "rest"],
        [w1, w2],
    )


def mixture_targets():
    return {"g1": target_g1(), "g2": target_g2(), "g3": target_g3()}


def fit_mixture_setup(data):
    """Maximum-likelihood fits of the reference and the three targets."""
    return reference_truncnorm().fit(data), {k: g.fit(data) for k, g in mixture_targets().items()}


def mixture_dataset(seed=2024, n=100):
    return truth_q().sample(np.random.default_rng(seed), n)


# -- emission-line spectrum on [1.65, 2.05] ----------------------------------
LINE_SUPPORT = (1.65, 2.05)
LINE_CENTERS = (1.78499, 1.85247, 1.94365)
LINE_SIGMA = 0.0025
LINE_BETA = (0.15, 0.1, 0.1)
REF_LINE_WIDTH = 0.05


def line_model(beta=LINE_BETA):
    """Uniform background plus three Moffat-convolved Gaussian lines; the
    free parameters are the three line intensities."""
    lo, hi = LINE_SUPPORT
    lines = [ConvolvedLine(m, LINE_SIGMA, lo, hi) for m in LINE_CENTERS]
    return Mixture(lines + [Uniform(lo, hi)], ["free"] * 3 + ["rest"], list(beta))


def line_reference(gamma=LINE_BETA):
    """Uniform plus truncated normals of width 0.05 at the known line centers."""
    lo, hi = LINE_SUPPORT
    comps = [TruncatedNormal(m, REF_LINE_WIDTH, lo, hi) for m in LINE_CENTERS]
    return Mixture(comps + [Uniform(lo, hi)], ["free"] * 3 + ["rest"], list(gamma))
