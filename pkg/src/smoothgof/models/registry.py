"""Build models from plain dictionaries (parsed config sections)."""

from __future__ import annotations

from ..exceptions import ParameterError
from .families import AsymmetricLaplace, ConvolvedLine, TruncatedLaplace, TruncatedNormal, Uniform
from .mixture import Mixture


def _support(spec, support):
    lo = spec.get("lo", support[0] if support else None)
    hi = spec.get("hi", support[1] if support else None)
    if lo is None or hi is None:
        raise ParameterError(f"{spec.get('family')}: support bounds lo/hi required")
    return float(lo), float(hi)


def _truncnorm(spec, support):
    lo, hi = _support(spec, support)
    return TruncatedNormal(spec["mu"], spec["sigma"], lo, hi, free=tuple(spec.get("free", ())))


def _trunclaplace(spec, support):
    lo, hi = _support(spec, support)
    return TruncatedLaplace(spec["mu"], spec["scale"], lo, hi, free=tuple(spec.get("free", ())))


def _uniform(spec, support):
    return Uniform(*_support(spec, support))


def _asymlaplace(spec, support):
    return AsymmetricLaplace(spec["theta"], spec["sigma"], spec["beta"],
                             free=tuple(spec.get("free", ("beta",))))


def _line(spec, support):
    lo, hi = _support(spec, support)
    return ConvolvedLine(spec["mu"], spec["sigma"], lo, hi,
                         spec.get("scale", 0.05), spec.get("power", 2.5))


def _mixture(spec, support):
    if "lo" in spec or "hi" in spec:
        support = _support(spec, support)
    comps, weights = [], []
    if not spec.get("components"):
        raise ParameterError("mixture: at least one component required")
    for c in spec["components"]:
        c = dict(c)
        if "weight" not in c:
            raise ParameterError("mixture component without a 'weight'")
        weights.append(c.pop("weight"))
        comps.append(build_model(c, support))
    free_vals = spec.get("free_weights")
    return Mixture(comps, weights, free_vals)


FAMILIES = {
    "truncnorm": _truncnorm,
    "trunclaplace": _trunclaplace,
    "uniform": _uniform,
    "asymlaplace": _asymlaplace,
    "line": _line,
    "mixture": _mixture,
}


def build_model(spec, support=None):
    """Instantiate a model from ``{"family": name, ...}``.

    Shared ``support`` (lo, hi) is used when a section omits ``lo``/``hi``.
    """
    family = spec.get("family")
    if family not in FAMILIES:
        raise ParameterError(f"unknown model family {family!r}; known: {sorted(FAMILIES)}")
    try:
        return FAMILIES[family](spec, support)
    except KeyError as exc:
        raise ParameterError(f"{family}: missing parameter {exc.args[0]!r}") from None
