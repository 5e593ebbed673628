"""Run configuration: TOML files with one table per concern.

Top-level keys: ``seed``, ``n``, ``replicates``, ``threads``, ``alphas``.
Tables: ``[basis]`` (kind, M), ``[statistic]`` (form, selections),
``[engine]`` (method), ``[model]`` or ``[targets.NAME]`` (hypothesized
models), ``[reference]``, ``[truth]``, ``[power]`` (r_outer, r_null,
bases) and ``[output]``.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .exceptions import ParameterError
from .models import build_model
from .stats import StatConfig
from .workflows import BASES, ENGINES


class ConfigError(ParameterError):
    """Malformed or inconsistent configuration."""


@dataclass
class RunConfig:
    raw: dict
    seed: int = 0
    n: int = 100
    replicates: int = 999
    threads: int = 1
    alphas: tuple = (0.05,)
    basis: str = "legendre"
    M: int = 6
    form: str = "unnormalized"
    selections: tuple = ("order", "subset")
    engine: str = "projected"
    targets: dict = field(default_factory=dict)
    reference: object = None
    truth: object = None
    power: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    @property
    def stats(self):
        return [StatConfig(self.form, self.M, s) for s in self.selections]


def _int(d, key, default, minimum=None):
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {v}")
    return v


def _model(spec, where):
    if not isinstance(spec, dict):
        raise ConfigError(f"[{where}] must be a table")
    try:
        return build_model(spec)
    except ParameterError as exc:
        raise ConfigError(f"[{where}] {exc}") from None


def parse_config(raw):
    """Validate a parsed TOML document and build the models it names."""
    cfg = RunConfig(raw=raw)
    cfg.seed = _int(raw, "seed", 0, 0)
    cfg.n = _int(raw, "n", 100, 1)
    cfg.replicates = _int(raw, "replicates", 999, 1)
    cfg.threads = _int(raw, "threads", 1, 1)
    alphas = raw.get("alphas", [0.05])
    if not isinstance(alphas, list) or not alphas or \
            not all(isinstance(a, (int, float)) and 0 < a < 1 for a in alphas):
        raise ConfigError(f"alphas must be a non-empty list of values in (0, 1), got {alphas!r}")
    cfg.alphas = tuple(float(a) for a in alphas)

    basis = raw.get("basis", {})
    cfg.basis = basis.get("kind", "legendre")
    if cfg.basis not in BASES:
        raise ConfigError(f"basis.kind must be one of {BASES}")
    cfg.M = _int(basis, "M", 6, 1)

    stat = raw.get("statistic", {})
    cfg.form = stat.get("form", "unnormalized")
    cfg.selections = tuple(stat.get("selections", ["order", "subset"]))
    try:
        cfg.stats
    except ParameterError as exc:
        raise ConfigError(f"[statistic] {exc}") from None

    cfg.engine = raw.get("engine", {}).get("method", "projected")
    if cfg.engine not in ENGINES:
        raise ConfigError(f"engine.method must be one of {ENGINES}")

    if "model" in raw:
        cfg.targets["model"] = _model(raw["model"], "model")
    for name, spec in raw.get("targets", {}).items():
        cfg.targets[name] = _model(spec, f"targets.{name}")
    if "reference" in raw:
        cfg.reference = _model(raw["reference"], "reference")
    if "truth" in raw:
        cfg.truth = _model(raw["truth"], "truth")
    if cfg.basis == "k2" and cfg.reference is None:
        raise ConfigError("basis.kind = 'k2' needs a [reference] model")

    power = dict(raw.get("power", {}))
    power["r_outer"] = _int(power, "r_outer", 1000, 1)
    power["r_null"] = _int(power, "r_null", cfg.replicates, 1)
    power["bases"] = tuple(power.get("bases", [cfg.basis]))
    if any(b not in BASES for b in power["bases"]):
        raise ConfigError(f"power.bases entries must be among {BASES}")
    cfg.power = power
    cfg.output = dict(raw.get("output", {}))
    return cfg


def load_config(path):
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(raw)
