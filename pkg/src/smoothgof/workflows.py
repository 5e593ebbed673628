"""End-to-end procedures: one goodness-of-fit test, power studies and
size-calibration studies."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .basis import LegendreBasis, process_values
from .exceptions import ParameterError, SmoothGofError
from .k2 import k2_basis
from .resample import (
    NullCache,
    cache_key,
    monte_carlo_null,
    p_value,
    parametric_bootstrap,
    projected_bootstrap,
    replicate_rng,
)
from .stats import StatConfig, critical_value, evaluate, statistic_many

log = logging.getLogger(__name__)

BASES = ("legendre", "k2")
ENGINES = ("projected", "parametric", "montecarlo")


def _check_choice(name, value, allowed):
    if value not in allowed:
        raise ParameterError(f"{name} must be one of {allowed}, got {value!r}")


def fit_or_keep(model, data):
    return model.fit(data) if model.param_dim else model


def build_basis(kind, model, M, reference=None):
    """Basis at ``model`` plus the (model, basis) pair the null is simulated on."""
    _check_choice("basis", kind, BASES)
    if kind == "legendre":
        b = LegendreBasis(model, M)
        return b, model, b
    if reference is None:
        raise ParameterError("the k2 basis needs a reference model")
    b = k2_basis(model, reference, M)
    return b, reference, b.reference_basis


@dataclass
class TestOutcome:
    model: object
    reference: object
    basis: object
    components: np.ndarray
    results: dict
    nulls: dict
    pvalues: dict
    critical: dict
    identity_residuals: dict = field(default_factory=dict)
    cache_hits: int = 0


def _null_builder(kind, target, M):
    if kind == "legendre":
        return lambda m: LegendreBasis(m, M)
    # K2 nulls live on the reference side; refitting moves the reference
    return lambda r: k2_basis(target, r, M).reference_basis


def simulate_null(kind, null_model, null_basis, stats, n, R, seed, engine="projected",
                  truth=None, target=None, threads=1, cache=None):
    """Simulate (or load) the null distributions for ``stats``."""
    _check_choice("engine", engine, ENGINES)
    M = null_basis.size
    tag = f"{kind}/{null_basis.kind}/M={M}"
    if kind == "k2" and target is not None:
        tag += f"/p={target.param_dim}"
    source = truth if engine == "montecarlo" else null_model
    if source is None:
        raise ParameterError("the montecarlo engine needs a true model")
    keys = [cache_key(source.model_hash, s, n, R, seed, engine, tag) for s in stats]

    def run():
        if engine == "projected":
            return projected_bootstrap(null_model, null_basis, stats, n, R, seed, threads)
        builder = _null_builder(kind, target, M)
        fn = parametric_bootstrap if engine == "parametric" else monte_carlo_null
        return fn(source, builder, stats, n, R, seed, threads=threads)

    cache = cache or NullCache(None)
    return cache.get_or_run(keys, run)


def run_test(model, data, stats, basis="legendre", M=None, reference=None,
             engine="projected", R=999, seed=0, alphas=(0.05,), threads=1, cache=None,
             truth=None, refit=True):
    """Fit, build the basis, evaluate the statistics and attach null-based p-values."""
    stats = [stats] if isinstance(stats, StatConfig) else list(stats)
    M = M or max(s.M for s in stats)
    data = model.check_data(np.asarray(data, dtype=float).ravel())
    fitted = fit_or_keep(model, data) if refit else model
    ref = None
    if basis == "k2":
        if reference is None:
            raise ParameterError("the k2 basis needs a reference model")
        ref = fit_or_keep(reference, data) if refit else reference
    B, null_model, null_basis = build_basis(basis, fitted, M, ref)
    v = process_values(B, data)
    results = {s.descriptor: evaluate(v, B.gram, s) for s in stats}
    cache = cache or NullCache(None)
    hits0 = cache.hits
    nulls = simulate_null(basis, null_model, null_basis, stats, data.size, R, seed, engine,
                          truth=truth, target=fitted, threads=threads, cache=cache)
    nulls = dict(zip([s.descriptor for s in stats], nulls))
    pvals = {k: p_value(results[k].value, nd) for k, nd in nulls.items()}
    crit = {k: {str(a): critical_value(nd, a) for a in alphas} for k, nd in nulls.items()}
    resid = B.identity_residuals() if basis == "k2" else {}
    return TestOutcome(fitted, ref, B, v, results, nulls, pvals, crit, resid,
                       cache.hits - hits0)


# -- power study ---------------------------------------------------------------

def _stat_value(B, data, stat):
    v = process_values(B, data, check=False)
    return float(statistic_many(v[None, :], B.gram, stat)[0])


def power_study(truth, targets, stats, alphas, n, R_outer, R_null, seed, M,
                reference=None, bases=BASES, pilot=None, threads=1, progress=None):
    """Rejection rates of every (target, basis, statistic) over datasets from ``truth``.

    Critical values come from projected-bootstrap nulls at the fit to one
    ``pilot`` dataset (default: a dataset drawn from ``truth`` with stream
    index ``R_outer``): under the target with the Legendre basis, under the
    reference with the K2 basis (one null shared by every target).
    Returns a list of row dicts.
    """
    stats = list(stats)
    if pilot is None:
        pilot = truth.quantile(replicate_rng(seed, R_outer).random(n))
    crit = {}
    ref_pilot = fit_or_keep(reference, pilot) if "k2" in bases else None
    if "k2" in bases:
        # the reference null depends on the target only through its
        # parameter count (score extension), so simulate once per count
        by_dim = {}
        for name, g in targets.items():
            p = g.param_dim
            if p not in by_dim:
                B0 = k2_basis(fit_or_keep(g, pilot), ref_pilot, M)
                by_dim[p] = projected_bootstrap(ref_pilot, B0.reference_basis, stats, n,
                                                R_null, seed + 1, threads)
            for s, nd in zip(stats, by_dim[p]):
                crit[(name, "k2", s.descriptor)] = nd
    if "legendre" in bases:
        for name, g in targets.items():
            gp = fit_or_keep(g, pilot)
            nulls = projected_bootstrap(gp, LegendreBasis(gp, M), stats, n, R_null,
                                        seed + 1, threads)
            for s, nd in zip(stats, nulls):
                crit[(name, "legendre", s.descriptor)] = nd
    cvals = {(k, a): critical_value(nd, a) for k, nd in crit.items() for a in alphas}

    rejections = {k: np.zeros(len(alphas)) for k in crit}
    failures = {name: 0 for name in targets}
    for r in range(R_outer):
        x = truth.quantile(np.clip(replicate_rng(seed, r).random(n), 1e-16, 1 - 1e-16))
        try:
            ref = fit_or_keep(reference, x) if "k2" in bases else None
        except SmoothGofError:
            ref = None
        for name, g in targets.items():
            try:
                gf = fit_or_keep(g, x)
                built = {}
                if "legendre" in bases:
                    built["legendre"] = LegendreBasis(gf, M)
                if "k2" in bases:
                    if ref is None:
                        raise ParameterError("reference fit failed")
                    built["k2"] = k2_basis(gf, ref, M)
            except SmoothGofError:
                failures[name] += 1
                continue
            for kind, B in built.items():
                for s in stats:
                    t = _stat_value(B, x, s)
                    key = (name, kind, s.descriptor)
                    rejections[key] += [t >= cvals[(key, a)] for a in alphas]
        if progress:
            progress(r + 1, R_outer)

    rows = []
    for (name, kind, desc), rej in rejections.items():
        used = R_outer - failures[name]
        for a, count in zip(alphas, rej):
            power = count / used if used else float("nan")
            rows.append({"null_model": name, "basis": kind, "statistic": desc,
                         "alpha": a, "power": power,
                         "se": float(np.sqrt(power * (1 - power) / used)) if used else float("nan"),
                         "datasets": used, "fit_failures": failures[name]})
    return rows


# -- size calibration ----------------------------------------------------------

def size_study(model, stats, alphas, n, runs, R_null, seed, M, engine="projected",
               basis="legendre", reference=None):
    """Rejection rates when the data come from ``model`` itself.

    Each run draws a dataset (stream ``seed``, index ``run``), fits it and
    obtains a fresh null at the fit with seed ``seed + 1 + run``.
    """
    stats = list(stats)
    rej = {s.descriptor: np.zeros(len(alphas)) for s in stats}
    for r in range(runs):
        x = model.quantile(np.clip(replicate_rng(seed, r).random(n), 1e-16, 1 - 1e-16))
        out = run_test(model, x, stats, basis=basis, M=M, reference=reference, engine=engine,
                       R=R_null, seed=seed + 1 + r, alphas=alphas)
        for s in stats:
            # p <= alpha is the randomization-exact rejection rule
            rej[s.descriptor] += [out.pvalues[s.descriptor] <= a for a in alphas]
    return {k: dict(zip(map(str, alphas), v / runs)) for k, v in rej.items()}
