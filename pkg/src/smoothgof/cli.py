"""Command-line interface.

Subcommands: gof-test, simulate-null, power-study, k2-check, qq-export.
Exit codes: 0 ok, 1 usage/config, 2 data, 3 numeric/model, 4 integrity.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, load_config
from .exceptions import (
    DataError,
    FormatError,
    SimulationIntegrityError,
    SmoothGofError,
    SupportViolationError,
)
from .k2 import k2_basis
from .resample import NullCache, export_csv, load_null, qq_pairs, save_null
from .workflows import build_basis, fit_or_keep, power_study, run_test, simulate_null

log = logging.getLogger("smoothgof")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC, EXIT_INTEGRITY = 0, 1, 2, 3, 4
IDENTITY_TOL = 1e-7


class UsageError(Exception):
    pass


class IntegrityFailure(Exception):
    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


# -- I/O helpers ---------------------------------------------------------------

def read_data(path):
    """One observation per line; ``#`` starts a comment; blank lines skipped."""
    values = []
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                try:
                    v = float(text)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: cannot parse {text!r} as a number") from None
                if not np.isfinite(v):
                    raise DataError(f"{path}:{lineno}: non-finite value {text!r}")
                values.append(v)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    if not values:
        raise DataError(f"{path}: no observations")
    return np.array(values)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        # JSON has no infinities; unbounded supports are written as strings
        return obj if np.isfinite(obj) else repr(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def dump_report(report):
    """Canonical JSON text; parse + dump reproduces it byte for byte."""
    return json.dumps(_jsonable(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def _apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "replicates", None) is not None:
        cfg.replicates = args.replicates
        cfg.power["r_null"] = args.replicates
    if getattr(args, "threads", None) is not None:
        cfg.threads = args.threads
    return cfg


def _targets(cfg):
    if not cfg.targets:
        raise ConfigError("no [model] or [targets.*] section in the configuration")
    return cfg.targets


def _fit_summary(model, data):
    return {"family": model.family, "free": list(model.free),
            "estimate": [float(p) for p in model.params],
            "loglik": float(np.sum(model.logpdf(data))),
            "describe": model.describe()}


def _summarize_identities(res):
    worst = max(res, key=res.get) if res else None
    return {"max": float(res[worst]) if worst else 0.0, "worst": worst,
            "residuals": {k: float(v) for k, v in res.items()}}


# -- commands ------------------------------------------------------------------

def cmd_gof_test(args):
    cfg = _apply_overrides(load_config(args.config), args)
    if not args.data:
        raise UsageError("gof-test needs --data")
    data = read_data(args.data)
    cache = NullCache(args.cache_dir)
    report = {"command": "gof-test", "version": __version__, "config": cfg.raw,
              "data": {"path": os.path.abspath(args.data), "n": int(data.size)},
              "seed": cfg.seed, "replicates": cfg.replicates, "engine": cfg.engine,
              "basis": {"kind": cfg.basis, "M": cfg.M}, "tests": {}}
    for name, model in _targets(cfg).items():
        out = run_test(model, data, cfg.stats, basis=cfg.basis, M=cfg.M,
                       reference=cfg.reference, engine=cfg.engine, R=cfg.replicates,
                       seed=cfg.seed, alphas=cfg.alphas, threads=cfg.threads, cache=cache,
                       truth=cfg.truth)
        entry = {"fit": _fit_summary(out.model, data), "statistics": {}}
        if out.reference is not None:
            entry["reference_fit"] = _fit_summary(out.reference, data)
            entry["identity_residuals"] = _summarize_identities(out.identity_residuals)
        for key, res in out.results.items():
            entry["statistics"][key] = {
                "observed": res.value,
                "chosen": list(res.chosen),
                "components": [float(c) for c in res.components],
                "p_value": out.pvalues[key],
                "critical_values": out.critical[key],
                "reject": {str(a): bool(out.pvalues[key] <= a) for a in cfg.alphas},
                "null": {"R": out.nulls[key].R, "method": out.nulls[key].method,
                         "model_hash": out.nulls[key].model_hash,
                         "basis": out.nulls[key].basis},
            }
            if args.null_csv:
                sel = key.split("/")[0]
                export_csv(out.nulls[key], f"{args.null_csv}.{name}.{sel}.csv")
        report["tests"][name] = entry
    report["cache"] = {"dir": args.cache_dir, "hits": cache.hits, "misses": cache.misses}
    log.info("cache hits=%d misses=%d", cache.hits, cache.misses)
    _write(args.out, dump_report(report))
    return EXIT_OK


def cmd_simulate_null(args):
    """Simulate the configured null (fitting to --data first when given)."""
    cfg = _apply_overrides(load_config(args.config), args)
    data = read_data(args.data) if args.data else None
    name, model = next(iter(_targets(cfg).items()))
    fitted = fit_or_keep(model, data) if data is not None else model
    ref = None
    if cfg.basis == "k2":
        ref = fit_or_keep(cfg.reference, data) if data is not None else cfg.reference
    _, null_model, null_basis = build_basis(cfg.basis, fitted, cfg.M, ref)
    n = int(data.size) if data is not None else cfg.n
    cache = NullCache(args.cache_dir)
    nulls = simulate_null(cfg.basis, null_model, null_basis, cfg.stats, n, cfg.replicates,
                          cfg.seed, cfg.engine, truth=cfg.truth, target=fitted,
                          threads=cfg.threads, cache=cache)
    prefix = args.out or "null"
    written = []
    for s, nd in zip(cfg.stats, nulls):
        path = f"{prefix}.{s.selection}.null"
        save_null(nd, path)
        export_csv(nd, f"{prefix}.{s.selection}.csv")
        written.append(path)
    log.info("wrote %s (cache hits=%d misses=%d)", ", ".join(written), cache.hits, cache.misses)
    return EXIT_OK


def _wide_rows(rows, alphas):
    stats = sorted({(r["basis"], r["statistic"]) for r in rows})
    header = ["H0"] + [f"alpha={a} {b}:{s}" for a in alphas for b, s in stats]
    table = {}
    for r in rows:
        table.setdefault(r["null_model"], {})[(r["alpha"], r["basis"], r["statistic"])] = r["power"]
    out = []
    for name, d in table.items():
        out.append([name] + [d.get((a, b, s), "") for a in alphas for b, s in stats])
    return header, out


def cmd_power_study(args):
    cfg = _apply_overrides(load_config(args.config), args)
    if cfg.truth is None:
        raise ConfigError("power-study needs a [truth] model")
    bases = cfg.power["bases"]
    if "k2" in bases and cfg.reference is None:
        raise ConfigError("k2 power needs a [reference] model")
    r_outer = cfg.power["r_outer"]

    def progress(done, total):
        if done % max(1, total // 10) == 0:
            log.info("power study %d/%d datasets", done, total)

    rows = power_study(cfg.truth, _targets(cfg), cfg.stats, cfg.alphas, cfg.n, r_outer,
                       cfg.power["r_null"], cfg.seed, cfg.M, reference=cfg.reference,
                       bases=bases, threads=cfg.threads, progress=progress)
    out = args.out or "power.csv"
    fields = ["null_model", "basis", "statistic", "alpha", "power", "se", "datasets",
              "fit_failures"]
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)
    header, wide = _wide_rows(rows, cfg.alphas)
    with open(os.path.splitext(out)[0] + "_wide.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(wide)
    return EXIT_OK


def cmd_k2_check(args):
    cfg = _apply_overrides(load_config(args.config), args)
    if cfg.reference is None:
        raise ConfigError("k2-check needs a [reference] model")
    data = read_data(args.data) if args.data else None
    ref = fit_or_keep(cfg.reference, data) if data is not None else cfg.reference
    results = {}
    for name, model in _targets(cfg).items():
        target = fit_or_keep(model, data) if data is not None else model
        res = k2_basis(target, ref, cfg.M).identity_residuals()
        results[name] = _summarize_identities(res)
    worst = max(r["max"] for r in results.values())
    report = {"command": "k2-check", "version": __version__, "tolerance": IDENTITY_TOL,
              "M": cfg.M, "max_residual": worst, "passed": worst < IDENTITY_TOL,
              "targets": results}
    _write(args.out, dump_report(report))
    if worst >= IDENTITY_TOL:
        raise IntegrityFailure(f"operator identity residual {worst:.3g} exceeds {IDENTITY_TOL}")
    return EXIT_OK


def cmd_qq_export(args):
    a, b = load_null(args.null_a), load_null(args.null_b)
    p, qa, qb = qq_pairs(a, b, args.levels)
    out = args.out or "qq.csv"
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "value_a", "value_b"])
        for row in zip(p, qa, qb):
            w.writerow([repr(float(x)) for x in row])
    return EXIT_OK


# -- entry point ---------------------------------------------------------------

def build_parser():
    parser = _Parser(prog="smoothgof", description="Data-driven smooth goodness-of-fit tests.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, data=True):
        p.add_argument("--config", required=True, help="TOML run configuration")
        if data:
            p.add_argument("--data", help="observations, one per line")
        p.add_argument("--out", help="output path (report, prefix or table)")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--replicates", type=int, help="override the null replicate count")
        p.add_argument("--threads", type=int, help="worker threads for the engines")
        p.add_argument("--cache-dir", help="directory of cached null distributions")

    p = sub.add_parser("gof-test", help="fit, test and report p-values")
    common(p)
    p.add_argument("--null-csv", help="prefix for CSV exports of the null ECDFs")
    p.set_defaults(func=cmd_gof_test)

    p = sub.add_parser("simulate-null", help="simulate and store a null distribution")
    common(p)
    p.set_defaults(func=cmd_simulate_null)

    p = sub.add_parser("power-study", help="rejection rates over datasets from a true model")
    common(p, data=False)
    p.set_defaults(func=cmd_power_study)

    p = sub.add_parser("k2-check", help="operator-identity residuals of the K2 basis")
    common(p)
    p.set_defaults(func=cmd_k2_check)

    p = sub.add_parser("qq-export", help="paired quantiles of two stored nulls")
    p.add_argument("null_a")
    p.add_argument("null_b")
    p.add_argument("--out", help="CSV path")
    p.add_argument("--levels", type=int, default=999, help="number of quantile levels")
    p.set_defaults(func=cmd_qq_export)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    for flag in ("seed", "replicates", "threads"):
        v = getattr(args, flag, None)
        if v is not None and v < (0 if flag == "seed" else 1):
            parser.error(f"--{flag} out of range: {v}")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"smoothgof: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, SupportViolationError) as exc:
        print(f"smoothgof: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FormatError as exc:
        print(f"smoothgof: format error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SimulationIntegrityError, IntegrityFailure) as exc:
        print(f"smoothgof: integrity failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except SmoothGofError as exc:
        print(f"smoothgof: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"smoothgof: I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
