"""Null-distribution engines (parametric bootstrap, projected bootstrap,
Monte Carlo), p-values, ECDF distances and the on-disk null cache.

Each replicate draws from its own counter-based stream
``Philox(key=seed, counter=(0, 0, 0, index))``, so results do not depend on
how replicates are split across workers. All sampling goes through the
model quantile function; two engines run with the same seed therefore use
the same uniforms replicate by replicate.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .basis import process_values
from .exceptions import FormatError, ParameterError, SimulationIntegrityError, SmoothGofError, StateError
from .stats import StatConfig, statistic_many

log = logging.getLogger(__name__)

METHODS = ("parametric", "projected", "montecarlo")
MAX_RETRIES = 3
FAILURE_BUDGET = 0.01
CHUNK = 1000


@dataclass(frozen=True)
class NullDistribution:
    """Sorted simulated statistic values plus their provenance."""

    values: np.ndarray
    method: str
    seed: int
    model_hash: str
    stat: StatConfig
    n: int
    basis: str = ""
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float))
        if v.ndim != 1 or v.size < 1:
            raise StateError("a null distribution needs at least one value")
        if not np.all(np.isfinite(v)):
            raise StateError("null distribution contains non-finite values")
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def R(self):
        return self.values.size

    def header(self):
        return {"format": FORMAT_TAG, "version": FORMAT_VERSION, "seed": int(self.seed),
                "R": int(self.R), "n": int(self.n), "method": self.method,
                "model_hash": self.model_hash, "statistic": self.stat.to_dict(),
                "basis": self.basis}

    def quantile(self, levels):
        """Linear-interpolated quantiles (used for QQ export)."""
        return np.quantile(self.values, levels)


# -- random streams ------------------------------------------------------------

def replicate_rng(seed, index):
    """Generator for replicate ``index`` of master ``seed``."""
    if seed < 0 or index < 0:
        raise ParameterError("seed and replicate index must be non-negative")
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, 0, int(index)]))


def replicate_uniforms(seed, indices, n):
    """``(len(indices), n)`` uniforms, row ``r`` from stream ``indices[r]``."""
    return np.vstack([replicate_rng(seed, i).random(n) for i in indices]) if len(indices) \
        else np.zeros((0, n))


def _draw(model, u):
    return model.quantile(np.clip(u, 1e-16, 1 - 1e-16))


def _chunks(R, size=CHUNK):
    return [range(s, min(s + size, R)) for s in range(0, R, size)]


def _run_chunks(fn, R, threads):
    chunks = _chunks(R)
    if threads and threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            parts = list(pool.map(fn, chunks))
    else:
        parts = [fn(c) for c in chunks]
    return parts


def _as_list(stats):
    if isinstance(stats, StatConfig):
        return [stats], True
    stats = list(stats)
    if not stats:
        raise ParameterError("at least one statistic is required")
    return stats, False


def _basis_tag(basis):
    return f"{basis.kind}/M={basis.size}"


# -- engines -------------------------------------------------------------------

def projected_bootstrap(model, basis, stats, n, R, seed, threads=1):
    """Sample from ``model`` and evaluate the process with the fixed ``basis``.

    Returns one :class:`NullDistribution` per statistic (or a single one if
    ``stats`` is a single :class:`StatConfig`).
    """
    stats, single = _as_list(stats)
    _check_sizes(n, R)
    M = max(s.M for s in stats)
    if M > basis.size:
        raise ParameterError(f"statistic needs M={M} but the basis has {basis.size}")

    def work(idx):
        X = _draw(model, replicate_uniforms(seed, idx, n))
        V = process_values(basis, X, check=False)
        return np.column_stack([statistic_many(V, basis.gram, s) for s in stats])

    vals = np.vstack(_run_chunks(work, R, threads))
    out = [NullDistribution(vals[:, k], "projected", seed, model.model_hash, s, n,
                            _basis_tag(basis)) for k, s in enumerate(stats)]
    return out[0] if single else out


def _default_estimator(model, data):
    return model.fit(data)


def _refit_engine(method, model, basis_builder, stats, n, R, seed, estimator, threads):
    stats, single = _as_list(stats)
    _check_sizes(n, R)
    estimator = estimator or _default_estimator
    tag = []

    def one(i):
        rng = replicate_rng(seed, i)
        failures = 0
        for _ in range(MAX_RETRIES + 1):
            x = _draw(model, rng.random(n))
            try:
                fitted = estimator(model, x)
                basis = basis_builder(fitted)
                v = process_values(basis, x, check=False)
                if not tag:
                    tag.append(_basis_tag(basis))
                return [float(statistic_many(v[None, :], basis.gram, s)[0]) for s in stats], failures
            except SmoothGofError:
                failures += 1
        return None, failures

    def work(idx):
        return [one(i) for i in idx]

    results = [r for part in _run_chunks(work, R, threads) for r in part]
    failures = sum(f for _, f in results)
    lost = sum(v is None for v, _ in results)
    if lost or failures > FAILURE_BUDGET * R:
        raise SimulationIntegrityError(
            f"{failures} fit failures over {R} replicates ({lost} replicates exhausted "
            f"{MAX_RETRIES} retries)", failures=failures, attempts=R + failures)
    vals = np.array([v for v, _ in results])
    info = {"fit_failures": failures}
    out = [NullDistribution(vals[:, k], method, seed, model.model_hash, s, n,
                            tag[0] if tag else "", info) for k, s in enumerate(stats)]
    return out[0] if single else out


def parametric_bootstrap(model, basis_builder, stats, n, R, seed, estimator=None, threads=1):
    """Sample from the fitted ``model``; refit and rebuild the basis every replicate.

    ``estimator(model, data)`` returns the re-fitted model (default
    ``model.fit``); ``basis_builder(model)`` returns a basis at that fit.
    """
    return _refit_engine("parametric", model, basis_builder, stats, n, R, seed, estimator,
                         threads)


def monte_carlo_null(true_model, basis_builder, stats, n, R, seed, estimator=None, threads=1):
    """Like :func:`parametric_bootstrap` but sampling from the true model."""
    return _refit_engine("montecarlo", true_model, basis_builder, stats, n, R, seed,
                         estimator, threads)


def _check_sizes(n, R):
    if n < 1 or R < 1:
        raise ParameterError(f"n and R must be >= 1 (got n={n}, R={R})")


# -- summaries -----------------------------------------------------------------

def _values(null):
    v = np.asarray(getattr(null, "values", null), dtype=float)
    if v.size == 0:
        raise StateError("empty null sample")
    return np.sort(v)


def p_value(observed, null):
    """``(1 + #{values >= observed}) / (R + 1)``."""
    v = _values(null)
    count = v.size - np.searchsorted(v, observed, side="left")
    return float((1 + count) / (v.size + 1))


def ks_two_sample(a, b):
    """Sup distance between the two empirical CDFs (merge scan)."""
    a, b = _values(a), _values(b)
    na, nb = a.size, b.size
    # walk the pooled sorted points once, stepping each ECDF
    pooled = np.concatenate([a, b])
    order = np.argsort(pooled, kind="mergesort")
    steps = np.where(order < na, 1.0 / na, -1.0 / nb)
    diff = np.cumsum(steps)
    # only compare after the last of a run of tied values
    srt = pooled[order]
    last = np.r_[srt[1:] != srt[:-1], True]
    return float(np.max(np.abs(diff[last])))


# -- cache file ----------------------------------------------------------------

FORMAT_TAG = "smoothgof-null"
FORMAT_VERSION = 1
MAGIC = b"SGNULL\x01\n"


def _ensure_parent(path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)


def save_null(null, path):
    """Write the versioned header line and the little-endian float64 payload."""
    header = json.dumps(null.header(), sort_keys=True).encode("utf-8")
    _ensure_parent(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header + b"\n")
        fh.write(np.asarray(null.values, dtype="<f8").tobytes())
    os.replace(tmp, path)
    return path


def load_null(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic[:6] != MAGIC[:6]:
            raise FormatError(f"{path}: not a null-cache file")
        if magic != MAGIC:
            raise FormatError(f"{path}: unsupported cache version {magic[6]}")
        try:
            header = json.loads(fh.readline().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}: corrupt header ({exc})") from None
        payload = fh.read()
    if header.get("format") != FORMAT_TAG or header.get("version") != FORMAT_VERSION:
        raise FormatError(f"{path}: format {header.get('format')} v{header.get('version')} "
                          f"does not match {FORMAT_TAG} v{FORMAT_VERSION}")
    R = header["R"]
    if len(payload) != 8 * R:
        raise FormatError(f"{path}: expected {R} values, found {len(payload) / 8:g}")
    values = np.frombuffer(payload, dtype="<f8").astype(float)
    stat = StatConfig(**header["statistic"])
    return NullDistribution(values, header["method"], header["seed"], header["model_hash"],
                            stat, header["n"], header.get("basis", ""))


def export_csv(null, path):
    R = null.R
    _ensure_parent(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "value", "ecdf"])
        for i, v in enumerate(null.values):
            w.writerow([i + 1, repr(float(v)), repr((i + 1) / R)])
    return path


def qq_pairs(a, b, levels=999):
    """Paired quantiles at ``levels`` evenly spaced probabilities in (0, 1)."""
    p = np.arange(1, levels + 1) / (levels + 1)
    return p, a.quantile(p), b.quantile(p)


def cache_key(model_hash, stat, n, R, seed, method, basis=""):
    blob = json.dumps([model_hash, stat.descriptor, int(n), int(R), int(seed), method, basis])
    return hashlib.sha256(blob.encode()).hexdigest()[:24]


class NullCache:
    """Directory of null-cache files keyed by simulation provenance."""

    def __init__(self, directory):
        self.directory = directory
        self.hits = 0
        self.misses = 0
        if directory:
            os.makedirs(directory, exist_ok=True)

    def path(self, key):
        return os.path.join(self.directory, f"{key}.null")

    def get_or_run(self, keys, run):
        """Return cached nulls for ``keys``; otherwise call ``run()`` (which
        must return nulls in key order), store them and return them."""
        if self.directory and all(os.path.exists(self.path(k)) for k in keys):
            self.hits += len(keys)
            for k in keys:
                log.info("null cache hit %s", k)
            return [load_null(self.path(k)) for k in keys]
        self.misses += len(keys)
        nulls = run()
        if self.directory:
            for k, nd in zip(keys, nulls):
                save_null(nd, self.path(k))
                log.info("null cache store %s", k)
        return nulls
