import csv
import json

import numpy as np
import pytest

from smoothgof import setups
from smoothgof.basis import LegendreBasis
from smoothgof.exceptions import EstimationError, FormatError, ParameterError, SimulationIntegrityError, StateError
from smoothgof.models import Uniform
from smoothgof.resample import (
    MAGIC,
    NullCache,
    NullDistribution,
    cache_key,
    export_csv,
    ks_two_sample,
    load_null,
    monte_carlo_null,
    p_value,
    parametric_bootstrap,
    projected_bootstrap,
    qq_pairs,
    replicate_rng,
    replicate_uniforms,
    save_null,
)
from smoothgof.stats import StatConfig

ORDER = StatConfig("unnormalized", 2, "order")
SUBSET = StatConfig("unnormalized", 2, "subset")


def _null(values, method="projected", seed=0):
    return NullDistribution(values, method, seed, "abc", ORDER, 10)


def _hand_trace(seed, n):
    """Order and subset statistics of replicate 0 under U(0, 1) with M = 2,
    using the closed-form shifted Legendre polynomials."""
    u = replicate_rng(seed, 0).random(n)
    h1 = np.sqrt(3) * (2 * u - 1)
    h2 = np.sqrt(5) * (6 * u * u - 6 * u + 1)
    v = np.array([h1.sum(), h2.sum()]) / np.sqrt(n)
    order = max(v[0] ** 2, (v[0] ** 2 + v[1] ** 2) / 2)
    subset = max(v ** 2)
    return order, subset


class TestStreams:
    def test_reproducible(self):
        a = replicate_rng(3, 17).random(5)
        np.testing.assert_array_equal(a, replicate_rng(3, 17).random(5))
        assert not np.array_equal(a, replicate_rng(3, 18).random(5))

    def test_uniform_rows(self):
        U = replicate_uniforms(9, [4, 2], 3)
        np.testing.assert_array_equal(U[1], replicate_rng(9, 2).random(3))

    def test_negative(self):
        with pytest.raises(ParameterError):
            replicate_rng(-1, 0)


class TestEngines:
    @pytest.fixture
    def uniform(self):
        model = Uniform(0.0, 1.0)
        return model, LegendreBasis(model, 2)

    def test_projected_hand_trace(self, uniform):
        model, basis = uniform
        order, subset = projected_bootstrap(model, basis, [ORDER, SUBSET], 5, 1, 42)
        expected = _hand_trace(42, 5)
        assert order.values[0] == pytest.approx(expected[0], rel=1e-12)
        assert subset.values[0] == pytest.approx(expected[1], rel=1e-12)

    @pytest.mark.parametrize("engine", [parametric_bootstrap, monte_carlo_null])
    def test_refit_hand_trace(self, uniform, engine):
        model, basis = uniform
        stub = lambda m, x: m
        null = engine(model, lambda m: LegendreBasis(m, 2), ORDER, 5, 1, 42, estimator=stub)
        assert null.values[0] == pytest.approx(_hand_trace(42, 5)[0], rel=1e-12)
        assert null.method == ("parametric" if engine is parametric_bootstrap else "montecarlo")

    def test_single_stat_returns_single_null(self, uniform):
        assert isinstance(projected_bootstrap(*uniform, ORDER, 5, 3, 0), NullDistribution)

    def test_projected_threads_deterministic(self):
        model = setups.asym_laplace()
        basis = LegendreBasis(model, 10)
        stat = StatConfig("unnormalized", 10, "order")
        one = projected_bootstrap(model, basis, stat, 50, 2500, 7, threads=1)
        many = projected_bootstrap(model, basis, stat, 50, 2500, 7, threads=3)
        again = projected_bootstrap(model, basis, stat, 50, 2500, 7, threads=1)
        np.testing.assert_array_equal(one.values, many.values)
        np.testing.assert_array_equal(one.values, again.values)

    def test_parametric_threads_deterministic(self):
        model = setups.asym_laplace()
        stat = StatConfig("unnormalized", 10, "subset")
        build = lambda m: LegendreBasis(m, 10)
        one = parametric_bootstrap(model, build, stat, 50, 1100, 7, threads=1)
        many = parametric_bootstrap(model, build, stat, 50, 1100, 7, threads=2)
        np.testing.assert_array_equal(one.values, many.values)

    def test_oracle_estimator_matches_projected(self):
        model = setups.asym_laplace()
        basis = LegendreBasis(model, 10)
        stat = StatConfig("unnormalized", 10, "order")
        proj = projected_bootstrap(model, basis, stat, 100, 20_000, 1)
        mc = monte_carlo_null(model, lambda m: basis, stat, 100, 20_000, 2,
                              estimator=lambda m, x: m)
        assert ks_two_sample(proj, mc) <= 0.02

    def test_failures_within_budget(self, uniform):
        model, _ = uniform
        calls = {}

        def flaky(m, x):
            # the first attempt of replicate streams starting below 0.005 fails
            key = float(x[0])
            calls[key] = calls.get(key, 0) + 1
            if x[0] < 0.005 and calls[key] == 1:
                raise EstimationError("stub failure")
            return m

        null = parametric_bootstrap(model, lambda m: LegendreBasis(m, 2), ORDER, 5, 1000, 3,
                                    estimator=flaky)
        assert null.R == 1000
        assert 0 < null.info["fit_failures"] <= 10

    def test_failure_budget_exceeded(self, uniform):
        model, _ = uniform

        def broken(m, x):
            raise EstimationError("always fails")

        with pytest.raises(SimulationIntegrityError) as err:
            parametric_bootstrap(model, lambda m: LegendreBasis(m, 2), ORDER, 5, 20, 3,
                                 estimator=broken)
        assert err.value.failures == 80

    def test_sizes(self, uniform):
        with pytest.raises(ParameterError):
            projected_bootstrap(*uniform, ORDER, 0, 10, 0)
        with pytest.raises(ParameterError):
            projected_bootstrap(*uniform, StatConfig(M=3), 5, 10, 0)


class TestSummaries:
    def test_p_value_extremes(self):
        null = _null(np.arange(1.0, 100.0))
        assert p_value(0.0, null) == 1.0
        assert p_value(1000.0, null) == pytest.approx(1 / 100)

    def test_p_value_median(self):
        R = 99
        null = _null(np.arange(1.0, R + 1))
        assert p_value(50.0, null) == pytest.approx(((R + 1) / 2 + 1) / (R + 1))

    def test_ks_examples(self):
        assert ks_two_sample([1.0, 2.0, 3.0], [1.5, 2.5, 3.5]) == pytest.approx(1 / 3)
        assert ks_two_sample([1.0, 2.0], [1.0, 2.0]) == 0.0
        assert ks_two_sample([1.0, 2.0], [5.0, 6.0]) == 1.0

    def test_ks_matches_scipy(self, rng):
        from scipy.stats import ks_2samp

        a, b = rng.normal(size=300).round(1), rng.normal(0.2, size=170).round(1)
        assert ks_two_sample(a, b) == pytest.approx(ks_2samp(a, b).statistic, abs=1e-14)

    def test_null_validation(self):
        with pytest.raises(StateError):
            _null([])
        with pytest.raises(StateError):
            _null([1.0, np.nan])
        with pytest.raises(ParameterError):
            _null([1.0], method="magic")
        null = _null([3.0, 1.0])
        assert list(null.values) == [1.0, 3.0]
        with pytest.raises(ValueError):
            null.values[0] = 2.0


class TestCacheFiles:
    def test_round_trip(self, tmp_path):
        null = _null(np.random.default_rng(0).random(37), seed=5)
        path = save_null(null, tmp_path / "a.null")
        back = load_null(path)
        np.testing.assert_array_equal(back.values, null.values)
        assert back.header() == null.header()

    def test_byte_identical_rerun(self, tmp_path):
        model = Uniform(0, 1)
        basis = LegendreBasis(model, 2)
        for name in ("a", "b"):
            save_null(projected_bootstrap(model, basis, ORDER, 5, 100, 9), tmp_path / name)
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()

    def test_version_mismatch(self, tmp_path):
        path = save_null(_null([1.0, 2.0]), tmp_path / "a.null")
        raw = path.read_bytes()
        path.write_bytes(MAGIC[:6] + b"\x09" + raw[7:])
        with pytest.raises(FormatError, match="version"):
            load_null(path)

    def test_header_version_mismatch(self, tmp_path):
        path = save_null(_null([1.0, 2.0]), tmp_path / "a.null")
        head, payload = path.read_bytes()[len(MAGIC):].split(b"\n", 1)
        meta = json.loads(head)
        meta["version"] = 99
        path.write_bytes(MAGIC + json.dumps(meta).encode() + b"\n" + payload)
        with pytest.raises(FormatError):
            load_null(path)

    @pytest.mark.parametrize("damage", ["magic", "truncate", "header"])
    def test_corrupt(self, tmp_path, damage):
        path = save_null(_null([1.0, 2.0, 3.0]), tmp_path / "a.null")
        raw = path.read_bytes()
        if damage == "magic":
            raw = b"NOTNULL" + raw[7:]
        elif damage == "truncate":
            raw = raw[:-4]
        else:
            raw = MAGIC + b"{broken\n" + raw[-24:]
        path.write_bytes(raw)
        with pytest.raises(FormatError):
            load_null(path)

    def test_csv_export(self, tmp_path):
        path = export_csv(_null([2.0, 1.0, 4.0, 3.0]), tmp_path / "n.csv")
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["index", "value", "ecdf"]
        assert [float(r[1]) for r in rows[1:]] == [1.0, 2.0, 3.0, 4.0]
        assert float(rows[-1][2]) == 1.0

    def test_qq_pairs(self):
        a = _null(np.random.default_rng(1).random(50))
        b = _null(np.random.default_rng(2).random(500))
        p, qa, qb = qq_pairs(a, a)
        np.testing.assert_array_equal(qa, qb)
        p, qa, qb = qq_pairs(a, b)
        assert len(p) == len(qa) == len(qb) == 999

    def test_cache_hits(self, tmp_path):
        cache = NullCache(str(tmp_path / "cache"))
        keys = [cache_key("h", ORDER, 10, 5, 1, "projected")]
        runs = []

        def run():
            runs.append(1)
            return [_null([1.0, 2.0])]

        first = cache.get_or_run(keys, run)
        second = cache.get_or_run(keys, run)
        assert len(runs) == 1 and cache.hits == 1 and cache.misses == 1
        np.testing.assert_array_equal(first[0].values, second[0].values)

    def test_cache_key_sensitivity(self):
        base = cache_key("h", ORDER, 10, 5, 1, "projected")
        assert base != cache_key("h", ORDER, 10, 5, 2, "projected")
        assert base != cache_key("h", SUBSET, 10, 5, 1, "projected")
        assert base != cache_key("h", ORDER, 10, 5, 1, "parametric")
