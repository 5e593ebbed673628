import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from smoothgof import SmoothTest, setups
from smoothgof.estimator import check_sample
from smoothgof.exceptions import ParameterError

LAPLACE_SPEC = {"family": "asymlaplace", "theta": -10.0, "sigma": 2.0, "beta": 0.1}


@pytest.fixture(scope="module")
def laplace_data():
    return setups.asym_laplace().sample(np.random.default_rng(31), 100)


@pytest.fixture(scope="module")
def fitted(laplace_data):
    return SmoothTest(LAPLACE_SPEC, M=10, n_replicates=499, random_state=3).fit(laplace_data)


class TestParams:
    def test_get_set_params(self):
        est = SmoothTest(LAPLACE_SPEC, M=4)
        params = est.get_params()
        assert params["M"] == 4 and params["model"] is LAPLACE_SPEC
        est.set_params(selection="subset")
        assert est.selection == "subset"
        assert clone(est).get_params()["selection"] == "subset"

    @pytest.mark.parametrize("kw", [dict(basis="fourier"), dict(engine="montecarlo"),
                                    dict(alpha=1.5), dict(random_state=-1), dict(model=None),
                                    dict(model="normal"), dict(form="raw")])
    def test_invalid(self, laplace_data, kw):
        est = SmoothTest(**({"model": LAPLACE_SPEC} | kw))
        with pytest.raises(ParameterError):
            est.fit(laplace_data)


class TestFit:
    def test_attributes(self, fitted):
        assert fitted.n_features_in_ == 1
        assert fitted.null_.R == 499
        assert 0 < fitted.pvalue_ <= 1
        assert fitted.reject_ == (fitted.pvalue_ <= fitted.alpha)
        assert 1 <= fitted.chosen_[0] <= 10
        assert fitted.statistic_ == pytest.approx(
            max(np.cumsum(fitted.components_ ** 2) / np.arange(1, 11)))

    def test_transform(self, fitted, laplace_data):
        Z = fitted.transform(laplace_data.reshape(-1, 1))
        assert Z.shape == (100, 10)
        np.testing.assert_allclose(Z.sum(axis=0) / 10.0, fitted.components_, atol=1e-10)

    def test_not_fitted(self, laplace_data):
        with pytest.raises(NotFittedError):
            SmoothTest(LAPLACE_SPEC).transform(laplace_data)

    def test_reproducible(self, laplace_data, fitted):
        again = clone(fitted).fit(laplace_data)
        np.testing.assert_array_equal(again.null_.values, fitted.null_.values)

    def test_k2_with_model_objects(self):
        data = setups.mixture_dataset()
        est = SmoothTest(setups.target_g2(), M=6, basis="k2",
                         reference=setups.reference_truncnorm(), n_replicates=199)
        est.fit(data)
        assert max(est.identity_residuals_.values()) < 1e-7
        assert est.transform(data[:5]).shape == (5, 6)


class TestValidation:
    def test_column_vector(self):
        np.testing.assert_array_equal(check_sample([[1.0], [2.0]]), [1.0, 2.0])

    def test_two_columns(self):
        with pytest.raises(ValueError):
            check_sample(np.ones((3, 2)))

    def test_non_finite(self):
        with pytest.raises(ValueError):
            check_sample([1.0, np.inf])
