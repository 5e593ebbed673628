import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smoothgof.exceptions import DomainError, InvalidIntervalError, NotPositiveDefiniteError
from smoothgof.models import TruncatedNormal, Uniform
from smoothgof.numerics import (
    cholesky,
    gauss_legendre_rule,
    inner_product,
    jacobi_eigh,
    legendre_matrix,
    legendre_shifted_normalized,
    principal_inverse_sqrt,
    solve_spd,
    split_rule,
)


class TestQuadrature:
    def test_two_point_rule(self):
        rule = gauss_legendre_rule(1, 2, -1.0, 1.0)
        np.testing.assert_allclose(np.sort(rule.nodes), [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-15)
        np.testing.assert_allclose(rule.weights, [1.0, 1.0], atol=1e-15)

    @pytest.mark.parametrize("k", range(4))
    def test_two_point_exact_to_cubic(self, k):
        rule = gauss_legendre_rule(1, 2, -1.0, 1.0)
        exact = (1 - (-1) ** (k + 1)) / (k + 1)
        assert rule.integrate(rule.nodes ** k) == pytest.approx(exact, abs=1e-15)

    def test_square_on_unit_interval(self):
        rule = gauss_legendre_rule(32, 16, 0.0, 1.0)
        assert abs(rule.integrate(rule.nodes ** 2) - 1 / 3) < 1e-14

    @pytest.mark.parametrize("lo,hi", [(1.0, 1.0), (2.0, 1.0), (0.0, np.inf), (np.nan, 1.0)])
    def test_bad_interval(self, lo, hi):
        with pytest.raises(InvalidIntervalError):
            gauss_legendre_rule(4, 4, lo, hi)

    def test_split_rule_keeps_breakpoints_on_edges(self):
        rule = split_rule(-1.0, 1.0, breakpoints=(0.3,), panels=8, nodes_per_panel=4)
        # |x - 0.3| is piecewise linear, so a rule with a panel edge there is exact
        assert rule.integrate(np.abs(rule.nodes - 0.3)) == pytest.approx(1.09, abs=1e-14)

    def test_nodes_read_only(self):
        rule = gauss_legendre_rule(2, 3, 0.0, 1.0)
        with pytest.raises(ValueError):
            rule.nodes[0] = 0.0


class TestLegendre:
    def test_degree_zero_is_one(self):
        assert legendre_shifted_normalized(0, 0.37) == 1.0

    def test_degree_one_at_half(self):
        assert legendre_shifted_normalized(1, 0.5) == pytest.approx(0.0, abs=1e-15)

    def test_degree_two_at_zero(self):
        assert legendre_shifted_normalized(2, 0.0) == pytest.approx(np.sqrt(5.0), rel=1e-15)

    def test_closed_form_degree_two(self):
        u = np.linspace(0, 1, 11)
        np.testing.assert_allclose(legendre_shifted_normalized(2, u),
                                   np.sqrt(5) * (6 * u * u - 6 * u + 1), atol=1e-14)

    def test_outside_unit_interval(self):
        with pytest.raises(DomainError):
            legendre_shifted_normalized(1, 1.5)

    def test_orthonormal(self):
        rule = gauss_legendre_rule(8, 16, 0.0, 1.0)
        H = legendre_matrix(rule.nodes, 12, start=0)
        G = (H * rule.weights[:, None]).T @ H
        np.testing.assert_allclose(G, np.eye(13), atol=1e-13)


class TestInnerProduct:
    def test_constant_one(self, std_truncnorm):
        rule = std_truncnorm.quadrature_rule()
        one = lambda x: np.ones_like(x)
        assert abs(inner_product(one, one, std_truncnorm, rule) - 1.0) < 1e-10

    def test_composed_legendre(self):
        model = TruncatedNormal(1.0, 2.0, -10.0, 10.0)
        rule = model.quadrature_rule()
        h1 = lambda x: legendre_matrix(model.cdf(x), 1)[:, 0]
        assert abs(inner_product(h1, h1, model, rule) - 1.0) < 1e-8

    def test_uniform_identity(self, unit_uniform):
        rule = unit_uniform.quadrature_rule()
        ident = lambda x: x
        assert abs(inner_product(ident, ident, unit_uniform, rule) - 1 / 3) < 1e-12


class TestLinearAlgebra:
    def test_inverse_sqrt_identity(self):
        np.testing.assert_allclose(principal_inverse_sqrt(np.eye(3)), np.eye(3), atol=1e-15)

    def test_inverse_sqrt_diagonal(self):
        np.testing.assert_allclose(principal_inverse_sqrt(np.diag([4.0, 9.0])),
                                   np.diag([0.5, 1 / 3]), atol=1e-15)

    def test_inverse_sqrt_rejects_singular(self):
        with pytest.raises(NotPositiveDefiniteError):
            principal_inverse_sqrt(np.array([[1.0, 1.0], [1.0, 1.0]]))

    def test_solve_identity(self):
        v = np.array([1.0, -2.0, 3.0])
        np.testing.assert_allclose(solve_spd(np.eye(3), v), v)

    def test_solve_diagonal(self):
        np.testing.assert_allclose(solve_spd(np.diag([2.0, 5.0]), [2.0, 5.0]), [1.0, 1.0])

    def test_cholesky_reports_minor(self):
        with pytest.raises(NotPositiveDefiniteError) as err:
            cholesky(np.diag([1.0, -1.0, 2.0]))
        assert err.value.minor == 2

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2 ** 31))
    def test_spd_properties(self, n, seed):
        r = np.random.default_rng(seed)
        A = r.normal(size=(n, n))
        m = A @ A.T + n * np.eye(n)
        S = principal_inverse_sqrt(m)
        np.testing.assert_allclose(S @ m @ S, np.eye(n), atol=1e-10)
        np.testing.assert_allclose(S, S.T, atol=1e-14)
        v = r.normal(size=n)
        np.testing.assert_allclose(m @ solve_spd(m, v), v, atol=1e-9)
        w, V = jacobi_eigh(m)
        np.testing.assert_allclose(np.sort(w), np.linalg.eigvalsh(m), rtol=1e-12)
        np.testing.assert_allclose((V * w) @ V.T, m, atol=1e-10)
