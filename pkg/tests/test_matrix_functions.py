import numpy as np
import pytest
import scipy.linalg
from numpy.testing import assert_allclose

from src.exceptions import DomainError
from src.matrix_functions import (MatrixFunction, constant, encode_param, exponential, function_from_tag,
                                  linear, monomial, sqrt)


class TestBuiltins:
    def test_linear_scalar_and_matrix(self):
        f = linear(2.0, 1.0)
        assert f(3.0) == 7.0
        assert_allclose(f(np.diag([1.0, 2.0])), np.diag([3.0, 5.0]))

    def test_constant_ignores_argument(self):
        assert_allclose(constant(4.0)(np.ones((2, 2))), 4 * np.eye(2))

    def test_monomial_matrix_power(self, rng):
        S = rng.standard_normal((3, 3))
        assert_allclose(monomial(3)(S), S @ S @ S, atol=1e-12)

    def test_negative_monomial_rejected(self):
        with pytest.raises(ValueError):
            monomial(-1)

    def test_exponential_matches_expm(self, rng):
        S = rng.standard_normal((3, 3))
        assert_allclose(exponential(-0.5)(S), scipy.linalg.expm(-0.5 * S), atol=1e-12)

    def test_sqrt_derivative_at_one(self):
        d = sqrt(constant=1.0).derivatives(1.0, 2)
        assert_allclose(d, [2.0, 0.5], atol=1e-13)

    def test_sqrt_branch_cut(self):
        with pytest.raises(DomainError):
            sqrt()(-2.0)

    def test_sqrt_matrix_with_negative_eigenvalue(self):
        with pytest.raises(DomainError):
            sqrt().evaluate_matrix(np.diag([1.0, -1.0]), term=2)


class TestDerivatives:
    def test_exp_derivatives(self):
        d = exponential(2.0).derivatives(0.3, 4)
        assert_allclose(d, [2.0 ** j * np.exp(0.6) for j in range(4)], rtol=1e-12)

    def test_monomial_derivatives(self):
        assert_allclose(monomial(3).derivatives(2.0, 5), [8, 12, 12, 6, 0], atol=1e-12)

    def test_scalar_fast_path(self):
        assert monomial(2).derivatives(3.0, 1)[0] == 9.0


class TestEvaluateMatrix:
    def test_failure_reports_term(self):
        def broken(S):
            raise np.linalg.LinAlgError("boom")

        f = MatrixFunction('broken', lambda x: x, broken)
        with pytest.raises(DomainError) as excinfo:
            f.evaluate_matrix(np.eye(2), term=3)
        assert excinfo.value.term == 3

    def test_non_finite_result(self):
        f = MatrixFunction('inf', lambda x: x, lambda S: np.full_like(S, np.inf))
        with pytest.raises(DomainError):
            f.evaluate_matrix(np.eye(2))


class TestTags:
    def test_builtin_round_trip(self):
        for f in (linear(2.0, -1.0), monomial(3), exponential(-1.5), sqrt(1.0, 0.5), exponential(0.3 + 0.2j)):
            tag = {k: encode_param(v) for k, v in f.tag.items()}
            rebuilt = function_from_tag(tag)
            assert rebuilt.name == f.name
            assert rebuilt(0.7 + 0.1j) == pytest.approx(f(0.7 + 0.1j))

    def test_closure_has_no_tag(self):
        assert MatrixFunction('user', np.cos, scipy.linalg.cosm).tag is None

    def test_unknown_tag(self):
        with pytest.raises(ValueError):
            function_from_tag({'name': 'bessel'})
