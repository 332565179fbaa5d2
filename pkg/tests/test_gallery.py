import mpmath
import numpy as np
import pytest
import scipy.linalg
from numpy.testing import assert_allclose, assert_array_equal

from src.exceptions import DomainError, UnknownName
from src.gallery import (bench_problem, chebyshev_nodes, gallery_entries, gallery_names, nep_gallery,
                         newton_interp_matfun)
from src.matrix_functions import monomial
from src.nep_types import Dep, Pep, Spmf
from src.newton_solvers import mslp


class TestNepGallery:
    def test_names(self):
        assert gallery_names() == ['dep0', 'pep0', 'neuron0', 'sqrt_spmf', 'paper_spmf_5x5']

    def test_unknown_name_lists_valid_names(self):
        with pytest.raises(UnknownName) as excinfo:
            nep_gallery('waveguide')
        assert 'dep0' in str(excinfo.value)
        assert excinfo.value.valid == gallery_names()

    def test_many_terms_only_for_benchmarks(self):
        with pytest.raises(UnknownName):
            nep_gallery('many_terms')
        spmf = bench_problem('many_terms', {'m': 5, 'n': 4, 'density': 0.5})
        assert spmf.n == 4 and spmf.num_terms == 5

    def test_many_terms_exponents_count_from_one(self):
        spmf = bench_problem('many_terms', {'m': 4, 'n': 3, 'density': 0.5})
        assert spmf.functions[0].tag['coeff'] == 0 and spmf.functions[1].tag['coeff'] == 1
        assert spmf.functions[2].tag['scale'] == pytest.approx(3 ** (1 / 6))
        assert spmf.functions[3].tag['scale'] == pytest.approx(4 ** (1 / 6))

    def test_dep0_deterministic(self):
        a, b = nep_gallery('dep0'), nep_gallery('dep0')
        assert isinstance(a, Dep)
        assert_array_equal(a.A0, b.A0)
        assert_array_equal(a.delay_matrices[0], b.delay_matrices[0])
        assert a.delays == (1.0,)

    def test_seed_changes_matrices(self):
        assert not np.array_equal(nep_gallery('pep0', seed=1).coeffs[0], nep_gallery('pep0', seed=2).coeffs[0])

    def test_parameter_overrides(self):
        assert nep_gallery('dep0', n=3).n == 3
        assert nep_gallery('pep0', {'n': '4'}).n == 4
        assert isinstance(nep_gallery('pep0'), Pep)
        with pytest.raises(ValueError):
            nep_gallery('dep0', size=3)

    def test_spmf_5x5_shape(self):
        spmf = nep_gallery('paper_spmf_5x5')
        assert isinstance(spmf, Spmf)
        assert spmf.n == 5 and spmf.num_terms == 3
        assert spmf.functions[1](0.0) == pytest.approx(1.0)
        assert_array_equal(spmf.matrices[2], np.flipud(np.ones((5, 5)) + np.eye(5)))

    def test_neuron_hand_assembly(self):
        params = {'kappa': 0.3, 'beta': -0.7, 'a1': 1.2, 'a2': 2.0, 'tau1': 0.1, 'tau2': 0.4, 'tau3': 1.0}
        neuron = nep_gallery('neuron0', params)
        expected = np.array([[-0.3 - 0.7, 1.2], [2.0, -0.3 - 0.7]])
        assert_allclose(neuron.compute_Mder(0.0, 0), expected, atol=1e-15)
        assert neuron.delays == (0.1, 0.4, 1.0)

    def test_neuron_default_parameters_from_config(self):
        entry = gallery_entries()['neuron0']
        assert entry.parameters['a2'] == pytest.approx(2.34)
        assert entry.parameters['tau3'] == pytest.approx(1.5)

    def test_neuron_known_eigenvalue(self):
        neuron = nep_gallery('neuron0')
        outcome = mslp(neuron, sigma=0.3, tol=1e-12)
        assert outcome.lam.real == pytest.approx(0.308866, abs=1e-6)
        M = neuron.compute_Mder(outcome.lam, 0)
        assert np.linalg.svd(M, compute_uv=False)[-1] < 1e-10 * np.linalg.norm(M)

    def test_sqrt_spmf_branch_cut(self):
        spmf = nep_gallery('sqrt_spmf')
        with pytest.raises(DomainError):
            spmf.compute_Mder(-1.0, 0)
        assert np.all(np.isfinite(spmf.compute_Mder(1.0, 2)))


class TestNewtonInterpolation:
    def test_quadratic_exact(self):
        interp = newton_interp_matfun(lambda x: x ** 2, [0.0, 1.0, 2.0])
        assert interp(1.5) == pytest.approx(2.25, abs=1e-14)

    def test_matrix_evaluator_on_diagonal(self):
        interp = newton_interp_matfun(mpmath.exp, chebyshev_nodes(8))
        S = np.diag([0.5, -0.25, 0.1])
        assert_allclose(np.diag(interp(S)), [interp(0.5), interp(-0.25), interp(0.1)], atol=1e-14)
        assert_allclose(interp(S) - np.diag(np.diag(interp(S))), 0, atol=1e-15)

    def test_reproduces_node_values(self):
        nodes = chebyshev_nodes(10, 0.0, 2.0)
        interp = newton_interp_matfun(mpmath.sin, nodes)
        for x in nodes:
            assert abs(interp(x) - np.sin(x)) <= 1e-12 * max(1.0, abs(np.sin(x)))

    def test_exp_on_chebyshev_nodes(self):
        interp = newton_interp_matfun(mpmath.exp, chebyshev_nodes(12, 0.0, 1.0))
        xs = np.linspace(0.0, 1.0, 201)
        assert max(abs(interp(x) - np.exp(x)) for x in xs) < 1e-9

    def test_double_precision_callable(self):
        interp = newton_interp_matfun(np.exp, chebyshev_nodes(12, 0.0, 1.0))
        assert abs(interp(0.37) - np.exp(0.37)) < 1e-9

    def test_matrix_function_surrogate(self, rng):
        S = rng.standard_normal((3, 3))
        S = 0.1 * (S + S.T)
        interp = newton_interp_matfun(mpmath.exp, chebyshev_nodes(16))
        assert_allclose(interp(S), scipy.linalg.expm(S), atol=1e-10)

    def test_polynomial_surrogate_matches_exact_spmf(self, rng):
        A, B = rng.standard_normal((2, 3, 3))
        interp = newton_interp_matfun(lambda x: x ** 3, [-1.0, 0.0, 0.5, 1.0])
        exact = Spmf([A, B], [monomial(0), monomial(3)])
        surrogate = Spmf([A, B], [monomial(0), interp.as_function('cube')])
        for k in range(4):
            assert_allclose(surrogate.compute_Mder(0.4, k), exact.compute_Mder(0.4, k), atol=1e-12)
        S = np.array([[0.2, 1.0], [0.0, -0.3]])
        V = rng.standard_normal((3, 2))
        assert_allclose(surrogate.compute_MM(S, V), exact.compute_MM(S, V), atol=1e-12)

    def test_rejects_duplicate_nodes(self):
        with pytest.raises(ValueError):
            newton_interp_matfun(mpmath.exp, [0.0, 1.0, 1.0])

    def test_rejects_single_node(self):
        with pytest.raises(ValueError):
            newton_interp_matfun(mpmath.exp, [0.0])

    def test_rejects_low_precision(self):
        with pytest.raises(ValueError):
            newton_interp_matfun(mpmath.exp, [0.0, 1.0], precision=64)
