import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.gallery import many_terms, nep_gallery
from src.matrix_functions import MatrixFunction, constant, exponential, linear, sqrt
from src.nep_types import (DerSpmf, Dep, Pep, Spmf, SumNep, dep_mder, dep_mm, load_problem, make_derspmf,
                           nep_from_dict, nep_to_dict, pep_mder, save_problem, spmf_mder, spmf_mm)
from tests.helpers import random_dep, random_pep, random_spmf


class TestPep:
    def test_derivative_orders(self, rng):
        A1, A2, A3 = rng.standard_normal((3, 3, 3))
        pep = Pep([A1, A2, A3])
        assert_allclose(pep_mder(pep, 2.0, 1), A2 + 4 * A3, atol=1e-13)
        assert_allclose(pep_mder(pep, 2.0, 2), 2 * A3, atol=1e-13)
        assert np.all(pep_mder(pep, 2.0, 3) == 0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            Pep([np.eye(2), np.eye(3)])

    def test_to_spmf_agrees(self, rng):
        pep = random_pep(rng, 3, degree=3)
        spmf = pep.to_spmf()
        for k in range(4):
            assert_allclose(spmf.compute_Mder(0.4 - 0.1j, k), pep.compute_Mder(0.4 - 0.1j, k), atol=1e-12)


class TestDep:
    def test_zero_delays(self, rng):
        A0, A1, A2 = rng.standard_normal((3, 3, 3))
        dep = Dep(A0, [(0.0, A1), (0.0, A2)])
        assert_allclose(dep_mder(dep, 0.0, 0), A0 + A1 + A2, atol=1e-14)

    def test_second_derivative_single_delay(self, rng):
        A0, A1 = rng.standard_normal((2, 3, 3))
        dep = Dep(A0, [(1.0, A1)])
        assert_allclose(dep_mder(dep, 0.0, 2), A1, atol=1e-14)

    def test_mm_scalar(self, rng):
        A0, A1 = rng.standard_normal((2, 3, 3))
        dep = Dep(A0, [(1.0, A1)])
        v = rng.standard_normal(3)
        assert_allclose(dep_mm(dep, np.zeros((1, 1)), v)[:, 0], A0 @ v + A1 @ v, atol=1e-14)

    def test_negative_delay_rejected(self, rng):
        with pytest.raises(ValueError):
            Dep(np.eye(2), [(-1.0, np.eye(2))])

    def test_as_spmf_same_outputs(self, rng):
        dep = random_dep(rng, 4, delays=(1.0, 0.3))
        spmf = dep.to_spmf()
        S = np.array([[0.2, 0.1], [0.0, -0.4]])
        V = rng.standard_normal((4, 2))
        for k in range(4):
            assert_allclose(spmf.compute_Mder(-0.2, k), dep.compute_Mder(-0.2, k), atol=1e-12)
        W = rng.standard_normal((4, 3))
        assert_allclose(spmf.compute_Mlincomb(0.5j, W), dep.compute_Mlincomb(0.5j, W), atol=1e-12)
        assert_allclose(spmf.compute_MM(S, V), dep.compute_MM(S, V), atol=1e-12)


class TestSpmf:
    def test_identity_function_coefficient(self, rng):
        A, B = rng.standard_normal((2, 3, 3))
        spmf = Spmf([A, B], [linear(), constant()])
        assert_allclose(spmf_mder(spmf, 1.3, 1), A, atol=1e-14)
        assert np.all(spmf_mder(spmf, 1.3, 2) == 0)

    def test_exp_at_zero_any_order(self, rng):
        A = rng.standard_normal((3, 3))
        spmf = Spmf([A], [exponential()])
        for k in range(5):
            assert_allclose(spmf_mder(spmf, 0.0, k), A, atol=1e-12)

    def test_sqrt_first_derivative(self, rng):
        A = rng.standard_normal((3, 3))
        spmf = Spmf([A], [sqrt(constant=1.0)])
        assert_allclose(spmf_mder(spmf, 1.0, 1), 0.5 * A, atol=1e-13)

    def test_mm_matches_functions_of_s(self, rng):
        spmf = random_spmf(rng)
        S = rng.standard_normal((2, 2)) * 0.5
        V = rng.standard_normal((spmf.n, 2))
        expected = sum(A @ V @ f.evaluate_matrix(S) for A, f in zip(spmf.matrices, spmf.functions))
        assert_allclose(spmf_mm(spmf, S, V), expected, atol=1e-12)

    def test_branch_cut_reports_term(self, rng):
        spmf = Spmf([np.eye(2), np.eye(2)], [constant(), sqrt()])
        with pytest.raises(ValueError) as excinfo:
            spmf.compute_MM(np.array([[-1.0]]), np.ones(2))
        assert excinfo.value.term == 1

    def test_function_count_mismatch(self):
        with pytest.raises(ValueError):
            Spmf([np.eye(2), np.eye(2)], [linear()])

    def test_rejects_plain_callables(self):
        with pytest.raises(TypeError):
            Spmf([np.eye(2)], [np.exp])


class TestDerSpmf:
    def test_table_and_fallback_agree_with_parent(self, rng):
        spmf = random_spmf(rng)
        der = make_derspmf(spmf, 0.25, 5)
        V = rng.standard_normal((spmf.n, 6))
        assert_allclose(der.compute_Mlincomb(0.25, V), spmf.compute_Mlincomb(0.25, V), atol=1e-12)
        assert_allclose(der.compute_Mlincomb(0.5, V), spmf.compute_Mlincomb(0.5, V), atol=1e-12)
        for k in range(7):
            assert_allclose(der.compute_Mder(0.25, k), spmf.compute_Mder(0.25, k), atol=1e-11)

    def test_uses_table_only_at_sigma(self, rng):
        spmf = random_spmf(rng)
        der = make_derspmf(spmf, 0.25, 3)
        assert der._uses_table(0.25, 4)
        assert not der._uses_table(0.25, 5)
        assert not der._uses_table(0.26, 1)

    def test_nested_wrapping(self, rng):
        spmf = random_spmf(rng)
        nested = DerSpmf(make_derspmf(spmf, 0.1, 3), -0.2, 3)
        V = rng.standard_normal((spmf.n, 3))
        for lam in (0.1, -0.2, 0.7):
            assert_allclose(nested.compute_Mlincomb(lam, V), spmf.compute_Mlincomb(lam, V), atol=1e-12)

    def test_parent_must_be_spmf(self, rng):
        with pytest.raises(TypeError):
            DerSpmf(random_dep(rng), 0.0, 3)

    def test_table_avoids_function_evaluations(self):
        calls = []

        def counting_exp(S):
            calls.append(S.shape)
            return exponential().matrix(S)

        f = MatrixFunction('counting', np.exp, counting_exp)
        spmf = Spmf([np.eye(2)], [f])
        der = make_derspmf(spmf, 0.0, 4)
        before = len(calls)
        der.compute_Mlincomb(0.0, np.ones((2, 5)))
        assert len(calls) == before

    def test_many_terms_table_matches(self):
        spmf = many_terms(m=20, n=10, density=0.2)
        der = make_derspmf(spmf, 0.0, 8)
        V = np.ones((10, 9))
        assert_allclose(der.compute_Mlincomb(0.0, V), spmf.compute_Mlincomb(0.0, V), rtol=1e-11)


class TestSumNep:
    def test_sum_of_derivatives(self, rng):
        a, b = random_dep(rng), random_pep(rng)
        total = SumNep(a, b)
        for k in range(3):
            assert_allclose(total.compute_Mder(0.3, k), a.compute_Mder(0.3, k) + b.compute_Mder(0.3, k))

    def test_size_mismatch(self, rng):
        with pytest.raises(ValueError):
            SumNep(random_dep(rng, 3), random_pep(rng, 4))


class TestSerialization:
    @pytest.mark.parametrize('name', ['dep0', 'pep0', 'neuron0', 'paper_spmf_5x5', 'sqrt_spmf'])
    def test_gallery_round_trip(self, name):
        nep = nep_gallery(name)
        rebuilt = nep_from_dict(json.loads(json.dumps(nep_to_dict(nep))))
        assert type(rebuilt) is type(nep)
        for k in range(3):
            assert_allclose(rebuilt.compute_Mder(1.1 + 0.2j, k), nep.compute_Mder(1.1 + 0.2j, k), atol=1e-14)

    def test_file_round_trip(self, tmp_path, rng):
        dep = random_dep(rng)
        path = tmp_path / 'dep.json'
        save_problem(dep, str(path))
        assert_allclose(load_problem(str(path)).compute_Mder(0.3, 0), dep.compute_Mder(0.3, 0))

    def test_derspmf_serializes_parent(self, rng):
        spmf = random_spmf(rng)
        assert nep_to_dict(make_derspmf(spmf, 0.0, 2)) == nep_to_dict(spmf)

    def test_closure_functions_not_serializable(self):
        spmf = Spmf([np.eye(2)], [MatrixFunction('user', np.cos, np.cos)])
        with pytest.raises(ValueError):
            nep_to_dict(spmf)

    def test_malformed_input(self):
        with pytest.raises(ValueError):
            nep_from_dict({'type': 'pep', 'n': 2})
        with pytest.raises(ValueError):
            nep_from_dict({'type': 'sumnep', 'n': 1, 'matrices': [[[[1.0, 0.0]]]]})
        with pytest.raises(ValueError):
            nep_from_dict({'type': 'pep', 'n': 2, 'matrices': [[[[1.0, 0.0]]]]})
