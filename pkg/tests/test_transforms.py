import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.exceptions import DomainError, SingularShift
from src.nep_core import compute_rf, mlincomb_via_MM
from src.nep_types import Pep
from src.transforms import (append_eigenpair, create_proj_nep, deflated_eigvec, effenberger_deflation,
                            extend_invariant_pair, mobius_transform, set_projectmatrices, shift_and_scale)
from tests.helpers import diagonal_linear, random_dep


def smallest_singular_value(A: np.ndarray) -> float:
    return float(np.linalg.svd(A, compute_uv=False)[-1])


def null_vector(A: np.ndarray) -> np.ndarray:
    _, _, Vh = np.linalg.svd(A)
    return Vh[-1].conj()


class TestShiftAndScale:
    def test_identity_parameters(self, rng):
        dep = random_dep(rng)
        same = shift_and_scale(dep)
        for k in range(3):
            assert_allclose(same.compute_Mder(0.2 + 0.1j, k), dep.compute_Mder(0.2 + 0.1j, k))

    def test_chain_rule(self, rng):
        dep = random_dep(rng)
        shifted = shift_and_scale(dep, sigma=-1.0, alpha=2.0)
        lam = 0.3
        assert_allclose(shifted.compute_Mder(lam, 0), dep.compute_Mder(-0.4, 0), atol=1e-13)
        assert_allclose(shifted.compute_Mder(lam, 1), 2 * dep.compute_Mder(-0.4, 1), atol=1e-13)
        assert_allclose(shifted.compute_Mder(lam, 3), 8 * dep.compute_Mder(-0.4, 3), atol=1e-12)

    def test_lincomb_and_block_residual(self, rng):
        dep = random_dep(rng)
        shifted = shift_and_scale(dep, sigma=0.5j, alpha=-1.5)
        V = rng.standard_normal((dep.n, 3))
        expected = sum(shifted.compute_Mder(0.1, j) @ V[:, j] for j in range(3))
        assert_allclose(shifted.compute_Mlincomb(0.1, V), expected, atol=1e-12)
        S = np.array([[0.1, 1.0], [0.0, 0.2]])
        W = rng.standard_normal((dep.n, 2))
        assert_allclose(shifted.compute_MM(S, W), dep.compute_MM(-1.5 * S + 0.5j * np.eye(2), W), atol=1e-12)

    def test_composition(self, rng):
        dep = random_dep(rng)
        twice = shift_and_scale(shift_and_scale(dep, 0.2, 3.0), -0.1, 0.5)
        once = shift_and_scale(dep, 3.0 * -0.1 + 0.2, 1.5)
        for k in range(3):
            assert_allclose(twice.compute_Mder(0.7, k), once.compute_Mder(0.7, k), atol=1e-12)

    def test_zero_scale_rejected(self, rng):
        with pytest.raises(ValueError):
            shift_and_scale(random_dep(rng), alpha=0.0)


class TestMobius:
    def test_affine_case_matches_shift_and_scale(self, rng):
        dep = random_dep(rng)
        mob = mobius_transform(dep, a=2.0, b=-1.0, c=0.0, d=1.0)
        shifted = shift_and_scale(dep, sigma=-1.0, alpha=2.0)
        for k in range(4):
            assert_allclose(mob.compute_Mder(0.25, k), shifted.compute_Mder(0.25, k), atol=1e-10)

    def test_identity(self, rng):
        dep = random_dep(rng)
        mob = mobius_transform(dep)
        assert_allclose(mob.compute_Mder(0.4, 0), dep.compute_Mder(0.4, 0))

    def test_second_derivative_agrees_with_block_route(self, rng):
        dep = random_dep(rng)
        mob = mobius_transform(dep, a=1.0, b=0.5, c=0.3, d=2.0)
        by_columns = mob._mder_by_columns(0.2, 2, lambda l, V: mlincomb_via_MM(mob, l, V))
        assert_allclose(mob.compute_Mder(0.2, 2), by_columns, atol=1e-10)

    def test_pole_raises(self, rng):
        mob = mobius_transform(random_dep(rng), a=1.0, b=0.0, c=1.0, d=-2.0)
        assert mob.pole == 2.0
        with pytest.raises(DomainError):
            mob.compute_Mder(2.0, 0)
        with pytest.raises(DomainError):
            mob.compute_MM(np.array([[2.0]]), np.ones(mob.n))

    def test_eigenvalue_mapping(self):
        pep = diagonal_linear([1.0, 5.0])
        mob = mobius_transform(pep, a=2.0, b=1.0, c=1.0, d=3.0)
        # φ(2) = 5/5 = 1
        assert smallest_singular_value(mob.compute_Mder(2.0, 0)) < 1e-12
        assert smallest_singular_value(mob.compute_Mder(1.0, 0)) > 1e-3

    def test_degenerate_map_rejected(self, rng):
        with pytest.raises(ValueError):
            mobius_transform(random_dep(rng), a=1.0, b=2.0, c=2.0, d=4.0)


class TestDeflation:
    def test_scalar_u_formula(self, rng):
        dep = random_dep(rng)
        v0 = rng.standard_normal(dep.n)
        dnep = effenberger_deflation(dep, np.array([[0.3]]), v0)
        mu = -0.2 + 0.1j
        D = dnep.compute_Mder(mu, 0)
        n = dep.n
        assert D.shape == (n + 1, n + 1)
        assert_allclose(D[:n, n], -dep.compute_Mder(mu, 0) @ v0 / (0.3 - mu), atol=1e-12)
        assert_allclose(D[n, :n], v0.conj(), atol=1e-14)
        assert D[n, n] == 0

    def test_u_derivative_matches_finite_difference(self, rng):
        dep = random_dep(rng)
        S0 = np.array([[0.3, 0.1], [0.0, -0.4]])
        V0 = rng.standard_normal((dep.n, 2))
        dnep = effenberger_deflation(dep, S0, V0)
        mu, h = 0.7, 1e-6
        U = dnep.u_derivatives(mu, 1)
        fd = (dnep.u_derivatives(mu + h, 0)[0] - dnep.u_derivatives(mu - h, 0)[0]) / (2 * h)
        assert_allclose(U[1], fd, atol=1e-6)
        assert_allclose(dnep.compute_Mder(mu, 1)[:dep.n, dep.n:], U[1], atol=1e-12)

    def test_lincomb_consistent_with_derivatives(self, rng):
        dep = random_dep(rng)
        dnep = effenberger_deflation(dep, np.array([[0.3]]), rng.standard_normal(dep.n))
        V = rng.standard_normal((dnep.n, 3))
        expected = sum(dnep.compute_Mder(-0.5, j) @ V[:, j] for j in range(3))
        assert_allclose(dnep.compute_Mlincomb(-0.5, V), expected, atol=1e-11)

    def test_singular_shift_at_deflated_eigenvalue(self, rng):
        dnep = effenberger_deflation(random_dep(rng), np.array([[0.3]]), np.ones(4))
        with pytest.raises(SingularShift):
            dnep.compute_Mder(0.3, 0)

    def test_deflated_spectrum(self):
        pep = diagonal_linear([1.0, 2.0, 3.0])
        dnep = effenberger_deflation(pep, np.array([[1.0]]), np.array([1.0, 0.0, 0.0]))
        assert smallest_singular_value(dnep.compute_Mder(2.0, 0)) < 1e-12
        assert smallest_singular_value(dnep.compute_Mder(1.5, 0)) > 1e-3

    def test_eigvec_and_invariant_pair_extension(self):
        pep = diagonal_linear([1.0, 2.0, 3.0])
        dnep = effenberger_deflation(pep, np.array([[1.0]]), np.array([1.0, 0.0, 0.0]))
        xt = null_vector(dnep.compute_Mder(2.0, 0))
        v = deflated_eigvec(dnep, 2.0, xt)
        assert abs(abs(v[1]) - 1.0) < 1e-12
        S, V = extend_invariant_pair(dnep, 2.0, xt)
        assert S.shape == (2, 2) and V.shape == (3, 2)
        assert_allclose(np.sort(np.linalg.eigvals(S).real), [1.0, 2.0], atol=1e-12)
        assert np.linalg.norm(pep.compute_MM(S, V)) < 1e-12

    def test_append_parent_eigenpair(self):
        A = np.array([[1.0, 2.0, 0.0], [0.0, 2.0, 1.0], [0.0, 0.0, 3.0]])
        pep = Pep([A, -np.eye(3)])
        v = np.array([2.0, 1.0, 0.0]) / np.sqrt(5)
        S, V = append_eigenpair(np.array([[1.0]]), np.array([[1.0], [0.0], [0.0]]), 2.0, v)
        assert S.shape == (2, 2) and V.shape == (3, 2)
        assert abs(np.vdot(V[:, 0], V[:, 1])) < 1e-14
        assert_allclose(np.sort(np.linalg.eigvals(S).real), [1.0, 2.0], atol=1e-12)
        assert np.linalg.norm(pep.compute_MM(S, V)) < 1e-12

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            effenberger_deflation(random_dep(rng), np.eye(2), np.ones((4, 3)))


class TestProjection:
    def test_identity_basis(self, rng):
        dep = random_dep(rng)
        proj = create_proj_nep(dep)
        assert proj.n == dep.n
        assert_allclose(proj.compute_Mder(0.1, 1), dep.compute_Mder(0.1, 1))

    def test_one_dimensional_projection_matches_rayleigh_functional(self):
        pep = diagonal_linear([1.0, 2.0, 4.0])
        x = np.array([1.0, 1.0, 0.0]) / np.sqrt(2)
        proj = create_proj_nep(pep)
        set_projectmatrices(proj, x, x)
        assert proj.n == 1
        lam = compute_rf(pep, x, lam0=0.0)
        assert abs(lam - 1.5) < 1e-10
        assert abs(proj.compute_Mder(lam, 0)[0, 0]) < 1e-10

    def test_subspace_with_eigenvectors(self):
        pep = diagonal_linear([1.0, 2.0, 4.0])
        proj = create_proj_nep(pep)
        basis = np.eye(3)[:, :2]
        set_projectmatrices(proj, basis, basis)
        assert smallest_singular_value(proj.compute_Mder(2.0, 0)) < 1e-14
        assert smallest_singular_value(proj.compute_Mder(4.0, 0)) > 1.0

    def test_basis_shape_errors(self, rng):
        proj = create_proj_nep(random_dep(rng))
        with pytest.raises(ValueError):
            set_projectmatrices(proj, np.ones((4, 2)), np.ones((4, 1)))
        with pytest.raises(ValueError):
            set_projectmatrices(proj, np.ones((4, 5)), np.ones((4, 5)))
