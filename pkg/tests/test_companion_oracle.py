"""
随机二次 PEP 上各求解器与友矩阵谱的对照
"""
import numpy as np
import pytest

from src.contour_solvers import ContourSpec, beyn_contour
from src.exceptions import NoConvergence, SingularShift, SingularSystem
from src.krylov_solvers import KRYLOV_SOLVERS
from src.nep_core import SolveOptions
from src.newton_solvers import NEWTON_SOLVERS
from tests.helpers import companion_eigenvalues, min_distance, random_pep

PROBLEMS = 10
OFFSET = 1e-3
KRYLOV_KWARGS = {'iar': {'neigs': 2, 'maxit': 50}, 'iar_chebyshev': {'neigs': 2, 'maxit': 50},
                 'nlar': {'neigs': 1}}


def quadratic_problems():
    rng = np.random.default_rng(11)
    return [random_pep(rng, n) for n in rng.integers(2, 7, size=PROBLEMS)]


@pytest.mark.parametrize('name', sorted(NEWTON_SOLVERS))
def test_newton_solvers_agree_with_companion(name):
    found = 0
    for j, pep in enumerate(quadratic_problems()):
        exact = companion_eigenvalues(pep)
        sigma = exact[j % len(exact)] + OFFSET
        try:
            outcome = NEWTON_SOLVERS[name](pep, SolveOptions(tol=1e-10, maxit=50, sigma=sigma))
        except (NoConvergence, SingularSystem):
            continue
        assert min_distance(outcome.lam, exact) < 1e-8
        found += 1
    assert found > 0


@pytest.mark.parametrize('name', sorted(KRYLOV_SOLVERS))
def test_krylov_solvers_agree_with_companion(name):
    found = 0
    for j, pep in enumerate(quadratic_problems()):
        exact = companion_eigenvalues(pep)
        opts = SolveOptions(tol=1e-10, sigma=exact[j % len(exact)] + OFFSET)
        try:
            values = KRYLOV_SOLVERS[name](pep, opts, **KRYLOV_KWARGS[name]).eigenvalues
        except NoConvergence as e:
            if e.errors is None:
                continue
            values = np.asarray(e.lam)[np.asarray(e.errors) < opts.tol]
        except SingularShift:
            continue
        for lam in values:
            assert min_distance(lam, exact) < 1e-8
        found += len(values)
    assert found > 0


def test_contour_encloses_whole_spectrum():
    for pep in quadratic_problems():
        exact = companion_eigenvalues(pep)
        contour = ContourSpec(center=0.0, radius=1.5 * np.max(np.abs(exact)), quad_nodes=256,
                              sketch_rank=pep.n, moments=3)
        outcome = beyn_contour(pep, contour)
        assert len(outcome) == len(exact)
        for lam in exact:
            assert min_distance(lam, outcome.eigenvalues) < 1e-8
