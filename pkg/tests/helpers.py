"""
测试用的随机问题构造和稠密谱对照解
"""
import numpy as np
import scipy.linalg

from src.matrix_functions import exponential, linear, monomial
from src.nep_types import Dep, Pep, Spmf


def companion_eigenvalues(pep: Pep) -> np.ndarray:
    """PEP 的友矩阵线性化 A z = λ B z 的全部特征值"""
    coeffs = pep.coeffs
    d, n = pep.degree, pep.n
    A = np.zeros((d * n, d * n), dtype=complex)
    B = np.eye(d * n, dtype=complex)
    A[:-n, n:] = np.eye((d - 1) * n)
    for i in range(d):
        A[-n:, i * n:(i + 1) * n] = -coeffs[i]
    B[-n:, -n:] = coeffs[d]
    return scipy.linalg.eig(A, B, right=False)


def min_distance(value: complex, values) -> float:
    values = np.asarray(values)
    return float(np.min(np.abs(values - value))) if values.size else float('inf')


def random_dep(rng: np.random.Generator, n: int = 4, delays=(1.0,)) -> Dep:
    return Dep(rng.standard_normal((n, n)), [(tau, rng.standard_normal((n, n))) for tau in delays])


def random_pep(rng: np.random.Generator, n: int = 4, degree: int = 2) -> Pep:
    return Pep([rng.standard_normal((n, n)) for _ in range(degree + 1)])


def random_spmf(rng: np.random.Generator, n: int = 4) -> Spmf:
    mats = [rng.standard_normal((n, n)) for _ in range(4)]
    return Spmf(mats, [linear(), exponential(-0.7), monomial(2), exponential(0.3 + 0.2j)])


def diagonal_linear(values) -> Pep:
    """M(λ) = diag(values) − λI"""
    values = np.asarray(values, dtype=complex)
    return Pep([np.diag(values), -np.eye(len(values))])
