"""
NEP 问题类型模块
多项式（PEP）、时滞（DEP）、矩阵函数乘积和（SPMF）、和问题（SumNEP）以及
在给定点预计算导数的 DerSpmf 包装，均提供专门的计算函数
"""
import json
import logging
import math
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
import scipy.linalg

from .matrix_functions import (MatrixFunction, constant, encode_param, exponential,
                               function_from_tag, linear, monomial)
from .nep_core import MDER, MLINCOMB, MM, NEP

logger = logging.getLogger(__name__)


def _square_matrices(matrices: Sequence[np.ndarray], what: str) -> List[np.ndarray]:
    mats = [np.atleast_2d(np.asarray(A, dtype=complex)) for A in matrices]
    if not mats:
        raise ValueError(f"{what} 至少需要一个系数矩阵")
    n = mats[0].shape[0]
    for i, A in enumerate(mats):
        if A.shape != (n, n):
            raise ValueError(f"{what} 的第 {i} 个矩阵形状为 {A.shape}，应为 {n}×{n}")
    return mats


def _falling(i: int, k: int) -> float:
    """i!/(i-k)!"""
    return float(math.perm(i, k))


class Pep(NEP):
    """
    多项式特征值问题 M(λ) = Σ λ^i Aᵢ，系数按升幂排列
    """

    capabilities = frozenset({MDER, MLINCOMB, MM})

    def __init__(self, coeffs: Sequence[np.ndarray]):
        mats = _square_matrices(coeffs, 'PEP')
        super().__init__(mats[0].shape[0])
        self.coeffs: Tuple[np.ndarray, ...] = tuple(mats)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def _mder(self, lam: complex, k: int) -> np.ndarray:
        Z = np.zeros((self.n, self.n), dtype=complex)
        for i in range(k, len(self.coeffs)):
            Z += _falling(i, k) * lam ** (i - k) * self.coeffs[i]
        return Z

    def _mlincomb(self, lam: complex, V: np.ndarray, a: np.ndarray) -> np.ndarray:
        z = np.zeros(self.n, dtype=complex)
        for i, A in enumerate(self.coeffs):
            jmax = min(i, V.shape[1] - 1)
            w = sum(a[j] * _falling(i, j) * lam ** (i - j) * V[:, j] for j in range(jmax + 1))
            z += A @ w
        return z

    def _mm(self, S: np.ndarray, V: np.ndarray) -> np.ndarray:
        result = np.zeros_like(V)
        VS = V
        for i, A in enumerate(self.coeffs):
            result += A @ VS
            if i < self.degree:
                VS = VS @ S
        return result

    def to_spmf(self) -> 'Spmf':
        return Spmf(self.coeffs, [monomial(i) for i in range(len(self.coeffs))])


class Dep(NEP):
    """
    时滞特征值问题 M(λ) = −λI + A₀ + Σ e^{−τᵢλ} Aᵢ
    """

    capabilities = frozenset({MDER, MLINCOMB, MM})

    def __init__(self, A0: np.ndarray, delay_terms: Sequence[Tuple[float, np.ndarray]]):
        delay_terms = list(delay_terms)
        mats = _square_matrices([A0] + [A for _, A in delay_terms], 'DEP')
        taus = [float(tau) for tau, _ in delay_terms]
        if any(tau < 0 or not np.isfinite(tau) for tau in taus):
            raise ValueError(f"时滞必须为非负有限实数，当前为 {taus}")
        super().__init__(mats[0].shape[0])
        self.A0 = mats[0]
        self.delays: Tuple[float, ...] = tuple(taus)
        self.delay_matrices: Tuple[np.ndarray, ...] = tuple(mats[1:])

    def _mder(self, lam: complex, k: int) -> np.ndarray:
        if k == 0:
            Z = self.A0 - lam * np.eye(self.n, dtype=complex)
        elif k == 1:
            Z = -np.eye(self.n, dtype=complex)
        else:
            Z = np.zeros((self.n, self.n), dtype=complex)
        for tau, A in zip(self.delays, self.delay_matrices):
            Z = Z + (-tau) ** k * np.exp(-tau * lam) * A
        return Z

    def _mlincomb(self, lam: complex, V: np.ndarray, a: np.ndarray) -> np.ndarray:
        z = a[0] * (self.A0 @ V[:, 0] - lam * V[:, 0])
        if V.shape[1] > 1:
            z = z - a[1] * V[:, 1]
        for tau, A in zip(self.delays, self.delay_matrices):
            weights = a * (-tau) ** np.arange(V.shape[1])
            z = z + np.exp(-tau * lam) * (A @ (V @ weights))
        return z

    def _mm(self, S: np.ndarray, V: np.ndarray) -> np.ndarray:
        result = self.A0 @ V - V @ S
        for tau, A in zip(self.delays, self.delay_matrices):
            result += A @ V @ scipy.linalg.expm(-tau * S)
        return result

    def to_spmf(self) -> 'Spmf':
        matrices = [np.eye(self.n, dtype=complex), self.A0, *self.delay_matrices]
        functions = [linear(-1.0), constant(1.0), *(exponential(-tau) for tau in self.delays)]
        return Spmf(matrices, functions)


class Spmf(NEP):
    """
    矩阵与函数乘积和 M(λ) = Σ Aᵢ fᵢ(λ)

    系数矩阵以 m×n×n 的三维数组保存，导数组合用 einsum 一次完成
    """

    capabilities = frozenset({MDER, MLINCOMB, MM})

    def __init__(self, matrices: Sequence[np.ndarray], functions: Sequence[MatrixFunction]):
        mats = _square_matrices(matrices, 'SPMF')
        functions = list(functions)
        if len(functions) != len(mats):
            raise ValueError(f"SPMF 的矩阵数 {len(mats)} 与函数数 {len(functions)} 不一致")
        for i, f in enumerate(functions):
            if not isinstance(f, MatrixFunction):
                raise TypeError(f"第 {i} 个函数必须是 MatrixFunction，当前为 {type(f).__name__}")
        super().__init__(mats[0].shape[0])
        self.matrices: Tuple[np.ndarray, ...] = tuple(mats)
        self.functions: Tuple[MatrixFunction, ...] = tuple(functions)
        self._stack = np.stack(mats)

    @property
    def num_terms(self) -> int:
        return len(self.functions)

    def derivative_table(self, lam: complex, k: int) -> np.ndarray:
        """m×k 数组，(i, j) 位置为 fᵢ^(j)(λ)"""
        return np.array([f.derivatives(lam, k, term=i) for i, f in enumerate(self.functions)])

    def _mder(self, lam: complex, k: int) -> np.ndarray:
        d = self.derivative_table(lam, k + 1)[:, k]
        return np.einsum('i,ijk->jk', d, self._stack)

    def _mlincomb(self, lam: complex, V: np.ndarray, a: np.ndarray) -> np.ndarray:
        D = self.derivative_table(lam, V.shape[1])
        return self._combine(D, V, a)

    def _combine(self, D: np.ndarray, V: np.ndarray, a: np.ndarray) -> np.ndarray:
        # W[:, i] = Σ_j a_j fᵢ^(j)(λ) v_j
        W = V @ (a[:, None] * D.T)
        return np.einsum('ijk,ki->j', self._stack, W)

    def _mm(self, S: np.ndarray, V: np.ndarray) -> np.ndarray:
        result = np.zeros_like(V)
        for i, (A, f) in enumerate(zip(self.matrices, self.functions)):
            result += A @ V @ f.evaluate_matrix(S, term=i)
        return result

    def to_spmf(self) -> 'Spmf':
        return self


class DerSpmf(Spmf):
    """
    在 σ 处预计算 fᵢ^(k)(σ), k=0..N 的 SPMF 包装

    λ=σ 且列数不超过 N+1 时由导数表直接组合，其余调用全部委托给父问题。
    父问题本身也可以是 DerSpmf，从而在多个点预计算。
    """

    def __init__(self, parent: Spmf, sigma: complex, N: int):
        if not isinstance(parent, Spmf):
            raise TypeError(f"DerSpmf 的父问题必须是 Spmf，当前为 {type(parent).__name__}")
        if int(N) < 1:
            raise ValueError(f"预计算阶数 N 必须至少为 1，当前为 {N}")
        NEP.__init__(self, parent.n)
        self.parent = parent
        self.sigma = complex(sigma)
        self.N = int(N)
        self.matrices = parent.matrices
        self.functions = parent.functions
        self._stack = parent._stack
        self.table = parent.derivative_table(self.sigma, self.N + 1)
        logger.debug(f"DerSpmf: 在 σ={self.sigma} 处预计算 {self.num_terms} 项的 {self.N + 1} 阶导数表")

    def _uses_table(self, lam: complex, k: int) -> bool:
        return lam == self.sigma and k <= self.N + 1

    def derivative_table(self, lam: complex, k: int) -> np.ndarray:
        if self._uses_table(complex(lam), k):
            return self.table[:, :k]
        return self.parent.derivative_table(lam, k)

    def _mder(self, lam: complex, k: int) -> np.ndarray:
        if self._uses_table(lam, k + 1):
            return np.einsum('i,ijk->jk', self.table[:, k], self._stack)
        return self.parent._mder(lam, k)

    def _mlincomb(self, lam: complex, V: np.ndarray, a: np.ndarray) -> np.ndarray:
        if self._uses_table(lam, V.shape[1]):
            return self._combine(self.table[:, :V.shape[1]], V, a)
        return self.parent._mlincomb(lam, V, a)

    def _mm(self, S: np.ndarray, V: np.ndarray) -> np.ndarray:
        return self.parent._mm(S, V)

    def to_spmf(self) -> Spmf:
        return self.parent.to_spmf()


def make_derspmf(spmf: Spmf, sigma: complex, N: int) -> DerSpmf:
    """在 σ 处预计算 N 阶以内导数"""
    return DerSpmf(spmf, sigma, N)


class SumNep(NEP):
    """M(λ) = A(λ) + B(λ)"""

    capabilities = frozenset({MDER, MLINCOMB, MM})

    def __init__(self, left: NEP, right: NEP):
        if left.n != right.n:
            raise ValueError(f"SumNEP 两个加数维数不同: {left.n} 与 {right.n}")
        super().__init__(left.n)
        self.left = left
        self.right = right

    def _mder(self, lam: complex, k: int) -> np.ndarray:
        return self.left.compute_Mder(lam, k) + self.right.compute_Mder(lam, k)

    def _mlincomb(self, lam: complex, V: np.ndarray, a: np.ndarray) -> np.ndarray:
        return self.left.compute_Mlincomb(lam, V, a) + self.right.compute_Mlincomb(lam, V, a)

    def _mm(self, S: np.ndarray, V: np.ndarray) -> np.ndarray:
        return self.left.compute_MM(S, V) + self.right.compute_MM(S, V)


# ---- 专门计算函数的函数式入口 ----

def pep_mder(pep: Pep, lam: complex, k: int) -> np.ndarray:
    return pep.compute_Mder(lam, k)


def dep_mder(dep: Dep, lam: complex, k: int) -> np.ndarray:
    return dep.compute_Mder(lam, k)


def spmf_mder(spmf: Spmf, lam: complex, k: int) -> np.ndarray:
    return spmf.compute_Mder(lam, k)


def spmf_mm(spmf: Spmf, S: np.ndarray, V: np.ndarray) -> np.ndarray:
    return spmf.compute_MM(S, V)


def dep_mm(dep: Dep, S: np.ndarray, V: np.ndarray) -> np.ndarray:
    return dep.compute_MM(S, V)


# ---- 序列化 ----

def _encode_matrix(A: np.ndarray) -> List[List[List[float]]]:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(A, dtype=complex)]


def _decode_matrix(rows: Any, n: int) -> np.ndarray:
    A = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)
    if A.shape != (n, n):
        raise ValueError(f"矩阵形状 {A.shape} 与声明的维数 n={n} 不一致")
    return A


def nep_to_dict(nep: NEP) -> Dict[str, Any]:
    """
    导出为 {type, n, matrices, ...}；矩阵按行优先、元素为 [re, im]

    只支持 Pep、Dep 和函数均为内置函数的 Spmf
    """
    if isinstance(nep, DerSpmf):
        return nep_to_dict(nep.parent)
    if isinstance(nep, Pep):
        return {'type': 'pep', 'n': nep.n, 'matrices': [_encode_matrix(A) for A in nep.coeffs]}
    if isinstance(nep, Dep):
        return {
            'type': 'dep',
            'n': nep.n,
            'matrices': [_encode_matrix(A) for A in (nep.A0, *nep.delay_matrices)],
            'delays': list(nep.delays),
        }
    if isinstance(nep, Spmf):
        tags = []
        for i, f in enumerate(nep.functions):
            if f.tag is None:
                raise ValueError(f"第 {i} 项函数 '{f.name}' 不是内置函数，无法序列化")
            tags.append({k: encode_param(v) for k, v in f.tag.items()})
        return {
            'type': 'spmf',
            'n': nep.n,
            'matrices': [_encode_matrix(A) for A in nep.matrices],
            'functions': tags,
        }
    raise ValueError(f"不支持序列化 {type(nep).__name__}")


def nep_from_dict(data: Dict[str, Any]) -> NEP:
    """由 nep_to_dict 的输出重建问题"""
    try:
        kind = data['type']
        n = int(data['n'])
        matrices = [_decode_matrix(rows, n) for rows in data['matrices']]
    except (KeyError, TypeError) as e:
        raise ValueError(f"问题描述缺少字段或格式错误: {e}") from e

    if kind == 'pep':
        return Pep(matrices)
    if kind == 'dep':
        delays = data.get('delays', [])
        if len(delays) != len(matrices) - 1:
            raise ValueError(f"DEP 时滞数 {len(delays)} 与时滞矩阵数 {len(matrices) - 1} 不一致")
        return Dep(matrices[0], list(zip(delays, matrices[1:])))
    if kind == 'spmf':
        return Spmf(matrices, [function_from_tag(tag) for tag in data.get('functions', [])])
    raise ValueError(f"未知的问题类型 '{kind}'，可用: pep, dep, spmf")


def load_problem(path: str) -> NEP:
    """从 JSON 文件读取问题"""
    with open(path, 'r', encoding='utf-8') as f:
        data = json.load(f)
    nep = nep_from_dict(data)
    logger.info(f"从 {path} 读取 {data['type']} 问题，n={nep.n}")
    return nep


def save_problem(nep: NEP, path: str):
    """把问题写成 JSON 文件"""
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(nep_to_dict(nep), f, ensure_ascii=False)


__all__ = [
    'Pep', 'Dep', 'Spmf', 'DerSpmf', 'SumNep', 'make_derspmf',
    'pep_mder', 'dep_mder', 'spmf_mder', 'spmf_mm', 'dep_mm',
    'nep_to_dict', 'nep_from_dict', 'load_problem', 'save_problem',
]
