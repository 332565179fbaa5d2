"""
Chebyshev 基下无穷 Arnoldi 所需的工具
积分矩阵、求导矩阵 D_N、矩阵意义下的差商以及每步 Krylov 向量的常数项 y₀
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.linalg

from .matrix_functions import MatrixFunction
from .nep_core import NEP, LinSolver

logger = logging.getLogger(__name__)


def chebyshev_integration_matrix(size: int) -> np.ndarray:
    """
    L 满足 (T₀, ..., T_{size-1})ᵀ = L (T₁′, ..., T_size′)ᵀ，
    由 ∫T₀ = T₁，∫T₁ = T₂/4，∫Tⱼ = T_{j+1}/(2(j+1)) − T_{j−1}/(2(j−1)) 得到
    """
    if size < 1:
        raise ValueError(f"积分矩阵阶数必须为正，当前为 {size}")
    L = np.zeros((size, size))
    L[0, 0] = 1.0
    if size > 1:
        L[1, 1] = 0.25
    for j in range(2, size):
        L[j, j] = 1.0 / (2 * (j + 1))
        L[j, j - 2] = -1.0 / (2 * (j - 1))
    return L


def build_derivation_matrix(N: int) -> np.ndarray:
    """
    (N+1)×(N+1) 求导矩阵，Θ′(θ) = D_N Θ(θ)，Θ = (T₀, ..., T_N)ᵀ

    第一行为零，其余各行取 L_{N+1}⁻¹ 的前 N 行
    """
    if int(N) < 1:
        raise ValueError(f"求导矩阵阶数 N 必须至少为 1，当前为 {N}")
    N = int(N)
    L = chebyshev_integration_matrix(N + 1)
    Linv = scipy.linalg.solve_triangular(L, np.eye(N + 1), lower=True)
    D = np.zeros((N + 1, N + 1))
    D[1:, :] = Linv[:N, :]
    return D


def chebyshev_at_zero(count: int, start: int = 0) -> np.ndarray:
    """(T_start(0), ..., T_{start+count-1}(0))，Tⱼ(0) = cos(jπ/2)"""
    j = np.arange(start, start + count)
    values = np.zeros(count)
    values[j % 4 == 0] = 1.0
    values[j % 4 == 2] = -1.0
    return values


@dataclass(frozen=True)
class ChebyshevFrame:
    """
    N 次 Chebyshev 展开的求导矩阵与基函数在 0 处的值

    Attributes:
        N: 展开次数
        sigma, alpha: 问题按 M(σ+αλ) 平移缩放
    """
    N: int
    sigma: complex = 0.0
    alpha: complex = 1.0

    def __post_init__(self):
        if self.N < 0:
            raise ValueError(f"Chebyshev 展开次数必须非负，当前为 {self.N}")
        if self.alpha == 0:
            raise ValueError("缩放系数 α 不能为 0")

    @cached_property
    def D(self) -> np.ndarray:
        # 常数函数（N=0）的导数为零
        if self.N == 0:
            return np.zeros((1, 1))
        return build_derivation_matrix(self.N)

    @cached_property
    def theta0(self) -> np.ndarray:
        """Θ_N(0)"""
        return chebyshev_at_zero(self.N + 1)

    @cached_property
    def theta_hat(self) -> np.ndarray:
        """(T₁(0), ..., T_{N+1}(0))，与积分后的系数 Y 对应"""
        return chebyshev_at_zero(self.N + 1, start=1)

    @cached_property
    def L(self) -> np.ndarray:
        return chebyshev_integration_matrix(self.N + 1)

    def integrate(self, X: np.ndarray) -> np.ndarray:
        """φ = XΘ_N 的积分在 T₁..T_{N+1} 上的系数"""
        return X @ self.L

    def scaled_argument(self) -> np.ndarray:
        return self.sigma * np.eye(self.N + 1) + self.alpha * self.D


def divided_difference(f: MatrixFunction, S: np.ndarray, sigma: complex = 0.0, alpha: complex = 1.0,
                       term: Optional[int] = None) -> np.ndarray:
    """
    f[σI+αS, σI]

    取 f([[σI+αS, I], [0, σI]]) 的右上 p×p 块，λ → 0 处的可去奇点无需特殊处理
    """
    S = np.atleast_2d(np.asarray(S, dtype=complex))
    p = S.shape[0]
    I = np.eye(p)
    block = np.block([[sigma * I + alpha * S, I], [np.zeros((p, p)), sigma * I]])
    return f.evaluate_matrix(block, term=term)[:p, p:]


def _spmf_sum(spmf, X: np.ndarray, frame: ChebyshevFrame) -> np.ndarray:
    # Σ Aᵢ X b̃ᵢ(D_N) Θ_N(0)，b̃ᵢ(D_N) = −α fᵢ[σI+αD_N, σI]
    W = np.column_stack([
        X @ (-frame.alpha * divided_difference(f, frame.D, frame.sigma, frame.alpha, term=i) @ frame.theta0)
        for i, f in enumerate(spmf.functions)
    ])
    return np.einsum('ijk,ki->j', spmf._stack, W)


def taylor_y0_sum(nep: NEP, X: np.ndarray, frame: ChebyshevFrame) -> np.ndarray:
    """
    同一个和式的 Taylor 形式：−Σ_{j≥1} α^j M^(j)(σ) X D_N^{j−1} Θ_N(0) / j!

    D_N 幂零，和式在 N+1 项后截断；适用于任何提供 Mlincomb 的问题
    """
    N = frame.N
    W = np.zeros((nep.n, N + 2), dtype=complex)
    w = frame.theta0.astype(complex)
    factorial = 1.0
    for j in range(1, N + 2):
        factorial *= j
        W[:, j] = X @ w / factorial
        w = frame.D @ w
    a = frame.alpha ** np.arange(N + 2)
    a[0] = 0
    return -nep.compute_Mlincomb(frame.sigma, W, a)


def compute_y0(nep: NEP, X: np.ndarray, Y: np.ndarray, frame: ChebyshevFrame,
               solver: Optional[LinSolver] = None) -> np.ndarray:
    """
    Chebyshev 基下新 Krylov 向量的常数系数

        y₀ = M(σ)⁻¹ Σ Aᵢ X b̃ᵢ(D_N) Θ_N(0) − Y Θ̂(0)

    X 为 φ 在 T₀..T_N 上的系数，Y 为 ∫φ 在 T₁..T_{N+1} 上的系数。
    不给 solver 时不做 M(σ)⁻¹ 求解，返回字面的和式。
    PEP/DEP/SPMF 走差商公式，其它问题走 Taylor 形式。
    """
    X = np.asarray(X, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    if X.shape[1] != frame.N + 1 or Y.shape[1] != frame.N + 1:
        raise ValueError(f"X, Y 的列数必须为 N+1={frame.N + 1}，当前为 {X.shape[1]}, {Y.shape[1]}")

    to_spmf = getattr(nep, 'to_spmf', None)
    total = _spmf_sum(to_spmf(), X, frame) if to_spmf is not None else taylor_y0_sum(nep, X, frame)
    if solver is not None:
        total = solver.solve(total)
    return total - Y @ frame.theta_hat
