"""
NEP 计算接口模块
定义 M(λ)v = 0 的三种等价计算接口（导数、导数线性组合、块残差 𝕄(S,V)）、
缺省的回退实现、线性求解器约定以及误差度量
"""
import dataclasses
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, FrozenSet, Optional

import numpy as np
import scipy.linalg

from .config import config
from .exceptions import CapabilityError, DomainError, NoConvergence, SingularSystem

logger = logging.getLogger(__name__)

# 能力标签
MDER = 'Mder'
MLINCOMB = 'Mlincomb'
MM = 'MM'
LINSOLVE = 'LinSolveNative'
COMPUTE_CAPABILITIES = frozenset({MDER, MLINCOMB, MM})

ErrMeasure = Callable[[complex, np.ndarray], float]


def bidiagonal_matrix(lam: complex, k: int) -> np.ndarray:
    """λ 在主对角线、次对角线 S_{i+1,i}=i 的 k×k 矩阵，f(S)e₁ 的第 j 个分量等于 f^(j)(λ)"""
    S = np.diag(np.full(k, lam, dtype=complex))
    if k > 1:
        S += np.diag(np.arange(1, k, dtype=complex), -1)
    return S


def jordan_matrix(lam: complex, k: int) -> np.ndarray:
    """λI + J，J 为全 1 次对角线；f(λI+J)e₁ 的第 j 个分量等于 f^(j)(λ)/j!"""
    S = np.diag(np.full(k, lam, dtype=complex))
    if k > 1:
        S += np.diag(np.ones(k - 1, dtype=complex), -1)
    return S


def factorials(k: int) -> np.ndarray:
    """0!, 1!, ..., (k-1)!"""
    return np.array([math.factorial(j) for j in range(k)], dtype=float)


class LinSolver:
    """M(λ) 的 LU 分解，可重复求解"""

    def __init__(self, matrix: np.ndarray, shift: Optional[complex] = None):
        A = np.asarray(matrix, dtype=complex)
        self.shift = shift
        self.n = A.shape[0]
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', scipy.linalg.LinAlgWarning)
            self._lu, self._piv = scipy.linalg.lu_factor(A)

        pivots = np.abs(np.diag(self._lu))
        scale = max(pivots.max(), np.abs(A).max(), np.finfo(float).tiny)
        if not np.all(np.isfinite(pivots)) or pivots.min() <= self.n * np.finfo(float).eps * scale:
            raise SingularSystem(f"M(λ) 在 λ={shift} 处奇异或接近奇异", shift=shift)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """返回 M(λ)⁻¹b"""
        return scipy.linalg.lu_solve((self._lu, self._piv), np.asarray(b, dtype=complex))

    def solve_adjoint(self, b: np.ndarray) -> np.ndarray:
        """返回 M(λ)⁻ᴴb"""
        return scipy.linalg.lu_solve((self._lu, self._piv), np.asarray(b, dtype=complex), trans=2)


class NEP:
    """
    非线性特征值问题基类

    子类通过 capabilities 声明原生提供的计算接口，并实现 _mder / _mlincomb / _mm 中
    对应的方法；未原生提供的接口由其它接口推导出的回退实现补齐，因此
    compute_Mder、compute_Mlincomb、compute_MM 三者总是可调用的。
    """

    capabilities: FrozenSet[str] = frozenset()

    def __init__(self, n: int):
        if int(n) < 1:
            raise ValueError(f"问题维数必须为正整数，当前为 {n}")
        if not (self.capabilities & COMPUTE_CAPABILITIES):
            raise CapabilityError(f"{type(self).__name__} 没有原生提供任何计算接口")
        self.n = int(n)

    @property
    def size(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n})"

    # ---- 原生实现，由子类覆盖 ----

    def _mder(self, lam: complex, k: int) -> np.ndarray:
        raise CapabilityError(f"{type(self).__name__} 未实现 Mder")

    def _mlincomb(self, lam: complex, V: np.ndarray, a: np.ndarray) -> np.ndarray:
        raise CapabilityError(f"{type(self).__name__} 未实现 Mlincomb")

    def _mm(self, S: np.ndarray, V: np.ndarray) -> np.ndarray:
        raise CapabilityError(f"{type(self).__name__} 未实现 MM")

    # ---- 公共接口 ----

    def compute_Mder(self, lam: complex, k: int = 0) -> np.ndarray:
        """返回 M^(k)(λ)"""
        if k < 0:
            raise ValueError(f"导数阶数必须非负，当前为 {k}")
        lam = complex(lam)
        if MDER in self.capabilities:
            return self._mder(lam, int(k))
        if MLINCOMB in self.capabilities:
            return self._mder_by_columns(lam, int(k), self.compute_Mlincomb)
        return self._mder_by_columns(lam, int(k), lambda l, V: mlincomb_via_MM(self, l, V))

    def compute_Mlincomb(self, lam: complex, V: np.ndarray, a: Optional[np.ndarray] = None) -> np.ndarray:
        """返回 Σ aᵢ M^(i-1)(λ) vᵢ，a 缺省为全 1"""
        lam = complex(lam)
        V = self._as_block(V)
        a = _coefficients(a, V.shape[1])
        if MLINCOMB in self.capabilities:
            return self._mlincomb(lam, V, a)
        if MDER in self.capabilities:
            z = np.zeros(self.n, dtype=complex)
            for i in range(V.shape[1]):
                if a[i] != 0:
                    z += a[i] * (self._mder(lam, i) @ V[:, i])
            return z
        return mlincomb_via_MM(self, lam, V, a)

    def compute_MM(self, S: np.ndarray, V: np.ndarray) -> np.ndarray:
        """返回块残差 𝕄(S,V)"""
        S = np.atleast_2d(np.asarray(S, dtype=complex))
        V = self._as_block(V)
        if S.shape[0] != S.shape[1] or S.shape[0] != V.shape[1]:
            raise ValueError(f"S 必须是 {V.shape[1]}×{V.shape[1]} 方阵，当前为 {S.shape}")
        if MM in self.capabilities:
            return self._mm(S, V)
        return self._mm_from_derivatives(S, V)

    def factorize(self, lam: complex) -> LinSolver:
        """分解 M(λ)，奇异时抛出 SingularSystem"""
        lam = complex(lam)
        return LinSolver(self.compute_Mder(lam, 0), shift=lam)

    # ---- 回退实现 ----

    def _as_block(self, V: np.ndarray) -> np.ndarray:
        V = np.asarray(V, dtype=complex)
        if V.ndim == 1:
            V = V.reshape(-1, 1)
        if V.shape[0] != self.n:
            raise ValueError(f"维数不匹配: V 有 {V.shape[0]} 行，问题维数为 {self.n}")
        return V

    def _mder_by_columns(self, lam: complex, k: int, lincomb) -> np.ndarray:
        # 单位向量放在第 k+1 列，逐列取出 M^(k)(λ)
        D = np.zeros((self.n, self.n), dtype=complex)
        for j in range(self.n):
            V = np.zeros((self.n, k + 1), dtype=complex)
            V[j, k] = 1.0
            D[:, j] = lincomb(lam, V)
        return D

    def _mm_from_derivatives(self, S: np.ndarray, V: np.ndarray) -> np.ndarray:
        p = S.shape[0]
        center = np.trace(S) / p
        E = S - center * np.eye(p)
        enorm = np.linalg.norm(E)

        # E 幂零时 Taylor 展开在 p 项后精确截断
        if enorm == 0 or np.linalg.norm(np.linalg.matrix_power(E, p)) <= 1e-14 * max(1.0, enorm) ** p:
            return self._mm_taylor(center, E, V, p)

        w, X = np.linalg.eig(S)
        if np.linalg.cond(X) < 1e8:
            VX = V @ X
            Y = np.column_stack([self.compute_Mlincomb(w[j], VX[:, j]) for j in range(p)])
            return np.linalg.solve(X.T, Y.T).T

        if np.max(np.abs(np.linalg.eigvals(E))) < 0.5:
            return self._mm_taylor(center, E, V, 60)
        raise CapabilityError("S 不可对角化且离展开点太远，无法由导数推出 𝕄(S,V)")

    def _mm_taylor(self, center: complex, E: np.ndarray, V: np.ndarray, terms: int) -> np.ndarray:
        result = np.zeros_like(V)
        VE = V.copy()
        for j in range(terms):
            term = self.compute_Mder(center, j) @ VE / math.factorial(j)
            result += term
            if j > 0 and np.linalg.norm(term) <= 1e-16 * max(1.0, np.linalg.norm(result)):
                break
            VE = VE @ E
        return result


def _coefficients(a: Optional[np.ndarray], k: int) -> np.ndarray:
    if a is None:
        return np.ones(k, dtype=complex)
    a = np.asarray(a, dtype=complex).ravel()
    if a.shape[0] != k:
        raise ValueError(f"系数向量长度 {a.shape[0]} 与列数 {k} 不一致")
    return a


# ---- 面向函数的接口 ----

def compute_Mder(nep: NEP, lam: complex, k: int = 0) -> np.ndarray:
    """计算 M^(k)(λ)"""
    return nep.compute_Mder(lam, k)


def compute_Mlincomb(nep: NEP, lam: complex, V: np.ndarray, a: Optional[np.ndarray] = None) -> np.ndarray:
    """计算 Σ aᵢ M^(i-1)(λ) vᵢ"""
    return nep.compute_Mlincomb(lam, V, a)


def compute_MM(nep: NEP, S: np.ndarray, V: np.ndarray) -> np.ndarray:
    """计算 𝕄(S,V)"""
    return nep.compute_MM(S, V)


def mlincomb_via_MM(nep: NEP, lam: complex, V: np.ndarray, a: Optional[np.ndarray] = None) -> np.ndarray:
    """
    通过块残差计算导数线性组合：𝕄(S,V)e₁，其中 S 为 λ 在对角线、
    S_{i+1,i}=i 的双对角矩阵
    """
    V = nep._as_block(V)
    a = _coefficients(a, V.shape[1])
    S = bidiagonal_matrix(complex(lam), V.shape[1])
    return nep.compute_MM(S, V * a)[:, 0]


def factorize(nep: NEP, lam: complex) -> LinSolver:
    """返回 M(λ) 的可重用分解"""
    return nep.factorize(lam)


def default_errmeasure(nep: NEP) -> ErrMeasure:
    """相对残差 ‖M(λ)v‖/‖v‖，v=0 时为 +∞"""

    def errmeasure(lam: complex, v: np.ndarray) -> float:
        v = np.asarray(v, dtype=complex).ravel()
        nv = np.linalg.norm(v)
        if nv == 0:
            return math.inf
        return float(np.linalg.norm(nep.compute_Mlincomb(lam, v)) / nv)

    return errmeasure


def compute_rf(nep: NEP, x: np.ndarray, y: Optional[np.ndarray] = None, lam0: complex = 0.0,
               tol: Optional[float] = None, maxit: Optional[int] = None) -> complex:
    """
    Rayleigh 泛函：求 λ₀ 附近满足 yᴴM(λ)x = 0 的 λ

    标量 Newton 迭代 g(λ)=yᴴM(λ)x，g′(λ)=yᴴM′(λ)x；残差增大时步长减半。
    """
    solver_config = config.get_solver_config()
    tol = solver_config['rf_tol'] if tol is None else tol
    maxit = solver_config['rf_maxit'] if maxit is None else maxit

    x = np.asarray(x, dtype=complex).ravel()
    y = x if y is None else np.asarray(y, dtype=complex).ravel()
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise ValueError("Rayleigh 泛函需要非零向量 x, y")

    dx = np.column_stack([np.zeros_like(x), x])

    def g(lam: complex) -> complex:
        return complex(np.vdot(y, nep.compute_Mlincomb(lam, x)))

    lam = complex(lam0)
    g_lam = g(lam)
    for _ in range(maxit):
        if abs(g_lam) <= tol * nx * ny:
            return lam
        dg = complex(np.vdot(y, nep.compute_Mlincomb(lam, dx)))
        if dg == 0 or not np.isfinite(dg):
            break
        step = g_lam / dg
        # 已经落在舍入误差水平
        if abs(step) <= tol * max(1.0, abs(lam)):
            return lam
        t = 1.0
        for _ in range(10):
            trial = lam - t * step
            try:
                g_trial = g(trial)
            except DomainError:
                t /= 2
                continue
            if np.isfinite(g_trial) and abs(g_trial) <= abs(g_lam):
                break
            t /= 2
        else:
            break
        lam, g_lam = trial, g_trial
        if abs(t * step) <= tol * max(1.0, abs(lam)):
            return lam

    raise NoConvergence(f"Rayleigh 泛函在 {maxit} 步内未收敛", lam=lam)


@dataclass
class SolveOptions:
    """
    求解器公共参数

    Attributes:
        tol: 收敛判据 errmeasure < tol
        maxit: 最大迭代步数
        sigma: 目标点（Newton 类方法的初始 λ，同时是分解点）
        v0: 初始向量，缺省为全 1
        errmeasure: 误差度量，缺省为 default_errmeasure(nep)
        displaylevel: >0 时以 INFO 级别输出每步误差
        armijo: Newton 方法是否使用 Armijo 步长
        log_sink: 额外的逐步日志接收函数
    """
    tol: float = field(default_factory=lambda: config.get_solver_config()['tol'])
    maxit: int = field(default_factory=lambda: config.get_solver_config()['maxit'])
    sigma: complex = 0.0
    v0: Optional[np.ndarray] = None
    errmeasure: Optional[ErrMeasure] = None
    displaylevel: int = field(default_factory=lambda: config.get_solver_config()['displaylevel'])
    armijo: bool = field(default_factory=lambda: config.get_solver_config()['armijo'])
    log_sink: Optional[Callable[[str], None]] = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol 必须为正，当前为 {self.tol}")
        if int(self.maxit) < 1:
            raise ValueError(f"maxit 必须至少为 1，当前为 {self.maxit}")
        self.maxit = int(self.maxit)
        self.sigma = complex(self.sigma)
        if self.v0 is not None:
            self.v0 = np.asarray(self.v0, dtype=complex).ravel()

    def replace(self, **changes) -> 'SolveOptions':
        return dataclasses.replace(self, **changes)

    def initial_vector(self, n: int) -> np.ndarray:
        """返回长度为 n 的初始向量"""
        if self.v0 is None:
            return np.ones(n, dtype=complex)
        if self.v0.shape[0] != n:
            raise ValueError(f"初始向量长度 {self.v0.shape[0]} 与问题维数 {n} 不一致")
        if not np.any(self.v0):
            raise ValueError("初始向量不能为零")
        return self.v0.copy()

    def errmeasure_for(self, nep: NEP) -> ErrMeasure:
        return self.errmeasure if self.errmeasure is not None else default_errmeasure(nep)

    def log_iteration(self, iteration: int, err: float, name: str = __name__):
        """逐步日志，格式与 "Iteration k: Error: e" 一致"""
        line = f"Iteration {iteration}: Error: {err:e}"
        logging.getLogger(name).log(logging.INFO if self.displaylevel > 0 else logging.DEBUG, line)
        if self.log_sink is not None:
            self.log_sink(line)
