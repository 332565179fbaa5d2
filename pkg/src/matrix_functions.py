"""
矩阵函数模块
SPMF 每一项的函数同时需要标量意义和矩阵意义下的求值，这里给出统一的函数对类型和内置函数
"""
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np
import scipy.linalg

from .exceptions import DomainError
from .nep_core import factorials, jordan_matrix


@dataclass(frozen=True, eq=False)
class MatrixFunction:
    """
    标量/矩阵函数对

    Attributes:
        name: 函数名
        scalar: 标量求值 f(λ)
        matrix: 矩阵求值 f(S)
        params: 内置函数的序列化参数；用户闭包为 None，不可序列化
    """
    name: str
    scalar: Callable[[complex], complex]
    matrix: Callable[[np.ndarray], np.ndarray]
    params: Optional[Dict[str, Any]] = field(default=None)

    def __call__(self, x):
        if np.ndim(x) == 0:
            return self.scalar(complex(x))
        return self.matrix(np.asarray(x, dtype=complex))

    def evaluate_matrix(self, S: np.ndarray, term: Optional[int] = None) -> np.ndarray:
        """矩阵求值，失败时统一报告为 DomainError 并带上项号"""
        try:
            F = self.matrix(np.asarray(S, dtype=complex))
        except DomainError as e:
            raise DomainError(str(e), term=term) from e
        except (ValueError, np.linalg.LinAlgError, ArithmeticError) as e:
            raise DomainError(f"{self.name} 的矩阵函数求值失败: {e}", term=term) from e
        F = np.asarray(F, dtype=complex)
        if not np.all(np.isfinite(F)):
            raise DomainError(f"{self.name} 的矩阵函数求值得到非有限值", term=term)
        return F

    def evaluate_scalar(self, lam: complex, term: Optional[int] = None) -> complex:
        try:
            return complex(self.scalar(complex(lam)))
        except DomainError as e:
            raise DomainError(str(e), term=term) from e

    def derivatives(self, lam: complex, k: int, term: Optional[int] = None) -> np.ndarray:
        """
        返回 [f(λ), f′(λ), ..., f^(k-1)(λ)]
        k>1 时由 f(λI+J) 的第一列乘以 j! 得到
        """
        if k == 1:
            return np.array([self.evaluate_scalar(lam, term)], dtype=complex)
        F = self.evaluate_matrix(jordan_matrix(lam, k), term)
        return F[:, 0] * factorials(k)

    @property
    def tag(self) -> Optional[Dict[str, Any]]:
        if self.params is None:
            return None
        return {'name': self.name, **self.params}


def linear(coeff: complex = 1.0, constant: complex = 0.0) -> MatrixFunction:
    """f(λ) = constant + coeff·λ"""
    return MatrixFunction(
        'linear',
        lambda x: constant + coeff * x,
        lambda S: constant * np.eye(S.shape[0], dtype=complex) + coeff * S,
        {'coeff': coeff, 'constant': constant},
    )


def constant(value: complex = 1.0) -> MatrixFunction:
    """f(λ) = value"""
    return linear(0.0, value)


def monomial(power: int) -> MatrixFunction:
    """f(λ) = λ^power"""
    if int(power) < 0:
        raise ValueError(f"单项式次数必须非负，当前为 {power}")
    power = int(power)
    return MatrixFunction(
        'monomial',
        lambda x: x ** power,
        lambda S: np.linalg.matrix_power(S, power),
        {'power': power},
    )


def exponential(scale: complex = 1.0) -> MatrixFunction:
    """f(λ) = exp(scale·λ)；时滞项取 scale = −τ"""
    return MatrixFunction(
        'exp',
        lambda x: np.exp(scale * x),
        lambda S: scipy.linalg.expm(scale * S),
        {'scale': scale},
    )


def _on_branch_cut(z: complex) -> bool:
    return z.real < 0 and abs(z.imag) <= 1e-14 * max(1.0, abs(z))


def _principal_sqrt(x: complex) -> complex:
    if _on_branch_cut(x):
        raise DomainError(f"λ={x} 落在 √λ 的分支割线 (−∞,0) 上")
    return np.sqrt(x)


def _matrix_sqrt(S: np.ndarray) -> np.ndarray:
    eigenvalues = np.linalg.eigvals(S)
    if any(_on_branch_cut(complex(w)) for w in eigenvalues):
        raise DomainError("矩阵有特征值落在 √ 的分支割线 (−∞,0) 上")
    X = scipy.linalg.sqrtm(S)
    X = X[0] if isinstance(X, tuple) else X
    if not np.all(np.isfinite(X)) or np.linalg.norm(X @ X - S) > 1e-8 * max(1.0, np.linalg.norm(S)):
        raise DomainError("矩阵平方根不存在（奇异的非对角块）")
    return X


def sqrt(constant: complex = 0.0, coeff: complex = 1.0) -> MatrixFunction:
    """f(λ) = constant + coeff·√λ，主分支，割线在 (−∞,0)"""
    return MatrixFunction(
        'sqrt',
        lambda x: constant + coeff * _principal_sqrt(x),
        lambda S: constant * np.eye(S.shape[0], dtype=complex) + coeff * _matrix_sqrt(S),
        {'constant': constant, 'coeff': coeff},
    )


FUNCTION_BUILDERS: Dict[str, Callable[..., MatrixFunction]] = {
    'linear': linear,
    'monomial': monomial,
    'exp': exponential,
    'sqrt': sqrt,
}


def function_from_tag(tag: Dict[str, Any]) -> MatrixFunction:
    """由序列化标签重建内置函数"""
    params = dict(tag)
    name = params.pop('name', None)
    if name not in FUNCTION_BUILDERS:
        raise ValueError(f"未知的函数标签 '{name}'，可用: {', '.join(FUNCTION_BUILDERS)}")
    decoded = {k: (complex(v[0], v[1]) if isinstance(v, (list, tuple)) else v) for k, v in params.items()}
    return FUNCTION_BUILDERS[name](**decoded)


def encode_param(value: Any) -> Any:
    """复数参数编码为 [re, im]"""
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value

