"""
问题画廊模块
按名字构造基准问题，并提供扩展精度的 Newton 插值工具，把只有标量形式的函数变成矩阵函数
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence

import mpmath
import numpy as np
import scipy.sparse

from .config import config
from .exceptions import UnknownName
from .matrix_functions import MatrixFunction, constant, exponential, linear, sqrt
from .nep_core import NEP
from .nep_types import Dep, Pep, Spmf

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GalleryEntry:
    """
    画廊条目

    Attributes:
        name: 问题名
        description: 一句话说明
        parameters: 参数名及缺省值，构造时可覆盖
        constructor: 以参数为关键字参数的构造函数
    """
    name: str
    description: str
    parameters: Dict[str, Any]
    constructor: Callable[..., NEP] = field(repr=False)

    def build(self, params: Optional[Mapping[str, Any]] = None) -> NEP:
        merged = dict(self.parameters)
        for key, value in (params or {}).items():
            if key not in merged:
                raise ValueError(f"问题 {self.name} 没有参数 '{key}'，可用参数: {', '.join(merged)}")
            merged[key] = _coerce(value, merged[key])
        return self.constructor(**merged)


def _coerce(value: Any, default: Any) -> Any:
    """命令行传入的字符串按缺省值的类型转换"""
    if not isinstance(value, str):
        return value
    if isinstance(default, bool):
        return value.strip().lower() in {'1', 'true', 'yes', 'on'}
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    if isinstance(default, complex):
        return complex(value.replace(' ', ''))
    return value


def _gallery_default(key: str) -> int:
    return config.get_gallery_config()[key]


def dep0(n: int = 5, seed: int = 0) -> Dep:
    """单时滞 DEP：A₀、A₁ 为种子随机矩阵（numpy PCG64 正态分布），τ = 1"""
    rng = np.random.default_rng(seed)
    A0 = rng.standard_normal((n, n))
    A1 = rng.standard_normal((n, n))
    return Dep(A0, [(1.0, A1)])


def pep0(n: int = 5, seed: int = 0) -> Pep:
    """随机二次 PEP A₀ + λA₁ + λ²A₂"""
    rng = np.random.default_rng(seed)
    return Pep([rng.standard_normal((n, n)) for _ in range(3)])


def neuron0(kappa: float, beta: float, a1: float, a2: float,
            tau1: float, tau2: float, tau3: float) -> Dep:
    """
    二维神经元时滞模型
    M(λ) = −λI − κI + a₂E₂₁e^{−τ₁λ} + a₁E₁₂e^{−τ₂λ} + βI e^{−τ₃λ}
    """
    A0 = -kappa * np.eye(2)
    A1 = a2 * np.array([[0.0, 0.0], [1.0, 0.0]])
    A2 = a1 * np.array([[0.0, 1.0], [0.0, 0.0]])
    A3 = beta * np.eye(2)
    return Dep(A0, [(tau1, A1), (tau2, A2), (tau3, A3)])


def paper_spmf_5x5() -> Spmf:
    """A = ones，B = ones + I，C 为 B 上下翻转；f₁ = λ，f₂ = e^λ，f₃ = 1 + √λ"""
    A = np.ones((5, 5))
    B = np.ones((5, 5)) + np.eye(5)
    C = np.flipud(B)
    return Spmf([A, B, C], [linear(), exponential(1.0), sqrt(constant=1.0)])


def sqrt_spmf(n: int = 3, seed: int = 0) -> Spmf:
    """M(λ) = A − λI + √λ·B，√ 在 (−∞,0) 上有割线"""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, n))
    return Spmf([A, np.eye(n), B], [constant(1.0), linear(-1.0), sqrt()])


def many_terms(m: int = 200, n: int = 50, density: float = 0.01, seed: int = 0) -> Spmf:
    """
    m 项稀疏随机 SPMF：f₁ = 1，f₂ = λ，fⱼ = exp(j^{1/6}λ)，j = 3..m（下标从 1 计）
    只用于基准测试
    """
    rng = np.random.default_rng(seed)
    matrices = [scipy.sparse.random(n, n, density=density, random_state=rng).toarray() for _ in range(m)]
    functions = [constant(1.0), linear()] + [exponential((i + 1) ** (1 / 6)) for i in range(2, m)]
    return Spmf(matrices, functions[:m])


def _neuron_entry() -> GalleryEntry:
    return GalleryEntry('neuron0', '二维神经元时滞模型（3 个时滞）', config.get_neuron_params(), neuron0)


def _random_defaults() -> Dict[str, int]:
    return {'n': _gallery_default('n'), 'seed': _gallery_default('seed')}


def gallery_entries() -> Dict[str, GalleryEntry]:
    """全部画廊条目；参数缺省值取自当前配置"""
    return {
        'dep0': GalleryEntry('dep0', '随机单时滞 DEP', _random_defaults(), dep0),
        'pep0': GalleryEntry('pep0', '随机二次 PEP', _random_defaults(), pep0),
        'neuron0': _neuron_entry(),
        'sqrt_spmf': GalleryEntry('sqrt_spmf', '含 √λ 项的小规模 SPMF', {'n': 3, 'seed': 0}, sqrt_spmf),
        'paper_spmf_5x5': GalleryEntry('paper_spmf_5x5', '5×5 SPMF 示例 (λ, e^λ, 1+√λ)', {}, paper_spmf_5x5),
    }


def bench_entries() -> Dict[str, GalleryEntry]:
    """基准测试可用的问题：画廊条目加上 many_terms"""
    entries = gallery_entries()
    entries['many_terms'] = GalleryEntry(
        'many_terms', '200 项稀疏 SPMF (n=50)', {'m': 200, 'n': 50, 'density': 0.01, 'seed': 0}, many_terms)
    return entries


def gallery_names() -> List[str]:
    return list(gallery_entries())


def nep_gallery(name: str, params: Optional[Mapping[str, Any]] = None, **kwargs) -> NEP:
    """按名字构造画廊问题，未知名字抛出 UnknownName"""
    return _build(gallery_entries(), name, {**(params or {}), **kwargs})


def bench_problem(name: str, params: Optional[Mapping[str, Any]] = None) -> NEP:
    return _build(bench_entries(), name, params or {})


def _build(entries: Dict[str, GalleryEntry], name: str, params: Mapping[str, Any]) -> NEP:
    if name not in entries:
        raise UnknownName(name, list(entries))
    nep = entries[name].build(params)
    logger.debug(f"构造画廊问题 {name}: n={nep.n}, 参数 {dict(params)}")
    return nep


# ---- Newton 插值 ----

def chebyshev_nodes(m: int, a: float = -1.0, b: float = 1.0) -> np.ndarray:
    """[a, b] 上的 m 个第一类 Chebyshev 点"""
    k = np.arange(m)
    return (a + b) / 2 + (b - a) / 2 * np.cos((2 * k + 1) * np.pi / (2 * m))


@dataclass(frozen=True)
class NewtonInterpolant:
    """
    Newton 形式的插值多项式 p(x) = c₀ + c₁(x−x₀) + c₂(x−x₀)(x−x₁) + ...
    系数在扩展精度下计算后舍入为 complex128
    """
    nodes: np.ndarray
    coeffs: np.ndarray

    def scalar(self, x: complex) -> complex:
        p = self.coeffs[-1]
        for j in range(len(self.coeffs) - 2, -1, -1):
            p = self.coeffs[j] + (x - self.nodes[j]) * p
        return complex(p)

    def matrix(self, S: np.ndarray) -> np.ndarray:
        S = np.asarray(S, dtype=complex)
        I = np.eye(S.shape[0], dtype=complex)
        P = self.coeffs[-1] * I
        for j in range(len(self.coeffs) - 2, -1, -1):
            P = self.coeffs[j] * I + (S - self.nodes[j] * I) @ P
        return P

    def __call__(self, x):
        return self.scalar(x) if np.ndim(x) == 0 else self.matrix(x)

    def as_function(self, name: str = 'newton_interp') -> MatrixFunction:
        """可直接作为 Spmf 的一项使用（不可序列化）"""
        return MatrixFunction(name, self.scalar, self.matrix)


def _mp_value(f: Callable, x: mpmath.mpc) -> mpmath.mpc:
    try:
        return mpmath.mpc(f(x))
    except (TypeError, AttributeError):
        # 只接受双精度输入的函数
        return mpmath.mpc(complex(f(complex(x))))


def newton_interp_matfun(f: Callable, nodes: Sequence[complex], precision: int = 256) -> NewtonInterpolant:
    """
    在给定节点上对 f 做 Newton 插值

    差商表在 precision 位二进制精度下用 mpmath 计算，完成后舍入到双精度
    """
    nodes = np.asarray(nodes, dtype=complex).ravel()
    if nodes.size < 2:
        raise ValueError(f"插值至少需要 2 个节点，当前为 {nodes.size}")
    if len(set(nodes.tolist())) != nodes.size:
        raise ValueError("插值节点不能重复")
    if precision < 4 * 53:
        raise ValueError(f"扩展精度至少为 {4 * 53} 位，当前为 {precision}")

    with mpmath.workprec(precision):
        xs = [mpmath.mpc(complex(x)) for x in nodes]
        table = [_mp_value(f, x) for x in xs]
        coeffs = [table[0]]
        for j in range(1, len(xs)):
            table = [(table[i + 1] - table[i]) / (xs[i + j] - xs[i]) for i in range(len(table) - 1)]
            coeffs.append(table[0])
        rounded = np.array([complex(c) for c in coeffs], dtype=complex)

    if not np.all(np.isfinite(rounded)):
        raise OverflowError("差商系数超出双精度范围")
    return NewtonInterpolant(nodes, rounded)
