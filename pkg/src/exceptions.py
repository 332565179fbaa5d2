"""
异常定义模块
所有求解器与问题类型共用的异常层次
"""
from typing import Any, List, Optional


class NepError(Exception):
    """非线性特征值问题相关异常的基类"""


class CapabilityError(NepError):
    """问题对象没有可用的计算路径"""


class DomainError(NepError, ValueError):
    """λ 落在问题声明的奇异点上（分支割线、Möbius 极点等）"""

    def __init__(self, message: str, term: Optional[int] = None):
        if term is not None:
            message = f"第 {term} 项: {message}"
        super().__init__(message)
        self.term = term


class SingularSystem(NepError):
    """M(λ) 分解时检测到（近似）奇异，说明 λ 接近特征值"""

    def __init__(self, message: str, shift: Optional[complex] = None):
        super().__init__(message)
        self.shift = shift


class SingularShift(SingularSystem):
    """求解器目标点或紧缩求值点落在谱上"""


class NoConvergence(NepError):
    """
    迭代在最大步数内未收敛

    Attributes:
        lam: 最好的特征值迭代值（Krylov 方法为全部 Ritz 值）
        v: 对应的向量
        history: 误差历史
        partial: 多特征对驱动器中已找到的特征对列表
    """

    def __init__(self, message: str, lam: Any = None, v: Any = None,
                 history: Optional[List[float]] = None,
                 partial: Optional[List[Any]] = None,
                 errors: Any = None):
        super().__init__(message)
        self.lam = lam
        self.v = v
        self.history = history if history is not None else []
        self.partial = partial if partial is not None else []
        self.errors = errors


class RankTestFailed(NepError):
    """围道积分方法的秩检测没有发现秩亏（草图秩 ℓ 可能太小）"""


class UnknownName(NepError, KeyError):
    """未知的画廊问题名或求解器名"""

    def __init__(self, name: str, valid: List[str]):
        self.name = name
        self.valid = list(valid)
        super().__init__(f"未知名称 '{name}'，可用名称: {', '.join(self.valid)}")

    def __str__(self) -> str:
        return self.args[0]
