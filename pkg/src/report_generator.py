"""
报告生成模块
求解结果的表格、CSV、JSON 输出，以及基准测试的计时汇总
"""
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Sequence

import numpy as np
import pandas as pd

from .config import OUTPUT_FORMATS

logger = logging.getLogger(__name__)

CSV_COLUMNS = ['re', 'im', 'residual', 'iterations']
CSV_FLOAT_FORMAT = '%.17g'
TABLE_FLOAT_FORMAT = '.6g'


def _jsonable(value: Any) -> Any:
    """把选项和参数里的 numpy 标量、复数转换成 JSON 可表示的值"""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, complex):
        return value.real if value.imag == 0 else [value.real, value.imag]
    return value


@dataclass
class RunReport:
    """
    一次求解的结果记录

    每个特征值都带有残差；eigenvalues 以 (re, im) 对保存，JSON/CSV 往返不丢精度
    """
    problem: str
    solver: str
    params: Dict[str, Any] = field(default_factory=dict)
    options: Dict[str, Any] = field(default_factory=dict)
    eigenvalues: List[List[float]] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)
    iterations: int = 0
    wall_time_ms: float = 0.0
    peak_dimension: int = 0
    converged: bool = True
    message: str = ''

    def __post_init__(self):
        self.params = _jsonable(self.params)
        self.options = _jsonable(self.options)
        self.eigenvalues = [[float(re), float(im)] for re, im in self.eigenvalues]
        self.residuals = [float(r) for r in self.residuals]
        if len(self.eigenvalues) != len(self.residuals):
            raise ValueError(f"特征值个数 {len(self.eigenvalues)} 与残差个数 {len(self.residuals)} 不一致")
        self.iterations = int(self.iterations)
        self.peak_dimension = int(self.peak_dimension)
        self.wall_time_ms = float(self.wall_time_ms)

    @classmethod
    def from_eigenpairs(cls, problem: str, solver: str, lams: Sequence[complex], residuals: Sequence[float],
                        **kwargs) -> 'RunReport':
        eigenvalues = [[complex(l).real, complex(l).imag] for l in lams]
        return cls(problem, solver, eigenvalues=eigenvalues, residuals=list(residuals), **kwargs)

    @property
    def values(self) -> np.ndarray:
        return np.array([complex(re, im) for re, im in self.eigenvalues], dtype=complex)

    def converged_count(self, tol: float) -> int:
        return sum(1 for r in self.residuals if r < tol)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunReport':
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)

    @classmethod
    def from_json(cls, text: str) -> 'RunReport':
        return cls.from_dict(json.loads(text))

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame({
            're': [re for re, _ in self.eigenvalues],
            'im': [im for _, im in self.eigenvalues],
            'residual': self.residuals,
            'iterations': [self.iterations] * len(self.eigenvalues),
        }, columns=CSV_COLUMNS)

    def to_csv(self) -> str:
        """
        第一行是以 # 开头的 JSON 元数据，其后是 re, im, residual, iterations 四列，
        浮点数按 %.17g 写出
        """
        metadata = self.to_dict()
        for key in ('eigenvalues', 'residuals'):
            metadata.pop(key)
        buffer = io.StringIO()
        buffer.write('# ' + json.dumps(metadata, ensure_ascii=False) + '\n')
        self.to_dataframe().to_csv(buffer, index=False, float_format=CSV_FLOAT_FORMAT)
        return buffer.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> 'RunReport':
        header, _, body = text.partition('\n')
        if not header.startswith('# '):
            raise ValueError("CSV 报告缺少元数据行")
        metadata = json.loads(header[2:])
        df = pd.read_csv(io.StringIO(body), float_precision='round_trip')
        missing = [c for c in CSV_COLUMNS if c not in df.columns]
        if missing:
            raise ValueError(f"CSV 报告缺少列: {', '.join(missing)}")
        metadata['eigenvalues'] = [[float(re), float(im)] for re, im in zip(df['re'], df['im'])]
        metadata['residuals'] = [float(r) for r in df['residual']]
        logger.debug(f"读取 CSV 报告: {metadata.get('problem')} / {metadata.get('solver')}, {len(df)} 个特征值")
        return cls.from_dict(metadata)

    def to_table(self) -> str:
        """给人看的表格，特征值保留 6 位有效数字"""
        lines = [
            f"问题: {self.problem}  求解器: {self.solver}",
            f"迭代: {self.iterations}  耗时: {self.wall_time_ms:.1f} ms  最大子空间维数: {self.peak_dimension}",
        ]
        if self.message:
            lines.append(f"说明: {self.message}")
        if self.eigenvalues:
            df = self.to_dataframe().drop(columns=['iterations'])
            df.rename(columns={'re': 'Re λ', 'im': 'Im λ', 'residual': '残差'}, inplace=True)
            lines.append(df.to_markdown(index=False, floatfmt=TABLE_FLOAT_FORMAT))
        else:
            lines.append("没有特征值")
        return "\n".join(lines)


def render_report(report: RunReport, fmt: str = 'table') -> str:
    if fmt == 'table':
        return report.to_table()
    if fmt == 'csv':
        return report.to_csv()
    if fmt == 'json':
        return report.to_json()
    raise ValueError(f"未知的输出格式 '{fmt}'，可用格式: {', '.join(OUTPUT_FORMATS)}")


@dataclass
class BenchReport:
    """同一问题、同一求解器重复运行的计时汇总"""
    problem: str
    solver: str
    wall_times_ms: List[float] = field(default_factory=list)
    iterations: List[int] = field(default_factory=list)
    options: Dict[str, Any] = field(default_factory=dict)
    error: str = ''

    def __post_init__(self):
        self.options = _jsonable(self.options)

    @property
    def repeats(self) -> int:
        return len(self.wall_times_ms)

    @property
    def min_ms(self) -> float:
        return float(np.min(self.wall_times_ms)) if self.wall_times_ms else float('nan')

    @property
    def median_ms(self) -> float:
        return float(np.median(self.wall_times_ms)) if self.wall_times_ms else float('nan')

    @property
    def deterministic(self) -> bool:
        """各次运行的迭代步数是否一致"""
        return len(set(self.iterations)) <= 1

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.update(repeats=self.repeats, min_ms=self.min_ms, median_ms=self.median_ms)
        return data


def render_bench(benches: Sequence[BenchReport], fmt: str = 'table') -> str:
    if fmt == 'json':
        return json.dumps([b.to_dict() for b in benches], ensure_ascii=False, indent=2)
    df = pd.DataFrame([{
        'problem': b.problem,
        'solver': b.solver,
        'repeats': b.repeats,
        'min_ms': b.min_ms,
        'median_ms': b.median_ms,
        'iterations': '/'.join(str(i) for i in sorted(set(b.iterations))),
        'error': b.error,
    } for b in benches])
    if fmt == 'csv':
        return df.to_csv(index=False, float_format=CSV_FLOAT_FORMAT)
    if fmt == 'table':
        return df.to_markdown(index=False, floatfmt=TABLE_FLOAT_FORMAT)
    raise ValueError(f"未知的输出格式 '{fmt}'，可用格式: {', '.join(OUTPUT_FORMATS)}")


def render_listing(problems: Sequence[Dict[str, Any]], solvers: Sequence[str]) -> str:
    """画廊问题及其参数，后附可用求解器"""
    df = pd.DataFrame([{
        'name': p['name'],
        'parameters': ', '.join(f"{k}={v}" for k, v in p['parameters'].items()) or '-',
        'description': p['description'],
    } for p in problems])
    return df.to_markdown(index=False) + "\n\n求解器: " + ", ".join(solvers)
