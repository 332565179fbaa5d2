"""
求解器配置
取值顺序：环境变量 > config.ini > 内置缺省值；本地开发可用 .env 文件设置环境变量
"""
import configparser
import os
from typing import Any, Callable, Dict, Optional

from dotenv import load_dotenv

OUTPUT_FORMATS = ('table', 'csv', 'json')


def parse_bool(value: Any) -> bool:
    """'1'/'true'/'yes'/'on'（不区分大小写）为真，其余为假"""
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in {'1', 'true', 'yes', 'on'}


class Config:
    """
    分层配置

    每个取值都同时有 ini 位置 (section, key) 和环境变量名；
    任一层的值无法转换成目标类型时直接使用缺省值，不向下一层回退
    """

    def __init__(self, config_path: str = 'config.ini'):
        load_dotenv()
        self.config_file = config_path
        self.ini = configparser.ConfigParser()
        if not os.path.exists(config_path):
            return
        try:
            self.ini.read(config_path, encoding='utf-8')
        except (configparser.Error, UnicodeDecodeError):
            # 文件损坏时等同于没有配置文件
            self.ini = configparser.ConfigParser()

    def _lookup(self, section: str, key: str, env_var: str) -> Optional[str]:
        raw = os.getenv(env_var)
        if raw is not None:
            return raw
        try:
            return self.ini.get(section, key, fallback=None)
        except (configparser.Error, UnicodeDecodeError):
            return None

    def _value(self, section: str, key: str, env_var: str, default: Any,
               convert: Callable[[str], Any] = str) -> Any:
        raw = self._lookup(section, key, env_var)
        if raw is None:
            return default
        try:
            return convert(raw)
        except (ValueError, TypeError):
            return default

    def get_logging_config(self) -> Dict[str, str]:
        """log_file 为空时只写控制台"""
        return {
            'log_level': self._value('logging', 'log_level', 'LOGGING_LOG_LEVEL', 'INFO'),
            'log_file': self._value('logging', 'log_file', 'LOGGING_LOG_FILE', ''),
        }

    def get_solver_config(self) -> Dict[str, Any]:
        """Newton 类求解器及 Rayleigh 泛函的缺省参数"""
        return {
            'tol': self._value('solver', 'tol', 'SOLVER_TOL', 1e-12, float),
            'maxit': self._value('solver', 'maxit', 'SOLVER_MAXIT', 100, int),
            'armijo': self._value('solver', 'armijo', 'SOLVER_ARMIJO', False, parse_bool),
            'displaylevel': self._value('solver', 'displaylevel', 'SOLVER_DISPLAYLEVEL', 0, int),
            'rf_tol': self._value('solver', 'rf_tol', 'SOLVER_RF_TOL', 1e-14, float),
            'rf_maxit': self._value('solver', 'rf_maxit', 'SOLVER_RF_MAXIT', 50, int),
        }

    def get_krylov_config(self) -> Dict[str, Any]:
        return {
            'maxit': self._value('krylov', 'maxit', 'IAR_MAXIT', 30, int),
            'neigs': self._value('krylov', 'neigs', 'IAR_NEIGS', 6, int),
            'check_error_every': self._value('krylov', 'check_error_every', 'IAR_CHECK_ERROR_EVERY', 1, int),
        }

    def get_contour_config(self) -> Dict[str, Any]:
        return {
            'quad_nodes': self._value('contour', 'quad_nodes', 'BEYN_QUAD_NODES', 128, int),
            'sketch_rank': self._value('contour', 'sketch_rank', 'BEYN_SKETCH_RANK', 8, int),
            'rank_tol': self._value('contour', 'rank_tol', 'BEYN_RANK_TOL', 1e-10, float),
            'moments': self._value('contour', 'moments', 'BEYN_MOMENTS', 1, int),
        }

    def get_gallery_config(self) -> Dict[str, Any]:
        """随机画廊问题 (dep0, pep0) 的规模和种子"""
        return {
            'n': self._value('gallery', 'n', 'GALLERY_N', 5, int),
            'seed': self._value('gallery', 'seed', 'GALLERY_SEED', 0, int),
        }

    def get_neuron_params(self) -> Dict[str, float]:
        """
        neuron0 时滞模型参数
        缺省值取自 DDE-BIFTOOL 的 neuron 演示模型
        """
        defaults = {
            'kappa': 0.5, 'beta': -1.0, 'a1': 1.0, 'a2': 2.34,
            'tau1': 0.2, 'tau2': 0.2, 'tau3': 1.5,
        }
        return {
            name: self._value('neuron0', name, f"NEURON0_{name.upper()}", value, float)
            for name, value in defaults.items()
        }

    def get_output_format(self) -> str:
        """CLI 缺省输出格式，未知格式按 table 处理"""
        fmt = self._value('cli', 'output_format', 'NEP_OUTPUT_FORMAT', 'table').strip().lower()
        return fmt if fmt in OUTPUT_FORMATS else 'table'

    def get_bench_repeats(self) -> int:
        return self._value('cli', 'bench_repeats', 'BENCH_REPEATS', 5, int)

    def get_max_workers(self) -> int:
        """Beyn 求积节点和多问题基准测试共用的线程数"""
        return self._value('executor', 'max_workers', 'EXECUTOR_MAX_WORKERS', 4, int)


config = Config()
