"""
日志配置
库模块只通过 logging.getLogger(__name__) 记录，处理器由命令行入口统一安装
"""
import logging
import sys
import time
from typing import Optional

from .config import config

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'


def setup_logging(level: Optional[str] = None) -> logging.Logger:
    """
    安装根日志处理器，重复调用只更新级别

    结果写 stdout，日志写 stderr；配置了 log_file 时再写一份到文件
    """
    settings = config.get_logging_config()
    name = (level or settings['log_level']).upper()
    root = logging.getLogger()
    root.setLevel(getattr(logging, name, logging.INFO))
    if root.handlers:
        return root

    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)
    handlers = [logging.StreamHandler(sys.stderr)]
    if settings['log_file']:
        handlers.append(logging.FileHandler(settings['log_file'], encoding='utf-8'))
    for handler in handlers:
        handler.setFormatter(formatter)
        root.addHandler(handler)
    return root


def log_task_start(task_name: str) -> float:
    """记录任务开始，返回起始时刻供 log_task_end 计算耗时"""
    logging.getLogger(__name__).info(f"🚀 开始: {task_name}")
    return time.perf_counter()


def log_task_end(task_name: str, start_time: float, **details):
    elapsed = time.perf_counter() - start_time
    summary = ", ".join(f"{k}={v}" for k, v in details.items())
    suffix = f" [{summary}]" if summary else ""
    logging.getLogger(__name__).info(f"✅ 完成: {task_name}，用时 {elapsed:.3f} 秒{suffix}")


def log_error(task_name: str, error: BaseException):
    """记录失败的任务，附带堆栈"""
    logging.getLogger(__name__).error(f"❌ 失败: {task_name}: {error}", exc_info=error)
