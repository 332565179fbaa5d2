"""
核心任务模块
命令行的 solve / list / bench 三个任务；异常在这里转换成结果字典，不向外抛出
"""
import concurrent.futures
import logging
import os
import time
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .config import config
from .contour_solvers import ContourSpec, beyn_contour
from .exceptions import NepError, NoConvergence, UnknownName
from .gallery import bench_entries, bench_problem, gallery_entries
from .krylov_solvers import KRYLOV_SOLVERS, EigenOutcome
from .logger import log_error, log_task_end, log_task_start
from .nep_core import NEP, SolveOptions
from .nep_types import Spmf, load_problem, make_derspmf
from .newton_solvers import NEWTON_SOLVERS, SolveOutcome, solve_k_eigenpairs
from .report_generator import BenchReport, RunReport

logger = logging.getLogger(__name__)

# 结果字典里的 error_type，main.py 据此决定退出码
INVALID = 'invalid'
NOT_CONVERGED = 'no_convergence'
FAILED = 'failed'

SOLVER_KINDS: Dict[str, str] = {
    **{name: 'newton' for name in NEWTON_SOLVERS},
    **{name: 'krylov' for name in KRYLOV_SOLVERS},
    'beyn': 'contour',
}


def solver_names() -> List[str]:
    return list(SOLVER_KINDS)


@dataclass
class SolveRequest:
    """
    一次求解的参数

    Attributes:
        solver: 求解器名
        target: 目标点 σ（Beyn 方法为圆心）
        tol, maxit: 为 None 时取配置；Krylov 方法的 maxit 缺省取 [krylov] 段
        num_eigs: 需要的特征值个数
        radius, moments: Beyn 方法的围道半径和矩块数
        seed: Beyn 草图矩阵的种子
        derspmf: 是否先在 target 处预计算导数表
    """
    solver: str = 'augnewton'
    target: complex = 0.0
    tol: Optional[float] = None
    maxit: Optional[int] = None
    num_eigs: int = 1
    radius: float = 1.0
    moments: Optional[int] = None
    seed: int = 0
    derspmf: bool = False

    def __post_init__(self):
        if self.solver not in SOLVER_KINDS:
            raise UnknownName(self.solver, solver_names())
        if int(self.num_eigs) < 1:
            raise ValueError(f"num_eigs 必须至少为 1，当前为 {self.num_eigs}")
        self.target = complex(self.target)

    @property
    def kind(self) -> str:
        return SOLVER_KINDS[self.solver]

    def solve_options(self) -> SolveOptions:
        overrides = {'sigma': self.target}
        if self.tol is not None:
            overrides['tol'] = self.tol
        # iar 和 iar_chebyshev 的 maxit 是 Krylov 子空间维数，单独传入
        if self.maxit is not None and self.solver not in ('iar', 'iar_chebyshev'):
            overrides['maxit'] = self.maxit
        return SolveOptions(**overrides)

    def krylov_maxit(self) -> int:
        return self.maxit if self.maxit is not None else config.get_krylov_config()['maxit']

    def describe(self) -> Dict[str, Any]:
        options = {k: v for k, v in asdict(self).items() if v is not None}
        options['tol'] = self.solve_options().tol
        return options


def _problem_params(name: str, params: Mapping[str, Any], seed: Optional[int]) -> Dict[str, Any]:
    merged = dict(params)
    entry = bench_entries().get(name)
    if seed is not None and entry is not None and 'seed' in entry.parameters:
        merged.setdefault('seed', seed)
    return merged


def build_problem(problem: Optional[str] = None, params: Optional[Mapping[str, Any]] = None,
                  problem_file: Optional[str] = None, seed: Optional[int] = None) -> Tuple[str, Dict[str, Any], NEP]:
    """按画廊名或 JSON 文件构造问题，返回 (显示名, 实际参数, 问题)"""
    if problem_file:
        if params:
            raise ValueError("--param 不能与 --problem-file 同时使用")
        return os.path.basename(problem_file), {}, load_problem(problem_file)
    if not problem:
        raise ValueError("必须给出 --problem 或 --problem-file")
    merged = _problem_params(problem, params or {}, seed)
    return problem, merged, bench_problem(problem, merged)


def _maybe_wrap(nep: NEP, request: SolveRequest) -> NEP:
    if not request.derspmf:
        return nep
    to_spmf = getattr(nep, 'to_spmf', None)
    if to_spmf is None:
        raise ValueError(f"{type(nep).__name__} 不能转换为 SPMF，无法使用 --derspmf")
    spmf = nep if isinstance(nep, Spmf) else to_spmf()
    return make_derspmf(spmf, request.target, request.krylov_maxit())


def _run_newton(nep: NEP, request: SolveRequest,
                opts: SolveOptions) -> Tuple[List[Tuple[complex, np.ndarray]], int]:
    method = NEWTON_SOLVERS[request.solver]
    if request.num_eigs == 1:
        outcome = method(nep, opts)
        return [(outcome.lam, outcome.v)], outcome.iterations

    iterations = [0]

    def counted(problem: NEP, sub_opts: SolveOptions) -> SolveOutcome:
        outcome = method(problem, sub_opts)
        iterations[0] += outcome.iterations
        return outcome

    return solve_k_eigenpairs(nep, request.num_eigs, opts, method=counted), iterations[0]


def _run_eigen(nep: NEP, request: SolveRequest, opts: SolveOptions) -> EigenOutcome:
    if request.kind == 'contour':
        contour = ContourSpec(center=request.target, radius=request.radius, seed=request.seed,
                              **({'moments': request.moments} if request.moments is not None else {}))
        return beyn_contour(nep, contour, opts)
    if request.solver == 'nlar':
        return KRYLOV_SOLVERS['nlar'](nep, opts, neigs=request.num_eigs)
    return KRYLOV_SOLVERS[request.solver](nep, opts, neigs=request.num_eigs, maxit=request.krylov_maxit())


def _residuals(nep: NEP, opts: SolveOptions, lams: Sequence[complex], V: Optional[np.ndarray]) -> List[float]:
    errmeasure = opts.errmeasure_for(nep)
    if V is None:
        return [float('inf')] * len(lams)
    return [float(errmeasure(lam, V[:, j])) for j, lam in enumerate(lams)]


def solve_problem(nep: NEP, request: SolveRequest, problem: str = 'problem',
                  params: Optional[Mapping[str, Any]] = None) -> RunReport:
    """
    求解并生成报告

    未收敛时抛出 NoConvergence，异常的 report 属性中带有已得到的近似结果
    """
    opts = request.solve_options()
    wrapped = _maybe_wrap(nep, request)
    base = dict(problem=problem, solver=request.solver, params=dict(params or {}), options=request.describe())
    start = time.perf_counter()
    try:
        if request.kind == 'newton':
            pairs, iterations = _run_newton(wrapped, request, opts)
            elapsed = (time.perf_counter() - start) * 1000
            lams = [lam for lam, _ in pairs]
            V = np.column_stack([v for _, v in pairs])
            return RunReport.from_eigenpairs(lams=lams, residuals=_residuals(nep, opts, lams, V),
                                             iterations=iterations, wall_time_ms=elapsed,
                                             peak_dimension=1, **base)
        outcome = _run_eigen(wrapped, request, opts)
        elapsed = (time.perf_counter() - start) * 1000
        residuals = _residuals(nep, opts, outcome.eigenvalues, outcome.eigenvectors)
        return RunReport.from_eigenpairs(lams=outcome.eigenvalues, residuals=residuals,
                                         iterations=outcome.iterations, wall_time_ms=elapsed,
                                         peak_dimension=outcome.peak_dimension, **base)
    except NoConvergence as e:
        elapsed = (time.perf_counter() - start) * 1000
        e.report = _partial_report(nep, opts, e, base, elapsed)
        raise


def _partial_report(nep: NEP, opts: SolveOptions, error: NoConvergence, base: Dict[str, Any],
                    elapsed: float) -> RunReport:
    """未收敛时的报告：多特征对驱动器给已找到的对，Krylov 方法给全部 Ritz 对，Newton 方法给最好的迭代值"""
    if error.partial:
        lams = [lam for lam, _ in error.partial]
        V = np.column_stack([v for _, v in error.partial])
    elif error.lam is not None and np.ndim(error.lam) == 1:
        lams, V = list(error.lam), error.v
    elif error.lam is not None and error.v is not None:
        lams, V = [error.lam], np.asarray(error.v).reshape(-1, 1)
    else:
        lams, V = [], None
    return RunReport.from_eigenpairs(lams=lams, residuals=_residuals(nep, opts, lams, V),
                                     iterations=len(error.history), wall_time_ms=elapsed,
                                     converged=False, message=str(error), **base)


def _failure(error: Exception, error_type: str, **extra) -> Dict[str, Any]:
    return {'success': False, 'error': str(error), 'error_type': error_type, **extra}


def run_solve_task(problem: Optional[str] = None, params: Optional[Mapping[str, Any]] = None,
                   problem_file: Optional[str] = None, **request_args) -> Dict[str, Any]:
    """
    执行求解任务

    Returns:
        {'success', 'report', 'error', 'error_type'}；至少一个特征对收敛时 success 为 True
    """
    task_name = f"solve {problem or problem_file}"
    start_time = log_task_start(task_name)
    try:
        request = SolveRequest(**request_args)
        name, merged, nep = build_problem(problem, params, problem_file, request.seed)
        report = solve_problem(nep, request, name, merged)
    except NoConvergence as e:
        logger.warning(f"{task_name} 未收敛: {e}")
        return _failure(e, NOT_CONVERGED, report=getattr(e, 'report', None))
    except UnknownName as e:
        logger.error(f"{task_name} 参数错误: {e}")
        return _failure(e, INVALID)
    except NepError as e:
        log_error(task_name, e)
        return _failure(e, FAILED)
    except (ValueError, TypeError, KeyError, OSError) as e:
        logger.error(f"{task_name} 参数错误: {e}")
        return _failure(e, INVALID)

    tol = request.solve_options().tol
    converged = report.converged_count(tol)
    log_task_end(task_name, start_time, eigenvalues=len(report.eigenvalues), converged=converged)
    if converged == 0:
        report.converged = False
        return {'success': False, 'report': report, 'error': f"没有特征对达到 tol={tol:g}",
                'error_type': NOT_CONVERGED}
    return {'success': True, 'report': report}


def run_list_task() -> Dict[str, Any]:
    """列出画廊问题（含参数缺省值）和求解器"""
    problems = [
        {'name': e.name, 'description': e.description, 'parameters': dict(e.parameters)}
        for e in gallery_entries().values()
    ]
    return {'success': True, 'problems': problems, 'solvers': solver_names()}


def bench_one(problem: str, params: Mapping[str, Any], request: SolveRequest, repeats: int) -> BenchReport:
    """同一问题重复求解 repeats 次；问题构造和导数表预计算不计入时间"""
    name, merged, nep = build_problem(problem, params, seed=request.seed)
    wrapped = _maybe_wrap(nep, request)
    plain = SolveRequest(**{**asdict(request), 'derspmf': False})
    bench = BenchReport(name, request.solver, options=request.describe())
    for i in range(repeats):
        try:
            report = solve_problem(wrapped, plain, name, merged)
        except NoConvergence as e:
            bench.error = str(e)
            break
        bench.wall_times_ms.append(report.wall_time_ms)
        bench.iterations.append(report.iterations)
        logger.debug(f"bench {name}/{request.solver} 第 {i + 1}/{repeats} 次: {report.wall_time_ms:.1f} ms")
    return bench


def run_bench_task(problems: Sequence[str], params: Optional[Mapping[str, Any]] = None,
                   repeats: Optional[int] = None, parallel: bool = False, **request_args) -> Dict[str, Any]:
    """
    执行基准测试任务

    每个问题的重复运行始终顺序执行；parallel 只在多个问题之间并行
    """
    task_name = f"bench {', '.join(problems)}"
    start_time = log_task_start(task_name)
    repeats = config.get_bench_repeats() if repeats is None else int(repeats)
    try:
        if repeats < 1:
            raise ValueError(f"repeats 必须至少为 1，当前为 {repeats}")
        if not problems:
            raise ValueError("至少需要一个 --problem")
        request = SolveRequest(**request_args)
        unknown = [p for p in problems if p not in bench_entries()]
        if unknown:
            raise UnknownName(unknown[0], list(bench_entries()))
    except (NepError, ValueError, TypeError) as e:
        logger.error(f"{task_name} 参数错误: {e}")
        return _failure(e, INVALID)

    def run(problem: str) -> BenchReport:
        return bench_one(problem, params or {}, request, repeats)

    try:
        if parallel and len(problems) > 1:
            with concurrent.futures.ThreadPoolExecutor(max_workers=config.get_max_workers()) as executor:
                benches = list(executor.map(run, problems))
        else:
            benches = [run(p) for p in problems]
    except NepError as e:
        log_error(task_name, e)
        return _failure(e, FAILED)
    except (ValueError, TypeError, KeyError) as e:
        logger.error(f"{task_name} 参数错误: {e}")
        return _failure(e, INVALID)

    failed = [b for b in benches if b.error]
    log_task_end(task_name, start_time, problems=len(benches), failed=len(failed))
    if failed:
        return {'success': False, 'benches': benches, 'error': failed[0].error, 'error_type': NOT_CONVERGED}
    return {'success': True, 'benches': benches}
