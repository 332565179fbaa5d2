#!/usr/bin/env python3
"""
非线性特征值问题求解系统
主执行脚本
"""
import sys
import argparse
import logging
from typing import Dict, List, Optional

from src.config import config
from src.logger import setup_logging
from src.report_generator import OUTPUT_FORMATS, render_bench, render_listing, render_report
from src.tasks import INVALID, run_bench_task, run_list_task, run_solve_task, solver_names

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_BAD_ARGUMENTS = 2


def parse_params(items: Optional[List[str]], parser: argparse.ArgumentParser) -> Dict[str, str]:
    """--param k=v 解析为字典，值的类型由画廊条目的缺省值决定"""
    params = {}
    for item in items or []:
        key, sep, value = item.partition('=')
        if not sep or not key.strip():
            parser.error(f"--param 的格式应为 k=v，当前为 '{item}'")
        params[key.strip()] = value.strip()
    return params


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='非线性特征值问题求解系统')
    parser.add_argument('task', choices=['solve', 'list', 'bench'], help='要执行的任务类型')
    parser.add_argument('--problem', action='append',
                        help='画廊问题名（bench 任务可重复给出多个）')
    parser.add_argument('--problem-file', type=str,
                        help='从 JSON 文件读取问题（仅用于solve任务）')
    parser.add_argument('--param', action='append', metavar='K=V',
                        help='覆盖画廊问题参数，可重复')
    parser.add_argument('--solver', choices=solver_names(), default='augnewton',
                        help='求解器（默认：augnewton）')
    parser.add_argument('--target', type=complex, default=0.0,
                        help='目标点 σ，负数或复数请写成 --target=-2+1j（默认：0）')
    parser.add_argument('--tol', type=float, help='收敛容差（默认取配置）')
    parser.add_argument('--maxit', type=int, help='最大迭代步数（默认取配置）')
    parser.add_argument('--num-eigs', type=int, default=1, help='需要的特征值个数（默认：1）')
    parser.add_argument('--radius', type=float, default=1.0, help='beyn 围道半径（默认：1）')
    parser.add_argument('--moments', type=int, help='beyn 矩块数（默认取配置）')
    parser.add_argument('--seed', type=int, help='画廊随机问题和 beyn 草图矩阵的种子')
    parser.add_argument('--format', choices=OUTPUT_FORMATS, default=config.get_output_format(),
                        help='输出格式（默认取 NEP_OUTPUT_FORMAT 或配置）')
    parser.add_argument('--json', action='store_const', const='json', dest='format',
                        help='等价于 --format json')
    parser.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help='日志级别（默认取配置）')
    parser.add_argument('--repeats', type=int, help='基准测试重复次数（默认取配置）')
    parser.add_argument('--parallel', action='store_true',
                        help='多个问题的基准测试并行执行')
    parser.add_argument('--derspmf', action='store_true',
                        help='在目标点预计算 SPMF 的导数表后再求解')
    return parser


def request_args(args: argparse.Namespace) -> Dict:
    return {
        'solver': args.solver,
        'target': args.target,
        'tol': args.tol,
        'maxit': args.maxit,
        'num_eigs': args.num_eigs,
        'radius': args.radius,
        'moments': args.moments,
        'seed': 0 if args.seed is None else args.seed,
        'derspmf': args.derspmf,
    }


def exit_code(result: dict) -> int:
    if result.get('success', False):
        return EXIT_OK
    return EXIT_BAD_ARGUMENTS if result.get('error_type') == INVALID else EXIT_NOT_CONVERGED


def main(argv: Optional[List[str]] = None):
    """主函数"""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    params = parse_params(args.param, parser)
    problems = args.problem or []

    if args.task == 'list':
        result = run_list_task()
        print(render_listing(result['problems'], result['solvers']))
        sys.exit(EXIT_OK)

    if args.task == 'solve':
        if len(problems) > 1:
            parser.error("solve 任务只能给出一个 --problem")
        if not problems and not args.problem_file:
            parser.error("solve 任务需要 --problem 或 --problem-file")
        result = run_solve_task(problems[0] if problems else None, params, args.problem_file,
                                **request_args(args))
        if result.get('report') is not None:
            print(render_report(result['report'], args.format))
    else:
        if args.problem_file:
            parser.error("bench 任务不支持 --problem-file")
        result = run_bench_task(problems, params, args.repeats, args.parallel, **request_args(args))
        if result.get('benches'):
            print(render_bench(result['benches'], args.format))

    # 根据结果设置退出码
    code = exit_code(result)
    if code != EXIT_OK:
        print(f"任务执行失败: {result.get('error', '未知错误')}", file=sys.stderr)
        if code == EXIT_BAD_ARGUMENTS:
            parser.print_usage(sys.stderr)
    sys.exit(code)


if __name__ == "__main__":
    main()
