"""
围道积分求解器模块（Beyn 方法）
圆周上的梯形求积得到 M(ξ)⁻¹R 的各阶矩，块 Hankel 矩阵的 SVD 判秩后化为小规模线性特征值问题
"""
import concurrent.futures
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .config import config
from .exceptions import RankTestFailed, SingularShift, SingularSystem
from .krylov_solvers import EigenOutcome
from .nep_core import NEP, SolveOptions
from .newton_solvers import _resolve_options

logger = logging.getLogger(__name__)

# 块 Hankel 矩阵满秩时，提取的特征对残差低于此值才视为围道内特征值没有多于 K·ℓ 个
FULL_RANK_RESIDUAL_TOL = 1e-6


def _contour_default(key: str):
    return field(default_factory=lambda: config.get_contour_config()[key])


@dataclass
class ContourSpec:
    """
    圆形围道与求积参数

    Attributes:
        center, radius: 圆心与半径
        quad_nodes: 梯形求积节点数 N_q
        sketch_rank: 随机草图矩阵 R 的列数 ℓ；为 None 时取 min(n, 配置值)
        moments: 块 Hankel 矩阵的块数 K，可求出的特征值个数上限为 K·ℓ
        rank_tol: 相对秩判定阈值
        seed: 草图矩阵的随机种子
    """
    center: complex = 0.0
    radius: float = 1.0
    quad_nodes: int = _contour_default('quad_nodes')
    sketch_rank: Optional[int] = None
    moments: int = _contour_default('moments')
    rank_tol: float = _contour_default('rank_tol')
    seed: int = 0

    def __post_init__(self):
        self.center = complex(self.center)
        if not self.radius > 0:
            raise ValueError(f"围道半径必须为正，当前为 {self.radius}")
        if int(self.quad_nodes) < 8:
            raise ValueError(f"求积节点数至少为 8，当前为 {self.quad_nodes}")
        if int(self.moments) < 1:
            raise ValueError(f"矩的块数至少为 1，当前为 {self.moments}")
        self.quad_nodes = int(self.quad_nodes)
        self.moments = int(self.moments)

    def sketch_columns(self, n: int) -> int:
        ell = min(n, config.get_contour_config()['sketch_rank']) if self.sketch_rank is None else int(self.sketch_rank)
        if not 1 <= ell <= n:
            raise ValueError(f"草图秩 ℓ 必须在 1 和 n={n} 之间，当前为 {ell}")
        return ell

    def nodes(self) -> np.ndarray:
        """ξⱼ = c + r·e^{2πij/N_q}"""
        return self.center + self.radius * np.exp(2j * np.pi * np.arange(self.quad_nodes) / self.quad_nodes)

    def contains(self, lam: complex) -> bool:
        return abs(lam - self.center) < self.radius


def beyn_contour(nep: NEP, contour: Optional[ContourSpec] = None, opts: Optional[SolveOptions] = None,
                 parallel: bool = True, **kwargs) -> EigenOutcome:
    """
    Beyn 围道积分方法

    A_p = (1/2πi)∮ ((ξ−c)/r)^p M(ξ)⁻¹R dξ 由梯形公式计算，各节点的线性求解在线程池中并行，
    结果按节点顺序归约。返回围道内部的特征对及其误差。
    """
    contour = contour or ContourSpec()
    opts = _resolve_options(opts, kwargs)
    n = nep.n
    ell = contour.sketch_columns(n)
    K = contour.moments

    rng = np.random.default_rng(contour.seed)
    R = rng.standard_normal((n, ell)) + 1j * rng.standard_normal((n, ell))
    nodes = contour.nodes()

    def solve_at(xi: complex) -> np.ndarray:
        try:
            return nep.factorize(xi).solve(R)
        except SingularSystem as e:
            logger.warning(f"beyn_contour: 求积节点 ξ={xi} 上 M(ξ) 奇异，围道上可能有特征值")
            raise SingularShift(f"求积节点 ξ={xi} 落在谱上", shift=xi) from e

    if parallel:
        with concurrent.futures.ThreadPoolExecutor(max_workers=config.get_max_workers()) as executor:
            solutions = list(executor.map(solve_at, nodes))
    else:
        solutions = [solve_at(xi) for xi in nodes]

    # 归一化坐标 z = (ξ−c)/r，dξ = r·z·dθ·i
    z = (nodes - contour.center) / contour.radius
    weights = z[None, :] ** np.arange(2 * K)[:, None] * z[None, :] * contour.radius / contour.quad_nodes
    stacked = np.stack(solutions)
    moments = np.einsum('pj,jab->pab', weights, stacked)

    H0 = np.block([[moments[i + j] for j in range(K)] for i in range(K)])
    H1 = np.block([[moments[i + j + 1] for j in range(K)] for i in range(K)])
    U, s, Wh = scipy.linalg.svd(H0, full_matrices=False)

    scale = contour.radius * max(np.linalg.norm(sol) for sol in solutions)
    rank = int(np.sum(s > contour.rank_tol * scale))
    logger.debug(f"beyn_contour: 奇异值 {s[:min(len(s), 8)]}, 判定秩 {rank}/{K * ell}")

    if rank == 0:
        logger.info("beyn_contour: 围道内没有特征值")
        return EigenOutcome(np.array([], dtype=complex), np.zeros((n, 0), dtype=complex),
                            np.array([]), 1, 0, 'beyn_contour')

    U, s, Wh = U[:, :rank], s[:rank], Wh[:rank, :]
    B = U.conj().T @ H1 @ (Wh.conj().T / s[None, :])
    mu, Y = scipy.linalg.eig(B)
    lams = contour.center + contour.radius * mu
    V = U[:n, :] @ Y
    V = V / np.linalg.norm(V, axis=0)

    errmeasure = opts.errmeasure_for(nep)
    inside = np.array([contour.contains(l) for l in lams], dtype=bool)
    errors = np.array([errmeasure(l, V[:, j]) for j, l in enumerate(lams)])

    # 满秩时围道内的特征值可能多于 K·ℓ；只有提取出的特征对全部在围道内且收敛才接受
    if rank == K * ell and not (np.all(inside) and np.all(errors < max(opts.tol, FULL_RANK_RESIDUAL_TOL))):
        raise RankTestFailed(f"块 Hankel 矩阵满秩 ({rank}) 且提取的特征对未通过检验，"
                             f"草图秩 ℓ={ell} 或矩块数 K={K} 太小")

    lams, V, errors = lams[inside], V[:, inside], errors[inside]
    for l, err in zip(lams, errors):
        if err >= opts.tol:
            logger.debug(f"beyn_contour: λ={l:.8g} 的误差 {err:.2e} 未达到 tol")
    return EigenOutcome(lams, V, errors, 1, rank, 'beyn_contour')
