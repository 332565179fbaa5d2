"""
Krylov 与投影类求解器模块
Taylor 基和 Chebyshev 基的无穷 Arnoldi 方法，以及非线性 Arnoldi（投影 + 内层求解器）
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg

from .chebyshev import ChebyshevFrame, compute_y0
from .config import config
from .exceptions import NoConvergence, SingularShift, SingularSystem
from .nep_core import NEP, LinSolver, SolveOptions
from .newton_solvers import (NewtonState, SolveOutcome, _check, _no_convergence, _outcome,
                             _resolve_options, mslp, solve_k_eigenpairs)
from .transforms import create_proj_nep, set_projectmatrices

logger = logging.getLogger(__name__)

DGKS_ETA = 1 / np.sqrt(2)
BREAKDOWN_TOL = 1e-14


@dataclass
class EigenOutcome:
    """
    多个特征对的求解结果，可以按 (Λ, V) 解包
    """
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    errors: np.ndarray
    iterations: int
    peak_dimension: int = 0
    method: str = ''
    history: List[float] = field(default_factory=list)

    def __iter__(self):
        yield self.eigenvalues
        yield self.eigenvectors

    def __len__(self) -> int:
        return len(self.eigenvalues)


def orthogonalize(Q: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    修正 Gram-Schmidt，范数下降到 1/√2 以下时再正交化一次（DGKS）

    Returns:
        (正交化后的 y, 投影系数 h)
    """
    y = y.copy()
    h = np.zeros(Q.shape[1], dtype=complex)
    for _ in range(2):
        before = np.linalg.norm(y)
        for j in range(Q.shape[1]):
            c = np.vdot(Q[:, j], y)
            y -= c * Q[:, j]
            h[j] += c
        if np.linalg.norm(y) > DGKS_ETA * before:
            break
    return y, h


class ArnoldiFactorization:
    """
    无穷 Arnoldi 的结构化基

    第 j 列只有前 n(j+1) 个分量非零，按 n 个一块存放展开系数
    """

    def __init__(self, n: int, maxit: int, v0: np.ndarray):
        self.n = n
        self.maxit = maxit
        self.Q = np.zeros((n * (maxit + 1), maxit + 1), dtype=complex)
        self.H = np.zeros((maxit + 1, maxit), dtype=complex)
        self.Q[:n, 0] = v0 / np.linalg.norm(v0)
        self.k = 0

    def last_block(self) -> np.ndarray:
        """当前最后一个基向量，整理成 n×(k+1) 的系数矩阵"""
        k, n = self.k, self.n
        return self.Q[:n * (k + 1), k].reshape(k + 1, n).T

    def expand(self, Y: np.ndarray) -> float:
        """把新向量（n×(k+2) 系数矩阵）正交化后加入基，返回次对角元"""
        k, n = self.k, self.n
        rows = n * (k + 2)
        y = Y.T.reshape(-1)
        y, h = orthogonalize(self.Q[:rows, :k + 1], y)
        beta = np.linalg.norm(y)
        self.H[:k + 1, k] = h
        self.H[k + 1, k] = beta
        self.k += 1
        if beta > BREAKDOWN_TOL * max(1.0, np.linalg.norm(h)):
            self.Q[:rows, k + 1] = y / beta
        return beta

    def ritz(self) -> Tuple[np.ndarray, np.ndarray]:
        """H_k 的特征值 μ 和对应的第一块 Ritz 向量"""
        k = self.k
        mu, Z = scipy.linalg.eig(self.H[:k, :k])
        return mu, self.Q[:self.n, :k] @ Z

    def orthogonality_error(self) -> float:
        Qk = self.Q[:, :self.k + 1]
        return float(np.linalg.norm(Qk.conj().T @ Qk - np.eye(self.k + 1)))


def _ritz_pairs(basis: ArnoldiFactorization, nep: NEP, opts: SolveOptions, alpha: complex):
    mu, V = basis.ritz()
    keep = np.abs(mu) > 1e-300
    lams = opts.sigma + alpha / mu[keep]
    V = V[:, keep]
    norms = np.linalg.norm(V, axis=0)
    V = V / np.where(norms > 0, norms, 1.0)
    errmeasure = opts.errmeasure_for(nep)
    errors = np.array([errmeasure(l, V[:, j]) for j, l in enumerate(lams)])
    order = np.argsort(np.abs(lams - opts.sigma), kind='stable')
    return lams[order], V[:, order], errors[order]


def _infinite_arnoldi(nep: NEP, opts: SolveOptions, next_vector: Callable[[np.ndarray, LinSolver], np.ndarray],
                      neigs: int, maxit: int, alpha: complex, check_error_every: int, name: str) -> EigenOutcome:
    if int(neigs) < 1:
        raise ValueError(f"neigs 必须至少为 1，当前为 {neigs}")
    if alpha == 0:
        raise ValueError("缩放系数不能为 0")
    try:
        solver = nep.factorize(opts.sigma)
    except SingularSystem as e:
        raise SingularShift(f"{name}: 目标点 σ={opts.sigma} 是（或非常接近）特征值", shift=opts.sigma) from e

    basis = ArnoldiFactorization(nep.n, maxit, opts.initial_vector(nep.n))
    history: List[float] = []
    lams = V = errors = np.array([])

    for k in range(1, maxit + 1):
        beta = basis.expand(next_vector(basis.last_block(), solver))
        breakdown = beta <= BREAKDOWN_TOL * max(1.0, np.linalg.norm(basis.H[:k, k - 1]))

        if breakdown or k % check_error_every == 0 or k == maxit:
            lams, V, errors = _ritz_pairs(basis, nep, opts, alpha)
            converged = np.flatnonzero(errors < opts.tol)
            history.append(float(errors.min()) if errors.size else float('inf'))
            opts.log_iteration(k, history[-1], name)
            if converged.size >= neigs or (breakdown and converged.size > 0):
                if breakdown and converged.size < neigs:
                    logger.warning(f"{name}: 第 {k} 步 Arnoldi 中断，只收敛了 {converged.size} 个特征对")
                idx = converged[:neigs]
                return EigenOutcome(lams[idx], V[:, idx], errors[idx], k, k + 1, name, history)
            if breakdown:
                break

    converged = np.flatnonzero(errors < opts.tol)
    raise NoConvergence(
        f"{name} 在 {basis.k} 步内只收敛了 {converged.size}/{neigs} 个特征对",
        lam=lams, v=V, history=history, errors=errors,
        partial=[(lams[j], V[:, j]) for j in converged],
    )


def _krylov_defaults(neigs, maxit, check_error_every):
    krylov_config = config.get_krylov_config()
    return (
        krylov_config['neigs'] if neigs is None else neigs,
        krylov_config['maxit'] if maxit is None else maxit,
        krylov_config['check_error_every'] if check_error_every is None else check_error_every,
    )


def iar(nep: NEP, opts: Optional[SolveOptions] = None, neigs: Optional[int] = None,
        maxit: Optional[int] = None, gamma: complex = 1.0, check_error_every: Optional[int] = None,
        **kwargs) -> EigenOutcome:
    """
    Taylor 基无穷 Arnoldi 方法

    作用在 M(σ+γλ) 上：新向量的高阶块为 yⱼ = x_{j−1}/j，常数块
    y₀ = −M(σ)⁻¹ Σ γ^j M^(j)(σ) yⱼ。Ritz 值 μ 映射回 λ = σ + γ/μ。
    maxit 和 neigs 缺省取 [krylov] 配置。
    """
    opts = _resolve_options(opts, kwargs)
    neigs, maxit, check_error_every = _krylov_defaults(neigs, maxit, check_error_every)
    gamma = complex(gamma)

    def next_vector(X: np.ndarray, solver: LinSolver) -> np.ndarray:
        k = X.shape[1]
        Y = X / np.arange(1, k + 1)
        a = gamma ** np.arange(k + 1)
        a[0] = 0
        y0 = -solver.solve(nep.compute_Mlincomb(opts.sigma, np.column_stack([np.zeros(nep.n), Y]), a))
        return np.column_stack([y0, Y])

    return _infinite_arnoldi(nep, opts, next_vector, neigs, maxit, gamma, check_error_every, 'iar')


def iar_chebyshev(nep: NEP, opts: Optional[SolveOptions] = None, neigs: Optional[int] = None,
                  maxit: Optional[int] = None, alpha: complex = 1.0, check_error_every: Optional[int] = None,
                  **kwargs) -> EigenOutcome:
    """
    Chebyshev 基无穷 Arnoldi 方法

    新向量的高阶块为 φ 的积分系数 X·L，常数块由 compute_y0 给出
    """
    opts = _resolve_options(opts, kwargs)
    neigs, maxit, check_error_every = _krylov_defaults(neigs, maxit, check_error_every)
    alpha = complex(alpha)

    def next_vector(X: np.ndarray, solver: LinSolver) -> np.ndarray:
        frame = ChebyshevFrame(X.shape[1] - 1, opts.sigma, alpha)
        Y = frame.integrate(X)
        y0 = compute_y0(nep, X, Y, frame, solver)
        return np.column_stack([y0, Y])

    return _infinite_arnoldi(nep, opts, next_vector, neigs, maxit, alpha, check_error_every, 'iar_chebyshev')


def _nlar_single(nep: NEP, opts: SolveOptions, inner: Callable[..., SolveOutcome] = mslp,
                 dimensions: Optional[List[int]] = None) -> SolveOutcome:
    n = nep.n
    try:
        preconditioner = nep.factorize(opts.sigma)
    except SingularSystem as e:
        raise SingularShift(f"nlar: 目标点 σ={opts.sigma} 是（或非常接近）特征值", shift=opts.sigma) from e

    errmeasure = opts.errmeasure_for(nep)
    v = opts.initial_vector(n)
    Vb = (v / np.linalg.norm(v)).reshape(-1, 1)
    proj = create_proj_nep(nep)
    state = NewtonState(opts.sigma, Vb[:, 0].copy())
    inner_opts = opts.replace(v0=None, errmeasure=None, log_sink=None, displaylevel=0,
                              tol=opts.tol * 0.1, maxit=50, armijo=False)

    while True:
        if Vb.shape[1] == n:
            logger.debug("nlar: 子空间已满，改为在原问题上直接求解")
            outcome = inner(nep, inner_opts.replace(sigma=state.lam, tol=opts.tol))
            state.lam, state.v = outcome.lam, outcome.v
        else:
            set_projectmatrices(proj, Vb, Vb)
            if dimensions is not None:
                dimensions.append(Vb.shape[1])
            try:
                outcome = inner(proj, inner_opts.replace(sigma=state.lam))
                lam, z = outcome.lam, outcome.v
            except NoConvergence as e:
                if e.lam is None:
                    raise
                lam, z = e.lam, e.v
            u = Vb @ z
            state.lam, state.v = lam, u / np.linalg.norm(u)

        if _check(state, errmeasure, opts, 'nlar'):
            return _outcome(state, 'nlar', 1)
        if state.iteration >= opts.maxit:
            raise _no_convergence(state, 'nlar')
        state.iteration += 1
        if Vb.shape[1] == n:
            continue

        d = preconditioner.solve(nep.compute_Mlincomb(state.lam, state.v))
        d, _ = orthogonalize(Vb, d)
        norm = np.linalg.norm(d)
        if norm <= BREAKDOWN_TOL:
            raise _no_convergence(state, 'nlar', "新方向落在当前子空间内")
        Vb = np.column_stack([Vb, d / norm])


def nlar(nep: NEP, opts: Optional[SolveOptions] = None, neigs: int = 1,
         inner: Callable[..., SolveOutcome] = mslp, **kwargs) -> EigenOutcome:
    """
    非线性 Arnoldi 方法

    在扩张子空间上解投影问题（内层缺省用 mslp），残差经 M(σ)⁻¹ 预处理后
    正交化加入子空间。neigs > 1 时由紧缩驱动器逐个求解。
    """
    opts = _resolve_options(opts, kwargs)
    dimensions: List[int] = []

    def method(problem: NEP, sub_opts: SolveOptions) -> SolveOutcome:
        return _nlar_single(problem, sub_opts, inner, dimensions)

    pairs = solve_k_eigenpairs(nep, neigs, opts, method=method)
    errmeasure = opts.errmeasure_for(nep)
    lams = np.array([lam for lam, _ in pairs])
    V = np.column_stack([v for _, v in pairs])
    errors = np.array([errmeasure(lam, v) for lam, v in pairs])
    peak = max(dimensions) if dimensions else 1
    return EigenOutcome(lams, V, errors, len(dimensions), peak, 'nlar')


KRYLOV_SOLVERS: Dict[str, Callable[..., EigenOutcome]] = {
    'iar': iar,
    'iar_chebyshev': iar_chebyshev,
    'nlar': nlar,
}
