"""
Newton 类求解器模块
增广 Newton、残差逆迭代、拟 Newton、逐次线性问题（MSLP）、Newton-QR，
以及 Armijo 步长和逐个紧缩求多个特征对的驱动器
"""
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg

from .exceptions import DomainError, NoConvergence, SingularShift, SingularSystem
from .nep_core import NEP, ErrMeasure, SolveOptions, compute_rf
from .transforms import DeflatedNep, append_eigenpair, deflated_eigvec, effenberger_deflation

logger = logging.getLogger(__name__)

ARMIJO_C = 1e-4
ARMIJO_MAX_HALVINGS = 10
# 紧缩问题上增广 Newton 的起点所用的线性化束迭代步数
PENCIL_START_STEPS = 3


@dataclass
class NewtonState:
    """迭代状态，误差历史按实际记录，不要求单调"""
    lam: complex
    v: np.ndarray
    iteration: int = 0
    history: List[float] = field(default_factory=list)
    best_lam: Optional[complex] = None
    best_v: Optional[np.ndarray] = None

    def record(self, err: float):
        if not self.history or err < min(self.history):
            self.best_lam, self.best_v = self.lam, self.v.copy()
        self.history.append(err)


@dataclass
class SolveOutcome:
    """
    单个特征对的求解结果

    可以按 (λ, v, history) 解包
    """
    lam: complex
    v: np.ndarray
    iterations: int
    history: List[float]
    factorizations: int = 0
    method: str = ''

    @property
    def error(self) -> float:
        return self.history[-1] if self.history else float('inf')

    def __iter__(self):
        yield self.lam
        yield self.v
        yield self.history


def _resolve_options(opts: Optional[SolveOptions], overrides: Dict) -> SolveOptions:
    if opts is None:
        return SolveOptions(**overrides)
    return opts.replace(**overrides) if overrides else opts


def _no_convergence(state: NewtonState, method: str, reason: str = '') -> NoConvergence:
    message = f"{method} 在 {state.iteration} 步内未收敛"
    if reason:
        message += f": {reason}"
    return NoConvergence(message, lam=state.best_lam, v=state.best_v, history=state.history)


@contextmanager
def _domain_guard(state: NewtonState, method: str):
    """迭代点落到函数定义域外（如 √ 的割线）时按未收敛处理"""
    try:
        yield
    except DomainError as e:
        raise _no_convergence(state, method, f"λ={state.lam} 超出定义域: {e}") from e


def _check(state: NewtonState, errmeasure: ErrMeasure, opts: SolveOptions, method: str) -> bool:
    with _domain_guard(state, method):
        err = errmeasure(state.lam, state.v)
    state.record(err)
    opts.log_iteration(state.iteration, err, __name__)
    return err < opts.tol


def _outcome(state: NewtonState, method: str, factorizations: int) -> SolveOutcome:
    logger.debug(f"{method} 收敛: λ={state.lam:.10g}, 迭代 {state.iteration} 步")
    return SolveOutcome(state.lam, state.v, state.iteration, state.history, factorizations, method)


def _factorize_at_target(nep: NEP, sigma: complex):
    try:
        return nep.factorize(sigma)
    except SingularSystem as e:
        raise SingularShift(f"目标点 σ={sigma} 是（或非常接近）特征值", shift=sigma) from e


def armijo_damp(state: NewtonState, direction: Tuple[complex, np.ndarray],
                errmeasure: ErrMeasure) -> Tuple[float, bool]:
    """
    Armijo 步长：在 1, 1/2, ..., 2⁻¹⁰ 中取最大的使误差降到 (1 − c·step) 倍的步长

    试探点落在定义域外 (DomainError) 时视为不满足条件，继续减半。

    Returns:
        (step, stagnated)；没有满足条件的步长时返回 (2⁻¹⁰, True)
    """
    dlam, dv = direction
    err0 = state.history[-1] if state.history else errmeasure(state.lam, state.v)
    step = 1.0
    for _ in range(ARMIJO_MAX_HALVINGS + 1):
        try:
            err = errmeasure(state.lam + step * dlam, state.v + step * dv)
        except DomainError:
            err = np.inf
        if np.isfinite(err) and err <= (1 - ARMIJO_C * step) * err0:
            return step, False
        step /= 2
    return 2.0 ** -ARMIJO_MAX_HALVINGS, True


def _step_inside_domain(state: NewtonState, direction: Tuple[complex, np.ndarray],
                        errmeasure: ErrMeasure, method: str) -> float:
    """不做 Armijo 时的步长：整步落在定义域外就减半，最多 10 次"""
    dlam, dv = direction
    step = 1.0
    for _ in range(ARMIJO_MAX_HALVINGS + 1):
        try:
            errmeasure(state.lam + step * dlam, state.v + step * dv)
            return step
        except DomainError:
            step /= 2
    raise _no_convergence(state, method, f"从 λ={state.lam} 出发的 Newton 步始终落在定义域外")


def _apply_step(state: NewtonState, dlam: complex, dv: np.ndarray,
                errmeasure: ErrMeasure, opts: SolveOptions, method: str):
    if opts.armijo:
        step, stagnated = armijo_damp(state, (dlam, dv), errmeasure)
        if stagnated:
            logger.debug(f"{method}: Armijo 步长停滞，取 step={step}")
    else:
        step = _step_inside_domain(state, (dlam, dv), errmeasure, method)
        if step < 1.0:
            logger.debug(f"{method}: 整步越过定义域边界，步长缩短为 {step}")
    state.lam = state.lam + step * dlam
    state.v = state.v + step * dv


def augnewton(nep: NEP, opts: Optional[SolveOptions] = None, **kwargs) -> SolveOutcome:
    """
    增广 Newton 法

    求解 [M(λ)v; cᴴv − 1] = 0，c 取初始向量。每步
    u = M(λ)⁻¹M′(λ)v，λ ← λ − 1/(cᴴu)，v ← u/(cᴴu)。
    分解时遇到奇异会把 λ 稍作扰动后重试一次。
    紧缩问题且未给初始向量时，起点取线性化束迭代几步后的结果。
    """
    opts = _resolve_options(opts, kwargs)
    errmeasure = opts.errmeasure_for(nep)
    lam0, c = _starting_pair(nep, opts)
    state = NewtonState(lam0, c / np.vdot(c, c))
    factorizations = 0
    retried = False

    while True:
        if _check(state, errmeasure, opts, 'augnewton'):
            return _outcome(state, 'augnewton', factorizations)
        if state.iteration >= opts.maxit:
            raise _no_convergence(state, 'augnewton')
        state.iteration += 1

        try:
            solver = nep.factorize(state.lam)
        except SingularSystem:
            if retried:
                raise
            retried = True
            perturbation = 1e-8 * max(1.0, abs(state.lam))
            logger.debug(f"augnewton: M(λ) 在 λ={state.lam} 奇异，扰动 {perturbation:.1e} 后重试")
            state.lam = state.lam + perturbation
            continue
        factorizations += 1

        z = nep.compute_Mlincomb(state.lam, np.column_stack([np.zeros(nep.n), state.v]))
        u = solver.solve(z)
        cu = np.vdot(c, u)
        if cu == 0 or not np.isfinite(cu):
            raise _no_convergence(state, 'augnewton', "cᴴu = 0")
        _apply_step(state, -1 / cu, u / cu - state.v, errmeasure, opts, 'augnewton')


def resinv(nep: NEP, opts: Optional[SolveOptions] = None, **kwargs) -> SolveOutcome:
    """
    残差逆迭代

    M(σ) 只分解一次；λ 由双边 Rayleigh 泛函 yᴴM(λ)v = 0 更新，左向量固定为
    y = M(σ)⁻ᴴc（c 为初始向量），v ← v − M(σ)⁻¹M(λ)v 后归一化
    """
    opts = _resolve_options(opts, kwargs)
    errmeasure = opts.errmeasure_for(nep)
    solver = _factorize_at_target(nep, opts.sigma)
    c = opts.initial_vector(nep.n)
    y = solver.solve_adjoint(c)
    y = y / np.linalg.norm(y)
    state = NewtonState(opts.sigma, c / np.linalg.norm(c))

    while True:
        with _domain_guard(state, 'resinv'):
            try:
                state.lam = compute_rf(nep, state.v, y=y, lam0=state.lam)
            except NoConvergence as e:
                if e.lam is not None:
                    state.lam = e.lam
        if _check(state, errmeasure, opts, 'resinv'):
            return _outcome(state, 'resinv', 1)
        if state.iteration >= opts.maxit:
            raise _no_convergence(state, 'resinv')
        state.iteration += 1

        v = state.v - solver.solve(nep.compute_Mlincomb(state.lam, state.v))
        state.v = v / np.linalg.norm(v)


def quasinewton(nep: NEP, opts: Optional[SolveOptions] = None, **kwargs) -> SolveOutcome:
    """
    拟 Newton 法：增广 Newton 的线性系统矩阵冻结为 M(σ)

    Δλ = −cᴴM(σ)⁻¹r / cᴴM(σ)⁻¹z，Δv = −M(σ)⁻¹(r + Δλz)，
    其中 r = M(λ)v，z = M′(λ)v
    """
    opts = _resolve_options(opts, kwargs)
    errmeasure = opts.errmeasure_for(nep)
    solver = _factorize_at_target(nep, opts.sigma)
    c = opts.initial_vector(nep.n)
    state = NewtonState(opts.sigma, c / np.vdot(c, c))

    while True:
        if _check(state, errmeasure, opts, 'quasinewton'):
            return _outcome(state, 'quasinewton', 1)
        if state.iteration >= opts.maxit:
            raise _no_convergence(state, 'quasinewton')
        state.iteration += 1

        r = nep.compute_Mlincomb(state.lam, state.v)
        z = nep.compute_Mlincomb(state.lam, np.column_stack([np.zeros(nep.n), state.v]))
        wr, wz = solver.solve(r), solver.solve(z)
        denom = np.vdot(c, wz)
        if denom == 0 or not np.isfinite(denom):
            raise _no_convergence(state, 'quasinewton', "cᴴM(σ)⁻¹M′(λ)v = 0")
        dlam = -np.vdot(c, wr) / denom
        dv = -(wr + dlam * wz)
        _apply_step(state, dlam, dv, errmeasure, opts, 'quasinewton')


def _smallest_pencil_eigenpair(A: np.ndarray, B: np.ndarray) -> Optional[Tuple[complex, np.ndarray]]:
    theta, U = scipy.linalg.eig(A, B)
    finite = np.flatnonzero(np.isfinite(theta))
    if finite.size == 0:
        return None
    # np.argmin 取第一个最小值，相同模长时保留较小的下标
    idx = finite[np.argmin(np.abs(theta[finite]))]
    u = U[:, idx]
    return complex(theta[idx]), u / np.linalg.norm(u)


def _starting_pair(nep: NEP, opts: SolveOptions) -> Tuple[complex, np.ndarray]:
    """
    增广 Newton 的起点

    紧缩问题在 spec(S₀) 处有极点，且实数据从实起点出发的 Newton 迭代停留在实轴上；
    未给初始向量时先做几步线性化束迭代 λ ← λ − θ，以其特征向量为 c
    """
    if opts.v0 is not None or not isinstance(nep, DeflatedNep):
        return opts.sigma, opts.initial_vector(nep.n)
    lam, v = opts.sigma, opts.initial_vector(nep.n)
    for _ in range(PENCIL_START_STEPS):
        try:
            pair = _smallest_pencil_eigenpair(nep.compute_Mder(lam, 0), nep.compute_Mder(lam, 1))
        except (DomainError, SingularShift):
            break
        if pair is None:
            break
        theta, v = pair
        lam = lam - theta
    logger.debug(f"augnewton: 紧缩问题的起点 λ₀={lam:.6g}")
    return lam, v


def mslp(nep: NEP, opts: Optional[SolveOptions] = None, **kwargs) -> SolveOutcome:
    """
    逐次线性问题法

    每步求线性束 M(λ)u = θM′(λ)u 模最小的 θ，λ ← λ − θ
    """
    opts = _resolve_options(opts, kwargs)
    errmeasure = opts.errmeasure_for(nep)
    state = NewtonState(opts.sigma, opts.initial_vector(nep.n))
    retried = False

    while True:
        with _domain_guard(state, 'mslp'):
            pair = _smallest_pencil_eigenpair(nep.compute_Mder(state.lam, 0), nep.compute_Mder(state.lam, 1))
        if pair is None:
            if retried:
                raise _no_convergence(state, 'mslp', "线性束没有有限特征值")
            retried = True
            state.lam = state.lam + 1e-8 * max(1.0, abs(state.lam))
            logger.debug(f"mslp: 线性束退化，扰动 λ 到 {state.lam} 后重试")
            continue
        theta, state.v = pair

        if _check(state, errmeasure, opts, 'mslp'):
            return _outcome(state, 'mslp', 0)
        if state.iteration >= opts.maxit:
            raise _no_convergence(state, 'mslp')
        state.iteration += 1
        state.lam = state.lam - theta


def newtonqr(nep: NEP, opts: Optional[SolveOptions] = None, **kwargs) -> SolveOutcome:
    """
    Newton-QR（Kublanovskaya）方法

    对列主元 QR 分解 M(λ)P = QR 的最后一个对角元 r_nn(λ) 做 Newton 迭代；
    特征向量取 y = P[−R₁₁⁻¹r₁₂; 1]
    """
    opts = _resolve_options(opts, kwargs)
    errmeasure = opts.errmeasure_for(nep)
    n = nep.n
    state = NewtonState(opts.sigma, opts.initial_vector(n))

    while True:
        with _domain_guard(state, 'newtonqr'):
            Q, R, perm = scipy.linalg.qr(nep.compute_Mder(state.lam, 0), pivoting=True)
        e = np.ones(n, dtype=complex)
        if n > 1:
            e[:-1] = -scipy.linalg.solve_triangular(R[:-1, :-1], R[:-1, -1])
        y = np.empty(n, dtype=complex)
        y[perm] = e
        state.v = y / np.linalg.norm(y)

        if _check(state, errmeasure, opts, 'newtonqr'):
            return _outcome(state, 'newtonqr', state.iteration + 1)
        if state.iteration >= opts.maxit:
            raise _no_convergence(state, 'newtonqr')
        state.iteration += 1

        derivative = np.vdot(Q[:, -1], nep.compute_Mlincomb(state.lam, np.column_stack([np.zeros(n), y])))
        if derivative == 0 or not np.isfinite(derivative):
            raise _no_convergence(state, 'newtonqr', "r_nn′(λ) = 0")
        state.lam = state.lam - R[-1, -1] / derivative


NEWTON_SOLVERS: Dict[str, Callable[..., SolveOutcome]] = {
    'augnewton': augnewton,
    'resinv': resinv,
    'quasinewton': quasinewton,
    'mslp': mslp,
    'newtonqr': newtonqr,
}


def _orthonormalize_pair(S: np.ndarray, V: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # 𝕄(RSR⁻¹, VR⁻¹) = 𝕄(S,V)R⁻¹，V = QR 后仍是不变对
    Q, R = np.linalg.qr(V)
    S = np.linalg.solve(R.T, (R @ S).T).T
    return S, Q


def solve_k_eigenpairs(nep: NEP, k: int, opts: Optional[SolveOptions] = None,
                       method: Callable[..., SolveOutcome] = augnewton,
                       separation: float = 1e-6, **kwargs) -> List[Tuple[complex, np.ndarray]]:
    """
    逐个求 k 个特征对：每求得一个就把它并入不变对并做 Effenberger 紧缩，避免重复收敛

    每个特征对都在原问题上检查 errmeasure < tol（必要时先补几步增广 Newton）。
    失败时抛出 NoConvergence，partial 中带已求得的特征对
    """
    if int(k) < 1:
        raise ValueError(f"特征对个数 k 必须至少为 1，当前为 {k}")
    opts = _resolve_options(opts, kwargs)
    errmeasure = opts.errmeasure_for(nep)
    pairs: List[Tuple[complex, np.ndarray]] = []
    current: NEP = nep
    S = V = None

    for i in range(int(k)):
        sub_opts = opts.replace(errmeasure=None if current is not nep else opts.errmeasure)
        if opts.v0 is not None and current.n > nep.n:
            padded = np.concatenate([opts.v0, np.zeros(current.n - nep.n)])
            sub_opts = sub_opts.replace(v0=padded / np.linalg.norm(padded))
        try:
            outcome = method(current, sub_opts)
            lam = outcome.lam
            v = outcome.v if current is nep else deflated_eigvec(current, lam, outcome.v)
            v = v / np.linalg.norm(v)
            err = errmeasure(lam, v)
        except (NoConvergence, SingularSystem, DomainError) as e:
            raise NoConvergence(f"第 {i + 1} 个特征对求解失败: {e}", lam=getattr(e, 'lam', None),
                                v=getattr(e, 'v', None), history=getattr(e, 'history', None),
                                partial=pairs) from e

        if err >= opts.tol:
            lam, v = _polish(nep, lam, v, opts)
            err = errmeasure(lam, v)
        if err >= opts.tol:
            raise NoConvergence(f"第 {i + 1} 个特征对 λ={lam} 在原问题上的误差 {err:.2e} 未达到 tol={opts.tol:g}",
                                lam=lam, v=v, partial=pairs)
        if any(abs(lam - other) <= separation for other, _ in pairs):
            raise NoConvergence(f"第 {i + 1} 个特征对重复收敛到 λ={lam}", lam=lam, v=v, partial=pairs)

        pairs.append((lam, v))
        logger.info(f"第 {i + 1}/{k} 个特征对: λ = {lam:.10g}")
        if i + 1 < k:
            if S is None:
                S, V = np.array([[lam]], dtype=complex), v.reshape(-1, 1)
            else:
                S, V = append_eigenpair(S, V, lam, v)
            S, V = _orthonormalize_pair(S, V)
            current = effenberger_deflation(nep, S, V)

    return pairs


def _polish(nep: NEP, lam: complex, v: np.ndarray, opts: SolveOptions) -> Tuple[complex, np.ndarray]:
    """紧缩问题上的解映射回原问题后残差略大时，在原问题上补几步增广 Newton；失败时原样返回"""
    try:
        outcome = augnewton(nep, opts.replace(sigma=lam, v0=v, maxit=5, errmeasure=opts.errmeasure, armijo=False))
        return outcome.lam, outcome.v / np.linalg.norm(outcome.v)
    except (NoConvergence, SingularSystem):
        logger.warning(f"λ={lam} 在原问题上补充迭代失败")
        return lam, v
