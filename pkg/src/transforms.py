"""
问题变换模块
平移缩放、Möbius 变换、不变对紧缩（Effenberger）以及投影，结果本身都是 NEP
"""
import logging
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from .exceptions import DomainError, SingularShift
from .nep_core import MDER, MLINCOMB, MM, NEP, mlincomb_via_MM

logger = logging.getLogger(__name__)


class ShiftScaledNep(NEP):
    """M̃(λ) = M(αλ+σ)，M̃^(k)(λ) = α^k M^(k)(αλ+σ)"""

    capabilities = frozenset({MDER, MLINCOMB, MM})

    def __init__(self, parent: NEP, sigma: complex = 0.0, alpha: complex = 1.0):
        if alpha == 0:
            raise ValueError("缩放系数 α 不能为 0")
        super().__init__(parent.n)
        self.parent = parent
        self.sigma = complex(sigma)
        self.alpha = complex(alpha)

    def _map(self, lam: complex) -> complex:
        return self.alpha * lam + self.sigma

    def _mder(self, lam: complex, k: int) -> np.ndarray:
        return self.alpha ** k * self.parent.compute_Mder(self._map(lam), k)

    def _mlincomb(self, lam: complex, V: np.ndarray, a: np.ndarray) -> np.ndarray:
        scaled = a * self.alpha ** np.arange(V.shape[1])
        return self.parent.compute_Mlincomb(self._map(lam), V, scaled)

    def _mm(self, S: np.ndarray, V: np.ndarray) -> np.ndarray:
        return self.parent.compute_MM(self.alpha * S + self.sigma * np.eye(S.shape[0]), V)


def shift_and_scale(parent: NEP, sigma: complex = 0.0, alpha: complex = 1.0) -> ShiftScaledNep:
    """返回 M(αλ+σ)"""
    return ShiftScaledNep(parent, sigma, alpha)


class MobiusNep(NEP):
    """
    M̃(λ) = M(φ(λ))，φ(λ) = (aλ+b)/(cλ+d)

    k ≤ 2 的导数用链式法则直接给出，更高阶导数经由 𝕄 路线
    """

    capabilities = frozenset({MDER, MM})

    def __init__(self, parent: NEP, a: complex = 1.0, b: complex = 0.0, c: complex = 0.0, d: complex = 1.0):
        self.a, self.b, self.c, self.d = (complex(x) for x in (a, b, c, d))
        self.det = self.a * self.d - self.b * self.c
        if self.det == 0:
            raise ValueError("Möbius 变换要求 ad − bc ≠ 0")
        super().__init__(parent.n)
        self.parent = parent

    @property
    def pole(self) -> Optional[complex]:
        return None if self.c == 0 else -self.d / self.c

    def _denominator(self, lam: complex) -> complex:
        den = self.c * lam + self.d
        if den == 0 or abs(den) <= 1e-14 * (abs(self.c * lam) + abs(self.d)):
            raise DomainError(f"λ={lam} 是 Möbius 变换的极点 −d/c")
        return den

    def phi(self, lam: complex) -> complex:
        return (self.a * lam + self.b) / self._denominator(lam)

    def _mder(self, lam: complex, k: int) -> np.ndarray:
        den = self._denominator(lam)
        mu = (self.a * lam + self.b) / den
        if k == 0:
            return self.parent.compute_Mder(mu, 0)
        d1 = self.det / den ** 2
        if k == 1:
            return d1 * self.parent.compute_Mder(mu, 1)
        if k == 2:
            d2 = -2 * self.c * self.det / den ** 3
            return d2 * self.parent.compute_Mder(mu, 1) + d1 ** 2 * self.parent.compute_Mder(mu, 2)
        return self._mder_by_columns(lam, k, lambda l, V: mlincomb_via_MM(self, l, V))

    def _mm(self, S: np.ndarray, V: np.ndarray) -> np.ndarray:
        I = np.eye(S.shape[0])
        den = self.c * S + self.d * I
        if self.pole is not None and np.any(np.isclose(np.linalg.eigvals(S), self.pole, rtol=1e-12, atol=1e-14)):
            raise DomainError("S 的谱包含 Möbius 变换的极点 −d/c")
        mapped = np.linalg.solve(den.T, (self.a * S + self.b * I).T).T
        return self.parent.compute_MM(mapped, V)


def mobius_transform(parent: NEP, a: complex = 1.0, b: complex = 0.0,
                     c: complex = 0.0, d: complex = 1.0) -> MobiusNep:
    """返回 M((aλ+b)/(cλ+d))"""
    return MobiusNep(parent, a, b, c, d)


class _ShiftedResolvent:
    """(S₀−μI) 的 LU 分解，μ 落在 spec(S₀) 上时抛出 SingularShift"""

    def __init__(self, S0: np.ndarray, mu: complex):
        p = S0.shape[0]
        R = S0 - mu * np.eye(p)
        self._lu, self._piv = scipy.linalg.lu_factor(R, check_finite=False)
        pivots = np.abs(np.diag(self._lu))
        scale = max(np.abs(R).max(), np.abs(S0).max(), 1.0)
        if pivots.min() <= 100 * p * np.finfo(float).eps * scale:
            raise SingularShift(f"μ={mu} 属于已紧缩的谱 spec(S₀)", shift=mu)

    def right(self, Z: np.ndarray) -> np.ndarray:
        """Z(S₀−μI)⁻¹"""
        return scipy.linalg.lu_solve((self._lu, self._piv), Z.T, trans=1).T

    def left(self, y: np.ndarray) -> np.ndarray:
        """(S₀−μI)⁻¹y"""
        return scipy.linalg.lu_solve((self._lu, self._piv), y)


class DeflatedNep(NEP):
    """
    不变对 (S₀, V₀) 紧缩后的 (n+p) 维问题

        [[M^(k)(μ), U^(k)(μ)], [δ_{k0} V₀ᴴ, 0]]

    U(μ) = −M(μ)V₀(S₀−μI)⁻¹，U^(k) = (−M^(k)(μ)V₀ + kU^(k−1))(S₀−μI)⁻¹
    """

    capabilities = frozenset({MDER, MLINCOMB})

    def __init__(self, parent: NEP, S0: np.ndarray, V0: np.ndarray):
        S0 = np.atleast_2d(np.asarray(S0, dtype=complex))
        V0 = np.asarray(V0, dtype=complex)
        if V0.ndim == 1:
            V0 = V0.reshape(-1, 1)
        p = S0.shape[0]
        if S0.shape != (p, p) or V0.shape != (parent.n, p):
            raise ValueError(f"不变对形状不匹配: S₀ {S0.shape}，V₀ {V0.shape}，问题维数 {parent.n}")
        super().__init__(parent.n + p)
        self.parent = parent
        self.S0 = S0
        self.V0 = V0
        self.p = p

        residual = np.linalg.norm(parent.compute_MM(S0, V0))
        if residual > 1e-8 * max(1.0, np.linalg.norm(V0)):
            logger.warning(f"紧缩用的 (S₀, V₀) 不是精确不变对: ‖𝕄(S₀,V₀)‖ = {residual:.3e}")

    def resolvent(self, mu: complex) -> _ShiftedResolvent:
        return _ShiftedResolvent(self.S0, mu)

    def u_derivatives(self, mu: complex, k: int) -> list:
        """[U(μ), U′(μ), ..., U^(k)(μ)]"""
        res = self.resolvent(mu)
        U = [res.right(-self.parent.compute_Mder(mu, 0) @ self.V0)]
        for j in range(1, k + 1):
            U.append(res.right(-self.parent.compute_Mder(mu, j) @ self.V0 + j * U[-1]))
        return U

    def _mder(self, lam: complex, k: int) -> np.ndarray:
        n, p = self.parent.n, self.p
        D = np.zeros((self.n, self.n), dtype=complex)
        D[:n, :n] = self.parent.compute_Mder(lam, k)
        D[:n, n:] = self.u_derivatives(lam, k)[k]
        if k == 0:
            D[n:, :n] = self.V0.conj().T
        return D

    def _mlincomb(self, lam: complex, V: np.ndarray, a: np.ndarray) -> np.ndarray:
        n = self.parent.n
        X, Y = V[:n, :], V[n:, :]
        top = self.parent.compute_Mlincomb(lam, X, a)
        U = self.u_derivatives(lam, V.shape[1] - 1)
        for j in range(V.shape[1]):
            if a[j] != 0:
                top = top + a[j] * (U[j] @ Y[:, j])
        bottom = a[0] * (self.V0.conj().T @ X[:, 0])
        return np.concatenate([top, bottom])


def effenberger_deflation(parent: NEP, S0: np.ndarray, V0: np.ndarray) -> DeflatedNep:
    """紧缩不变对 (S₀, V₀)，返回维数 n+p 的新问题"""
    return DeflatedNep(parent, S0, V0)


def _split_deflated(dnep: DeflatedNep, mu: complex, xt: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    xt = np.asarray(xt, dtype=complex).ravel()
    if xt.shape[0] != dnep.n:
        raise ValueError(f"向量长度 {xt.shape[0]} 与紧缩问题维数 {dnep.n} 不一致")
    x, y = xt[:dnep.parent.n], xt[dnep.parent.n:]
    return x, y, dnep.resolvent(mu).left(y)


def deflated_eigvec(dnep: DeflatedNep, mu: complex, xt: np.ndarray) -> np.ndarray:
    """紧缩问题的特征向量映射回原问题：x − V₀(S₀−μI)⁻¹y，归一化"""
    x, _, w = _split_deflated(dnep, mu, xt)
    v = x - dnep.V0 @ w
    return v / np.linalg.norm(v)


def extend_invariant_pair(dnep: DeflatedNep, mu: complex, xt: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    用紧缩问题的特征对 (μ, [x; y]) 扩充不变对：
    S = [[S₀, y], [0, μ]]，V = [V₀, x]
    """
    x, y, _ = _split_deflated(dnep, mu, xt)
    p = dnep.p
    S = np.zeros((p + 1, p + 1), dtype=complex)
    S[:p, :p] = dnep.S0
    S[:p, p] = y
    S[p, p] = mu
    V = np.column_stack([dnep.V0, x])
    return S, V


def append_eigenpair(S0: np.ndarray, V0: np.ndarray, lam: complex, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    把原问题的特征对 (λ, v) 并入列正交的不变对 (S₀, V₀)：
    w = V₀ᴴv，S = [[S₀, (λI−S₀)w], [0, λ]]，V = [V₀, v − V₀w]
    """
    S0 = np.atleast_2d(np.asarray(S0, dtype=complex))
    V0 = np.asarray(V0, dtype=complex).reshape(-1, S0.shape[0])
    v = np.asarray(v, dtype=complex).ravel()
    w = V0.conj().T @ v
    p = S0.shape[0]
    S = np.zeros((p + 1, p + 1), dtype=complex)
    S[:p, :p] = S0
    S[:p, p] = lam * w - S0 @ w
    S[p, p] = lam
    V = np.column_stack([V0, v - V0 @ w])
    return S, V


class ProjectedNep(NEP):
    """
    投影问题 Wᴴ M(λ) Vb z = 0，维数为基的列数 q

    基可以用 set_projectmatrices 原地替换，供扩张子空间类方法使用
    """

    capabilities = frozenset({MDER, MLINCOMB, MM})

    def __init__(self, parent: NEP, W: Optional[np.ndarray] = None, Vb: Optional[np.ndarray] = None):
        self.parent = parent
        identity = np.eye(parent.n, dtype=complex)
        self._set_basis(identity if W is None else W, identity if Vb is None else Vb)

    def _set_basis(self, W: np.ndarray, Vb: np.ndarray):
        W = np.asarray(W, dtype=complex).reshape(self.parent.n, -1)
        Vb = np.asarray(Vb, dtype=complex).reshape(self.parent.n, -1)
        if W.shape != Vb.shape:
            raise ValueError(f"左右投影基形状不一致: {W.shape} 与 {Vb.shape}")
        if W.shape[1] > self.parent.n:
            raise ValueError(f"投影基列数 {W.shape[1]} 超过问题维数 {self.parent.n}")
        for name, B in (('W', W), ('Vb', Vb)):
            s = np.linalg.svd(B, compute_uv=False)
            if s[-1] <= 1e-12 * s[0]:
                logger.warning(f"投影基 {name} 接近列亏秩 (σ_min/σ_max = {s[-1] / s[0]:.2e})")
        NEP.__init__(self, W.shape[1])
        self.W = W
        self.Vb = Vb

    def _mder(self, lam: complex, k: int) -> np.ndarray:
        return self.W.conj().T @ self.parent.compute_Mder(lam, k) @ self.Vb

    def _mlincomb(self, lam: complex, V: np.ndarray, a: np.ndarray) -> np.ndarray:
        return self.W.conj().T @ self.parent.compute_Mlincomb(lam, self.Vb @ V, a)

    def _mm(self, S: np.ndarray, V: np.ndarray) -> np.ndarray:
        return self.W.conj().T @ self.parent.compute_MM(S, self.Vb @ V)


def create_proj_nep(parent: NEP) -> ProjectedNep:
    """创建投影问题，初始基为单位矩阵"""
    return ProjectedNep(parent)


def set_projectmatrices(proj: ProjectedNep, W: np.ndarray, Vb: np.ndarray):
    """原地替换投影基"""
    proj._set_basis(W, Vb)
