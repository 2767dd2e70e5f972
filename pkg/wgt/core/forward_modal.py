"""
基于模态格林函数的正演求解

内部源: u_n(x) = (i/2k_n) ∫ s_n(z) e^{ik_n|x−z|} dz
边界源: 模态源为 b1 φ_n(1) + b2 φ_n(0)
Born级数: w = Σ_m [H∘S + G∘(T1,T2)]^m (H(s) + G(b1,b2))
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional, Sequence, Union

import numpy as np

from wgt.core.modal_core import (
    LineFunction,
    LongitudinalWavenumber,
    decompose_columns,
    eigenfunction,
    longitudinal_wavenumber,
    modal_matrix,
)
from wgt.errors import CutoffError, DivergenceError, DomainError
from wgt.utils import trapezoid_weights
from wgt.wgt_config import wgt_config as config

logger = logging.getLogger(__name__)

# 倏逝模态衰减阈值 e^{-40}
EVANESCENT_CUTOFF = 40.0


@dataclass
class InteriorSource:
    """内部源的模态分量 s_0..s_N"""
    components: List[LineFunction]

    def __post_init__(self):
        if not self.components:
            raise DomainError("内部源至少需要一个模态分量")
        first = self.components[0]
        for comp in self.components[1:]:
            if not comp.same_grid(first):
                raise DomainError("内部源各模态分量必须共享网格")

    @property
    def N(self) -> int:
        return len(self.components) - 1

    @classmethod
    def single_mode(cls, profile: LineFunction, mode: int, N: Optional[int] = None) -> "InteriorSource":
        """只在第 mode 个模态上非零的源"""
        N = mode if N is None else N
        comps = [LineFunction.zeros_like(profile) for _ in range(N + 1)]
        comps[mode] = profile
        return cls(comps)


@dataclass
class BoundarySources:
    """上壁 b1 与下壁 b2 的 Neumann 数据"""
    b1: LineFunction
    b2: LineFunction

    def __post_init__(self):
        if not self.b1.same_grid(self.b2):
            raise DomainError("b1 与 b2 必须共享网格")

    def modal_source(self, n: int) -> LineFunction:
        return LineFunction(self.b1.samples * eigenfunction(n, 1.0) + self.b2.samples * eigenfunction(n, 0.0),
                            self.b1.x0, self.b1.dx)


@dataclass(frozen=True)
class Rectangle:
    """矩形区域 (x_min, x_max) × (0, 1) 及其均匀网格"""
    x_min: float
    x_max: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.x_max <= self.x_min:
            raise DomainError("矩形区域需要 x_max > x_min")
        if self.nx < 2 or self.ny < 2:
            raise DomainError("矩形网格每个方向至少需要2个点")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.ny)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dy(self) -> float:
        return 1.0 / (self.ny - 1)

    @classmethod
    def with_step(cls, x_min: float, x_max: float, dx: float, dy: float) -> "Rectangle":
        nx = int(round((x_max - x_min) / dx)) + 1
        ny = int(round(1.0 / dy)) + 1
        return cls(x_min, x_min + (nx - 1) * dx, nx, ny)


@dataclass
class RectangleField:
    """矩形网格上的复场, values 形状为 (nx, ny)"""
    values: np.ndarray
    region: Rectangle

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.region.nx, self.region.ny):
            raise DomainError(f"场形状 {self.values.shape} 与网格 ({self.region.nx}, {self.region.ny}) 不一致")

    def norm(self) -> float:
        """离散 L2 范数"""
        w = np.outer(trapezoid_weights(self.region.nx, self.region.dx),
                     trapezoid_weights(self.region.ny, self.region.dy))
        return float(np.sqrt(np.sum(w * np.abs(self.values) ** 2)))

    def modal_coefficients(self, N: int) -> np.ndarray:
        """逐列模态系数 (N+1, nx)"""
        return decompose_columns(self.values, N)

    def __add__(self, other: "RectangleField") -> "RectangleField":
        return RectangleField(self.values + other.values, self.region)


FieldOperator = Callable[[RectangleField], RectangleField]
TraceOperator = Callable[[RectangleField], LineFunction]


class BornSeriesResult(NamedTuple):
    field: RectangleField
    converged: bool
    iterations: int


def _wavenumber_value(k_n: Union[LongitudinalWavenumber, complex]) -> complex:
    if isinstance(k_n, LongitudinalWavenumber):
        return k_n.value
    return complex(k_n)


def _green_values(s_n: LineFunction, kn: complex, x_eval: np.ndarray) -> np.ndarray:
    z = s_n.x
    weighted = trapezoid_weights(s_n.n, s_n.dx) * s_n.samples
    out = np.zeros(x_eval.size, dtype=complex)
    support = np.flatnonzero(weighted)
    if support.size == 0:
        return out
    z_lo, z_hi = z[support[0]], z[support[-1]]
    gap = np.maximum(0.0, np.maximum(z_lo - x_eval, x_eval - z_hi))
    active = kn.imag * gap <= EVANESCENT_CUTOFF
    if np.any(active):
        xa = x_eval[active]
        kernel = np.exp(1j * kn * np.abs(xa[:, None] - z[support][None, :]))
        out[active] = (1j / (2.0 * kn)) * (kernel @ weighted[support])
    return out


def green_convolve(s_n: LineFunction, k_n: Union[LongitudinalWavenumber, complex],
                   x_eval: Sequence[float]) -> LineFunction:
    """梯形离散的 (i/2k_n) ∫ s_n(z) e^{ik_n|x−z|} dz, x_eval 为均匀网格"""
    kn = _wavenumber_value(k_n)
    if kn == 0:
        raise CutoffError("k_n = 0, 格林函数在截止频率处无定义")
    x_eval = np.asarray(x_eval, dtype=float)
    if x_eval.ndim != 1 or x_eval.size < 2:
        raise DomainError("x_eval 必须是至少含2个点的均匀网格")
    return LineFunction(_green_values(s_n, kn, x_eval), x_eval[0], x_eval[1] - x_eval[0])


def evaluate_modes(source: InteriorSource, k: float, x_eval: Sequence[float]) -> np.ndarray:
    """各模态在任意点 x_eval 处的纵向分量 u_n(x), 返回 (N+1, len(x_eval))"""
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=float))
    rows = []
    for n, s_n in enumerate(source.components):
        k_n = longitudinal_wavenumber(k, n)
        rows.append(_green_values(s_n, k_n.value, x_eval))
    return np.vstack(rows)


def _assemble_field(modes: np.ndarray, region: Rectangle) -> RectangleField:
    phi = modal_matrix(modes.shape[0] - 1, region.y)
    return RectangleField(modes.T @ phi, region)


def solve_source(s: InteriorSource, k: float, region: Rectangle) -> RectangleField:
    """H_k(s): 内部源的出射解, 在 region 网格上求值"""
    return _assemble_field(evaluate_modes(s, k, region.x), region)


def solve_boundary(b: BoundarySources, k: float, region: Rectangle, N: int) -> RectangleField:
    """G_k(b1, b2): 边界源的出射解, 截断到 N 阶模态"""
    source = InteriorSource([b.modal_source(n) for n in range(N + 1)])
    return solve_source(source, k, region)


def modal_sources_from_field(field: RectangleField, N: int) -> InteriorSource:
    """把区域上的源场按列分解为模态分量"""
    coeffs = field.modal_coefficients(N)
    region = field.region
    return InteriorSource([LineFunction(coeffs[n], region.x_min, region.dx) for n in range(N + 1)])


def _apply_term(field: RectangleField, k: float, N: int, S_op: Optional[FieldOperator],
                T1_op: Optional[TraceOperator], T2_op: Optional[TraceOperator]) -> RectangleField:
    region = field.region
    result = RectangleField(np.zeros_like(field.values), region)
    if S_op is not None:
        result = result + solve_source(modal_sources_from_field(S_op(field), N), k, region)
    if T1_op is not None or T2_op is not None:
        zero = LineFunction(np.zeros(region.nx), region.x_min, region.dx)
        b1 = T1_op(field) if T1_op is not None else zero
        b2 = T2_op(field) if T2_op is not None else zero
        result = result + solve_boundary(BoundarySources(b1, b2), k, region, N)
    return result


def born_series(s: Optional[InteriorSource], b: Optional[BoundarySources],
                S_op: Optional[FieldOperator], T1_op: Optional[TraceOperator],
                T2_op: Optional[TraceOperator], k: float, region: Rectangle, N: int,
                m_max: Optional[int] = None, tol: Optional[float] = None) -> BornSeriesResult:
    """Born级数部分和, 相邻项相对范数小于 tol 时停止"""
    m_max = config.BORN_MAX_TERMS if m_max is None else m_max
    tol = config.BORN_TOL if tol is None else tol

    term = RectangleField(np.zeros((region.nx, region.ny), dtype=complex), region)
    if s is not None:
        term = term + solve_source(s, k, region)
    if b is not None:
        term = term + solve_boundary(b, k, region, N)

    total = RectangleField(term.values.copy(), region)
    norms = [term.norm()]
    if norms[0] == 0.0 or (S_op is None and T1_op is None and T2_op is None):
        return BornSeriesResult(total, True, 1)

    converged = False
    iterations = 1
    growth = 0
    while iterations < m_max:
        term = _apply_term(term, k, N, S_op, T1_op, T2_op)
        iterations += 1
        norm = term.norm()
        if not np.isfinite(norm):
            raise DivergenceError(f"Born级数第 {iterations} 项出现非有限值, 违反收缩假设 μ<1")
        growth = growth + 1 if norm > norms[-1] else 0
        norms.append(norm)
        if growth >= 3:
            raise DivergenceError(
                f"Born级数连续3项范数增长 ({norms[-4]:.3e} -> {norm:.3e}), 违反收缩假设 μ<1")
        total = total + term
        if norm < tol * norms[0]:
            tail = norms[-3:]
            converged = norm == 0.0 or all(a > c for a, c in zip(tail, tail[1:]))
            break

    logger.debug(f"Born级数: {iterations} 项, 范数 {['%.3e' % v for v in norms]}")
    if not converged:
        logger.warning(f"Born级数在 {iterations} 项内未收敛 (k={k:.4g})")
    return BornSeriesResult(total, converged, iterations)
