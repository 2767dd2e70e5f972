"""
横向模态基、纵向波数、模态分解/重构以及数据空间范数

截面 (0,1) 上的 Neumann 本征函数 φ0 = 1, φn = √2 cos(nπy);
纵向波数 k_n = √(k² − n²π²), 取 Re(k_n) ≥ 0, Im(k_n) ≥ 0 的分支。
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from wgt.errors import AliasingError, CutoffError, DomainError
from wgt.utils import near_cutoff, trapezoid_weights

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]

# 傅里叶求和时每块处理的频率个数
_CHUNK = 2048


@dataclass(frozen=True)
class LongitudinalWavenumber:
    """模态 n 在频率 k 下的纵向波数"""
    value: complex
    mode: int
    k: float

    @property
    def propagative(self) -> bool:
        return self.value.imag == 0.0


@dataclass
class SectionField:
    """均匀 y 网格 (含端点) 上的截面复场"""
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.samples.ndim != 1 or self.samples.size < 2:
            raise DomainError("截面场至少需要2个采样点")

    @property
    def ny(self) -> int:
        return self.samples.size

    @property
    def y(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.ny)


@dataclass
class ModalCoefficients:
    """模态系数 c_0..c_N"""
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))

    @property
    def N(self) -> int:
        return self.coeffs.size - 1


@dataclass
class LineFunction:
    """一维均匀网格上的复函数, 采样窗口之外视为0"""
    samples: np.ndarray
    x0: float
    dx: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.samples.ndim != 1 or self.samples.size < 2:
            raise DomainError("LineFunction 至少需要2个采样点")
        if not self.dx > 0:
            raise DomainError(f"网格步长必须为正: dx={self.dx}")
        self.x0 = float(self.x0)
        self.dx = float(self.dx)

    @classmethod
    def from_callable(cls, fn, x_min: float, x_max: float, count: int) -> "LineFunction":
        x = np.linspace(x_min, x_max, count)
        return cls(np.asarray(fn(x), dtype=complex), x_min, x[1] - x[0])

    @classmethod
    def zeros_like(cls, other: "LineFunction") -> "LineFunction":
        return cls(np.zeros_like(other.samples), other.x0, other.dx)

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n)

    @property
    def x_end(self) -> float:
        return self.x0 + self.dx * (self.n - 1)

    def same_grid(self, other: "LineFunction") -> bool:
        return (self.n == other.n and np.isclose(self.x0, other.x0, atol=1e-12)
                and np.isclose(self.dx, other.dx, rtol=1e-12))

    def evaluate(self, x: ArrayLike) -> np.ndarray:
        """线性插值求值, 窗口外为0"""
        x = np.asarray(x, dtype=float)
        re = np.interp(x, self.x, self.samples.real, left=0.0, right=0.0)
        im = np.interp(x, self.x, self.samples.imag, left=0.0, right=0.0)
        return re + 1j * im

    def derivative(self) -> "LineFunction":
        """二阶中心差分导数, 窗口端点单侧"""
        return LineFunction(np.gradient(self.samples, self.dx, edge_order=2), self.x0, self.dx)

    def antiderivative(self) -> "LineFunction":
        """累积梯形积分, 左端点取0"""
        return LineFunction(cumulative_trapezoid(self.samples, dx=self.dx, initial=0.0), self.x0, self.dx)

    def integral(self) -> complex:
        return complex(np.sum(trapezoid_weights(self.n, self.dx) * self.samples))

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(trapezoid_weights(self.n, self.dx) * np.abs(self.samples) ** 2)))

    def scaled(self, factor: complex) -> "LineFunction":
        return LineFunction(self.samples * factor, self.x0, self.dx)

    def real(self) -> "LineFunction":
        return LineFunction(self.samples.real, self.x0, self.dx)


# ---------------------------------------------------------------------------
# 本征函数与波数
# ---------------------------------------------------------------------------

def eigenfunction(n: int, y: ArrayLike) -> Union[float, np.ndarray]:
    """横向本征函数 φ_n(y)"""
    if n < 0:
        raise DomainError(f"模态编号必须非负: n={n}")
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr < 0.0) or np.any(y_arr > 1.0):
        raise DomainError("y 必须位于 [0, 1] 内")
    if n == 0:
        values = np.ones_like(y_arr)
    else:
        values = np.sqrt(2.0) * np.cos(n * np.pi * y_arr)
    return float(values) if values.ndim == 0 else values


def modal_matrix(N: int, y: np.ndarray) -> np.ndarray:
    """(N+1, len(y)) 矩阵, 第 n 行为 φ_n(y)"""
    return np.vstack([eigenfunction(n, y) for n in range(N + 1)])


def is_near_cutoff(k: float, guard: float = 0.2) -> bool:
    """k 是否落在某个截止频率 nπ 的保护带内"""
    return bool(near_cutoff(k, guard))


def longitudinal_wavenumber(k: float, n: int) -> LongitudinalWavenumber:
    """k_n = √(k² − n²π²), 传播模态取实根, 倏逝模态取正虚根"""
    if not k > 0:
        raise DomainError(f"频率必须为正: k={k}")
    if n < 0:
        raise DomainError(f"模态编号必须非负: n={n}")
    cutoff = n * np.pi
    if abs(k - cutoff) <= 1e-14 * k:
        raise CutoffError(f"k={k} 恰为模态 {n} 的截止频率")
    disc = (k - cutoff) * (k + cutoff)
    if disc > 0:
        value = complex(np.sqrt(disc), 0.0)
    else:
        value = complex(0.0, np.sqrt(-disc))
    return LongitudinalWavenumber(value=value, mode=n, k=float(k))


def propagating_modes(k: float) -> List[int]:
    """频率 k 下的传播模态 n < k/π"""
    return [n for n in range(int(np.floor(k / np.pi)) + 1) if n * np.pi < k]


# ---------------------------------------------------------------------------
# 模态分解/重构
# ---------------------------------------------------------------------------

def decompose(field: SectionField, N: int) -> ModalCoefficients:
    """c_n = ∫_0^1 u(y) φ_n(y) dy, 复合梯形公式"""
    if N < 0:
        raise DomainError(f"截断阶数必须非负: N={N}")
    if field.ny < 4 * N:
        raise AliasingError(f"采样点数 {field.ny} 不足以分辨 {N} 阶模态 (需要 >= {4 * N})")
    y = field.y
    weights = trapezoid_weights(field.ny, 1.0 / (field.ny - 1))
    phi = modal_matrix(N, y)
    return ModalCoefficients(phi @ (weights * field.samples))


def decompose_columns(values: np.ndarray, N: int) -> np.ndarray:
    """对 (nx, ny) 场逐列分解, 返回 (N+1, nx)"""
    ny = values.shape[1]
    if ny < 4 * N:
        raise AliasingError(f"采样点数 {ny} 不足以分辨 {N} 阶模态 (需要 >= {4 * N})")
    weights = trapezoid_weights(ny, 1.0 / (ny - 1))
    phi = modal_matrix(N, np.linspace(0.0, 1.0, ny))
    return (phi * weights) @ values.T


def recompose(coeffs: ModalCoefficients, ny: int) -> SectionField:
    """u(y) = Σ c_n φ_n(y)"""
    if ny < 2:
        raise DomainError("重构至少需要2个采样点")
    y = np.linspace(0.0, 1.0, ny)
    return SectionField(coeffs.coeffs @ modal_matrix(coeffs.N, y))


# ---------------------------------------------------------------------------
# Γ 变换与数据空间范数
# ---------------------------------------------------------------------------

def h_norm(values: np.ndarray, omegas: np.ndarray) -> float:
    """‖û‖_H = (∫ ω² |û(ω)|² dω)^{1/2}, 梯形公式"""
    values = np.asarray(values, dtype=complex)
    omegas = np.asarray(omegas, dtype=float)
    if omegas.size == 0:
        raise DomainError("频率网格为空")
    if values.shape != omegas.shape:
        raise DomainError("数据与频率网格长度不一致")
    if np.any(omegas <= 0) or np.any(np.diff(omegas) <= 0):
        raise DomainError("频率网格必须严格递增且为正")
    if omegas.size == 1:
        return 0.0
    return float(np.sqrt(trapezoid(omegas ** 2 * np.abs(values) ** 2, omegas)))


def fourier_sum(weighted: np.ndarray, x: np.ndarray, omegas: np.ndarray) -> np.ndarray:
    """Σ_j weighted_j e^{iω x_j}, 按频率分块"""
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    out = np.empty(omegas.size, dtype=complex)
    for start in range(0, omegas.size, _CHUNK):
        block = omegas[start:start + _CHUNK]
        out[start:start + _CHUNK] = np.exp(1j * np.outer(block, x)) @ weighted
    return out


def gamma_transform(f: LineFunction, omegas: ArrayLike) -> np.ndarray:
    """Γ(f)(ω) = (i/2ω) ∫ f(z) e^{iωz} dz"""
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    if np.any(omegas == 0):
        raise DomainError("Γ 在 ω=0 处无定义")
    weighted = trapezoid_weights(f.n, f.dx) * f.samples
    return 1j / (2.0 * omegas) * fourier_sum(weighted, f.x, omegas)


def inverse_gamma(values: np.ndarray, omegas: np.ndarray, x: ArrayLike) -> np.ndarray:
    """Γ⁻¹(v)(x) = (2/π) ∫_0^∞ ω Im(v(ω) e^{−iωx}) dω (实函数, 全频带)"""
    values = np.asarray(values, dtype=complex)
    omegas = np.asarray(omegas, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    steps = np.diff(omegas)
    weighted = np.zeros(omegas.size)
    weighted[:-1] += steps / 2
    weighted[1:] += steps / 2
    out = np.empty(x.size)
    for start in range(0, x.size, _CHUNK):
        block = x[start:start + _CHUNK]
        kernel = np.exp(-1j * np.outer(block, omegas))
        out[start:start + _CHUNK] = (kernel @ (weighted * omegas * values)).imag
    return 2.0 / np.pi * out


def f_source(components: Sequence[LineFunction], omegas: ArrayLike) -> np.ndarray:
    """逐模态的 Γ(s_n), 返回 (N+1, len(ω))"""
    return np.vstack([gamma_transform(s_n, omegas) for s_n in components])


def f_bound(b1: LineFunction, b2: LineFunction, N: int, omegas: ArrayLike) -> np.ndarray:
    """逐模态的 Γ(b1 φ_n(1) + b2 φ_n(0)), 返回 (N+1, len(ω))"""
    if not b1.same_grid(b2):
        raise DomainError("b1 与 b2 必须定义在同一网格上")
    rows = []
    for n in range(N + 1):
        combined = LineFunction(b1.samples * eigenfunction(n, 1.0) + b2.samples * eigenfunction(n, 0.0),
                                b1.x0, b1.dx)
        rows.append(gamma_transform(combined, omegas))
    return np.vstack(rows)
