"""
缺陷几何映射与 Born 近似数据模型

弯管: 圆弧弯曲映射到直波导, 度量 S、τ、t1、t2 以及矩形等效源
凸起: 上下壁剖面 h、g, 度量 S、τ、t1、t2 以及边界源数据模型
非均匀介质: 折射率扰动 h(x,y) 的逐模态数据模型
"""

import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from wgt.core.forward_modal import (
    BornSeriesResult,
    Rectangle,
    RectangleField,
    born_series,
    evaluate_modes,
    modal_sources_from_field,
)
from wgt.core.modal_core import (
    LineFunction,
    decompose_columns,
    gamma_transform,
    longitudinal_wavenumber,
)
from wgt.datasets import FrequencyDataset
from wgt.errors import DivergenceError, DomainError, GeometryError, ModeUnavailableError, NoSolutionError
from wgt.utils import near_cutoff

logger = logging.getLogger(__name__)

# bend_params_from_profile 中 r 的搜索区间
R_MIN, R_MAX = 1e-3, 1e9


# ---------------------------------------------------------------------------
# 缺陷描述
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BendParams:
    """弯曲起点 x_c, 内侧曲率半径 r, 有符号弯曲角 theta"""
    x_c: float
    r: float
    theta: float

    def __post_init__(self):
        if not self.r > 0:
            raise DomainError(f"曲率半径必须为正: r={self.r}")

    @property
    def length(self) -> float:
        """轴线弧长 |θ|(r+1)"""
        return abs(self.theta) * (self.r + 1.0)

    @property
    def x_end(self) -> float:
        return self.x_c + self.length

    def inside(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x > self.x_c) & (x < self.x_end)


@dataclass(frozen=True)
class BendSequence:
    """若干互不相交的连续弯曲"""
    bends: Tuple[BendParams, ...]

    def __post_init__(self):
        ordered = sorted(self.bends, key=lambda b: b.x_c)
        for left, right in zip(ordered, ordered[1:]):
            if right.x_c < left.x_end:
                raise GeometryError(f"弯曲区间重叠: [{left.x_c}, {left.x_end}] 与 [{right.x_c}, {right.x_end}]")
        object.__setattr__(self, "bends", tuple(ordered))


@dataclass
class BumpProfiles:
    """下壁剖面 g 与上壁剖面 h (实值, 同一网格)"""
    g: LineFunction
    h: LineFunction

    def __post_init__(self):
        if not self.g.same_grid(self.h):
            raise GeometryError("g 与 h 必须定义在同一网格上")
        self.g = self.g.real()
        self.h = self.h.real()
        width = 1.0 + self.h.samples.real - self.g.samples.real
        if np.any(width <= 0):
            raise GeometryError(f"通道退化: min(1+h-g) = {width.min():.4g} <= 0")

    @classmethod
    def from_callables(cls, g_fn, h_fn, x_min: float, x_max: float, count: int) -> "BumpProfiles":
        return cls(LineFunction.from_callable(g_fn, x_min, x_max, count),
                   LineFunction.from_callable(h_fn, x_min, x_max, count))

    @property
    def x(self) -> np.ndarray:
        return self.h.x

    def derivatives(self) -> Tuple[LineFunction, LineFunction]:
        """(g', h')"""
        return self.g.derivative().real(), self.h.derivative().real()


@dataclass
class InhomogeneityMap:
    """均匀 (x,y) 网格上的折射率扰动 h, values 形状 (nx, ny)"""
    values: np.ndarray
    x0: float
    dx: float
    label: str = field(default="")

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or min(self.values.shape) < 2:
            raise DomainError("非均匀介质必须是至少 2×2 的网格")

    @classmethod
    def from_callable(cls, fn, x_min: float, x_max: float, nx: int, ny: int) -> "InhomogeneityMap":
        x = np.linspace(x_min, x_max, nx)
        y = np.linspace(0.0, 1.0, ny)
        X, Y = np.meshgrid(x, y, indexing="ij")
        return cls(np.asarray(fn(X, Y), dtype=float), x_min, x[1] - x[0])

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.ny)

    @property
    def x_end(self) -> float:
        return self.x0 + self.dx * (self.nx - 1)

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def born_number(self, k: float) -> float:
        """Born 有效性诊断量 k²‖h‖_∞"""
        return k * k * self.sup_norm

    def modal_components(self, N: int) -> np.ndarray:
        """h_n(x), 返回 (N+1, nx)"""
        return decompose_columns(self.values.astype(complex), N).real

    def evaluate(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """双线性插值, 窗口外为0"""
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        fx = (X - self.x0) / self.dx
        fy = Y * (self.ny - 1)
        inside = (fx >= 0) & (fx <= self.nx - 1)
        i0 = np.clip(np.floor(fx).astype(int), 0, self.nx - 2)
        j0 = np.clip(np.floor(fy).astype(int), 0, self.ny - 2)
        tx = np.clip(fx - i0, 0.0, 1.0)
        ty = np.clip(fy - j0, 0.0, 1.0)
        v = (self.values[i0, j0] * (1 - tx) * (1 - ty) + self.values[i0 + 1, j0] * tx * (1 - ty)
             + self.values[i0, j0 + 1] * (1 - tx) * ty + self.values[i0 + 1, j0 + 1] * tx * ty)
        return np.where(inside, v, 0.0)


DefectDescriptor = Union[BendParams, BendSequence, BumpProfiles, InhomogeneityMap]


def defect_type(defect: DefectDescriptor) -> str:
    """序列化时使用的类型标签"""
    if isinstance(defect, BendParams):
        return "bend"
    if isinstance(defect, BendSequence):
        return "bends"
    if isinstance(defect, BumpProfiles):
        return "bump"
    if isinstance(defect, InhomogeneityMap):
        return "inhomogeneity"
    raise DomainError(f"未知的缺陷类型: {type(defect).__name__}")


def defect_support(defect: DefectDescriptor) -> Tuple[float, float]:
    """缺陷在 x 方向的支撑区间"""
    if isinstance(defect, BendParams):
        return defect.x_c, defect.x_end
    if isinstance(defect, BendSequence):
        return defect.bends[0].x_c, max(b.x_end for b in defect.bends)
    if isinstance(defect, BumpProfiles):
        active = np.flatnonzero((np.abs(defect.h.samples) > 0) | (np.abs(defect.g.samples) > 0))
        if active.size == 0:
            return defect.h.x0, defect.h.x0
        x = defect.x
        return float(x[max(active[0] - 1, 0)]), float(x[min(active[-1] + 1, x.size - 1)])
    if isinstance(defect, InhomogeneityMap):
        active = np.flatnonzero(np.any(defect.values != 0, axis=1))
        if active.size == 0:
            return defect.x0, defect.x0
        x = defect.x
        return float(x[max(active[0] - 1, 0)]), float(x[min(active[-1] + 1, x.size - 1)])
    raise DomainError(f"未知的缺陷类型: {type(defect).__name__}")


# ---------------------------------------------------------------------------
# 弯管
# ---------------------------------------------------------------------------

class BendMetric(NamedTuple):
    S: np.ndarray
    tau: float
    t1: float
    t2: float


def _bend_map_positive(x_c: float, r: float, theta: float, x: float, y: float) -> Tuple[float, float]:
    if x <= x_c:
        return x, y
    x_end = x_c + theta * (r + 1.0)
    if x < x_end:
        a = (x - x_c) / (r + 1.0)
        return x_c + (r + y) * np.sin(a), -r + (r + y) * np.cos(a)
    s = x - x_end
    return (x_c + (r + y) * np.sin(theta) + s * np.cos(theta),
            -r + (r + y) * np.cos(theta) - s * np.sin(theta))


def bend_map(p: BendParams, x: float, y: float) -> Tuple[float, float]:
    """直波导 (x,y) 到弯管的映射; θ<0 时关于 y=1/2 镜像"""
    if not 0.0 <= y <= 1.0:
        raise DomainError("y 必须位于 [0, 1] 内")
    if p.theta >= 0:
        return _bend_map_positive(p.x_c, p.r, p.theta, x, y)
    X, Y = _bend_map_positive(p.x_c, p.r, -p.theta, x, 1.0 - y)
    return X, 1.0 - Y


def bend_metric(p: BendParams, x: float, y: float) -> BendMetric:
    """弯曲段内 S = diag((r+1)/(r+y), (r+y)/(r+1)), τ = (r+y)/(r+1); 内侧壁迹范数 r/(r+1), 外侧壁为1

    θ>0 时内侧壁是下壁 (t2), θ<0 镜像后是上壁 (t1)
    """
    if not 0.0 <= y <= 1.0:
        raise DomainError("y 必须位于 [0, 1] 内")
    if p.theta == 0 or not p.inside(x):
        return BendMetric(np.eye(2), 1.0, 1.0, 1.0)
    r = p.r
    yy = y if p.theta > 0 else 1.0 - y
    ratio = (r + yy) / (r + 1.0)
    inner = r / (r + 1.0)
    t1, t2 = (1.0, inner) if p.theta > 0 else (inner, 1.0)
    return BendMetric(np.diag([1.0 / ratio, ratio]), ratio, t1, t2)


def bend_coefficients(bends: Sequence[BendParams], X: np.ndarray, Y: np.ndarray):
    """网格上的 (S11, S12, S22, τ), 供有限差分装配"""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    s11 = np.ones(np.broadcast(X, Y).shape)
    s22 = np.ones_like(s11)
    tau = np.ones_like(s11)
    for p in bends:
        if p.theta == 0:
            continue
        yy = Y if p.theta > 0 else 1.0 - Y
        ratio = (p.r + yy) / (p.r + 1.0) * np.ones_like(s11)
        mask = np.broadcast_to(p.inside(X), s11.shape)
        s11 = np.where(mask, 1.0 / ratio, s11)
        s22 = np.where(mask, ratio, s22)
        tau = np.where(mask, ratio, tau)
    return s11, np.zeros_like(s11), s22, tau


def bend_amplitude(r: float) -> float:
    """∫_0^1 h_r = 1 − 1/(2(r+1)) − (r+1) ln((r+1)/r)"""
    if not r > 0:
        raise DomainError(f"曲率半径必须为正: r={r}")
    return 1.0 - 1.0 / (2.0 * (r + 1.0)) - (r + 1.0) * np.log1p(1.0 / r)


def bend_source_density(p: BendParams, y: np.ndarray) -> np.ndarray:
    """弯曲段内的横向源密度 h_r(y) = (y−1)(1/(r+y) + 1/(r+1)); θ<0 时取 h_r(1−y)"""
    y = np.asarray(y, dtype=float)
    yy = y if p.theta >= 0 else 1.0 - y
    return (yy - 1.0) * (1.0 / (p.r + yy) + 1.0 / (p.r + 1.0))


def bend_source_profile(p: BendParams, count: int = 201) -> Tuple[LineFunction, float]:
    """矩形等效源 f = A·1_{[x_c, x_c+|θ|(r+1)]}"""
    amplitude = bend_amplitude(p.r)
    if p.theta == 0:
        return LineFunction(np.zeros(2), p.x_c, 1.0), amplitude
    x = np.linspace(p.x_c, p.x_end, count)
    return LineFunction(np.full(count, amplitude), p.x_c, x[1] - x[0]), amplitude


def bend_fit_model(p1: float, p2: float, p3: float, omega: Union[float, np.ndarray]) -> Union[complex, np.ndarray]:
    """矩形 −p1·1_{[p2,p2+p3]} 的归一化数据 −(ip1/ω) e^{iω(2p2+p3)/2} sin(p3ω/2)"""
    omega_arr = np.asarray(omega, dtype=float)
    if np.any(omega_arr == 0):
        raise DomainError("ω=0 处模型无定义")
    value = -1j * p1 / omega_arr * np.exp(1j * omega_arr * (2.0 * p2 + p3) / 2.0) * np.sin(p3 * omega_arr / 2.0)
    return complex(value) if value.ndim == 0 else value


def bend_data_model(p: Union[BendParams, BendSequence], k: Union[float, np.ndarray]) -> Union[complex, np.ndarray]:
    """参考截面处第一模态散射数据 v_{k,0}(0) = 2k² Γ(f)(2k)"""
    bends = p.bends if isinstance(p, BendSequence) else (p,)
    k_arr = np.asarray(k, dtype=float)
    if np.any(k_arr <= 0):
        raise DomainError("频率必须为正")
    total = np.zeros(k_arr.shape, dtype=complex)
    for b in bends:
        if b.theta == 0:
            continue
        # 2k² Γ(f)(2k) = k · (2k Γ(f)(2k)), 括号内即归一化的矩形闭式
        total = total + k_arr * bend_fit_model(-bend_amplitude(b.r), b.x_c, b.length, 2.0 * k_arr)
    return complex(total) if total.ndim == 0 else total


def bend_params_from_profile(p1: float, p2: float, p3: float) -> BendParams:
    """由矩形拟合 (p1, p2, p3) 反解 (x_c, r, θ)"""
    if not p1 > 0 or not p3 > 0:
        raise NoSolutionError(f"需要 p1>0 且 p3>0: p1={p1}, p3={p3}")

    def residual(log_r: float) -> float:
        return bend_amplitude(np.exp(log_r)) + p1

    lo, hi = np.log(R_MIN), np.log(R_MAX)
    if residual(lo) * residual(hi) > 0:
        raise NoSolutionError(f"p1={p1} 超出幅值函数在 r∈[{R_MIN}, {R_MAX}] 上的取值范围")
    r = float(np.exp(brentq(residual, lo, hi, xtol=1e-14, rtol=1e-14, maxiter=500)))
    return BendParams(x_c=p2, r=r, theta=p3 / (r + 1.0))


# ---------------------------------------------------------------------------
# 凸起
# ---------------------------------------------------------------------------

class BumpMetric(NamedTuple):
    S: np.ndarray
    tau: float
    t1: float
    t2: float


def _bump_fields(b: BumpProfiles, x: np.ndarray):
    g_d, h_d = b.derivatives()
    g = b.g.evaluate(x).real
    h = b.h.evaluate(x).real
    gp = g_d.evaluate(x).real
    hp = h_d.evaluate(x).real
    return g, h, gp, hp


def bump_coefficients(b: BumpProfiles, X: np.ndarray, Y: np.ndarray):
    """网格上的 (S11, S12, S22, τ)"""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    g, h, gp, hp = _bump_fields(b, X)
    tau = 1.0 + h - g
    if np.any(tau <= 0):
        raise GeometryError(f"通道退化: min(1+h-g) = {tau.min():.4g} <= 0")
    a = (hp - gp) * Y + gp
    return tau, -a, (a * a + 1.0) / tau, tau


def bump_metric(b: BumpProfiles, x: float, y: float) -> BumpMetric:
    """φ(x,y) = (x, (1+h−g)y + g) 的度量"""
    if not 0.0 <= y <= 1.0:
        raise DomainError("y 必须位于 [0, 1] 内")
    g, h, gp, hp = (float(v) for v in _bump_fields(b, np.array(x, dtype=float)))
    tau = 1.0 + h - g
    if tau <= 0:
        raise GeometryError(f"通道在 x={x} 处退化: 1+h-g = {tau:.4g}")
    a = (hp - gp) * y + gp
    S = np.array([[tau, -a], [-a, (a * a + 1.0) / tau]])
    return BumpMetric(S, tau, float(np.sqrt(1.0 + hp * hp)), float(np.sqrt(1.0 + gp * gp)))


def bump_data_model(b: BumpProfiles, k: float) -> Tuple[complex, Optional[complex]]:
    """d0 = 2ik Γ(h'−g')(2k); k>π 时 d1 = −√2 ik (k1+k)/k1 · Γ(h'+g')(k+k1)"""
    if not k > 0:
        raise DomainError(f"频率必须为正: k={k}")
    g_d, h_d = b.derivatives()
    s0 = LineFunction(h_d.samples - g_d.samples, h_d.x0, h_d.dx)
    d0 = 2j * k * complex(gamma_transform(s0, 2.0 * k)[0])
    if k <= np.pi:
        return d0, None
    k1 = longitudinal_wavenumber(k, 1).value.real
    s1 = LineFunction(h_d.samples + g_d.samples, h_d.x0, h_d.dx)
    d1 = -np.sqrt(2.0) * 1j * k * (k1 + k) / k1 * complex(gamma_transform(s1, k + k1)[0])
    return d0, d1


# ---------------------------------------------------------------------------
# 非均匀介质
# ---------------------------------------------------------------------------

def inhomogeneity_coefficients(m: InhomogeneityMap, X: np.ndarray, Y: np.ndarray):
    """网格上的 (S11, S12, S22, 1+h)"""
    X = np.asarray(X, dtype=float)
    ones = np.ones(np.broadcast(X, Y).shape)
    return ones, np.zeros_like(ones), ones, 1.0 + m.evaluate(X, Y)


def inhomogeneity_data_model(m: InhomogeneityMap, k: float, n: int, guard: float = 0.0) -> complex:
    """v_n(0) = (k+k_n) k² / k_n · Γ(h_n)(k+k_n)"""
    if not k > n * np.pi:
        raise ModeUnavailableError(f"模态 {n} 在 k={k} 下不传播 (需要 k > {n}π)")
    if k - n * np.pi < guard:
        logger.warning(f"k={k:.4g} 位于模态 {n} 截止频率的保护带内")
    k_n = longitudinal_wavenumber(k, n).value.real
    h_n = LineFunction(m.modal_components(n)[n], m.x0, m.dx)
    omega = k + k_n
    return complex((k + k_n) * k * k / k_n * gamma_transform(h_n, omega)[0])


# ---------------------------------------------------------------------------
# 数据生成 (Born 模型与 Born 级数)
# ---------------------------------------------------------------------------

def _usable_frequencies(ks: Sequence[float], guard: float) -> List[float]:
    kept = []
    for k in np.asarray(ks, dtype=float):
        if guard > 0 and near_cutoff(k, guard):
            logger.warning(f"跳过靠近截止频率的 k={k:.4g} (保护带 {guard})")
            continue
        kept.append(float(k))
    return kept


def born_model_measurements(defect: DefectDescriptor, ks: Sequence[float], n_modes: int = 0,
                            guard: float = 0.0) -> FrequencyDataset:
    """用闭式 Born 数据模型生成参考截面数据 (与反演同一模型, 仅作一致性参照)"""
    rows = []
    for k in _usable_frequencies(ks, guard):
        if isinstance(defect, (BendParams, BendSequence)):
            rows.append((0, k, 2.0 * k, bend_data_model(defect, k)))
        elif isinstance(defect, BumpProfiles):
            d0, d1 = bump_data_model(defect, k)
            rows.append((0, k, 2.0 * k, d0))
            if d1 is not None and n_modes >= 1:
                k1 = longitudinal_wavenumber(k, 1).value.real
                rows.append((1, k, k + k1, d1))
        elif isinstance(defect, InhomogeneityMap):
            if defect.born_number(k) >= 1.0:
                logger.warning(f"k={k:.4g} 时 k²‖h‖_∞ = {defect.born_number(k):.3g} >= 1, Born 近似可能失效")
            for n in range(n_modes + 1):
                if n * np.pi >= k:
                    break
                k_n = longitudinal_wavenumber(k, n).value.real
                rows.append((n, k, k + k_n, inhomogeneity_data_model(defect, k, n)))
        else:
            raise DomainError(f"未知的缺陷类型: {type(defect).__name__}")
    return FrequencyDataset.from_triples(rows, provenance="born-model", defect_type=defect_type(defect),
                                         meta={"guard": guard, "n_modes": n_modes})


def inhomogeneity_scattered_field(m: InhomogeneityMap, k: float, n_terms: int, m_max: Optional[int] = None,
                                  tol: Optional[float] = None, multiple: bool = True) -> BornSeriesResult:
    """Born 级数求解 Δw + k²(1+h)w = −k²h e^{ikx}, 场定义在扰动网格上; multiple=False 时只取 Born 近似"""
    region = Rectangle(m.x0, m.x_end, m.nx, m.ny)
    weight = k * k * m.values
    incident = np.exp(1j * k * np.abs(region.x))[:, None] * np.ones(region.ny)
    source = modal_sources_from_field(RectangleField(weight * incident, region), n_terms)

    def scatter(field: RectangleField) -> RectangleField:
        return RectangleField(weight * field.values, region)

    return born_series(source, None, scatter if multiple else None, None, None, k, region, n_terms,
                       m_max=m_max, tol=tol)


def born_series_measurements(m: InhomogeneityMap, ks: Sequence[float], measure_x: float, n_modes: int,
                             n_terms: Optional[int] = None, guard: float = 0.0,
                             m_max: Optional[int] = None, tol: Optional[float] = None) -> FrequencyDataset:
    """模态多重散射 (Born 级数) 生成非均匀介质数据; 级数发散的频率不产生数据, 记入 meta["diverged_k"]"""
    n_terms = n_modes if n_terms is None else n_terms
    if n_terms < n_modes:
        raise DomainError(f"级数截断阶数 {n_terms} 不能小于测量模态数 {n_modes}")
    if not measure_x < m.x0:
        raise GeometryError(f"测量截面 x={measure_x} 必须位于扰动支撑左侧 (x0={m.x0})")
    region = Rectangle(m.x0, m.x_end, m.nx, m.ny)
    rows = []
    diverged = []
    for k in _usable_frequencies(ks, guard):
        try:
            result = inhomogeneity_scattered_field(m, k, n_terms, m_max=m_max, tol=tol)
        except DivergenceError as e:
            logger.warning(f"k={k:.4g} 处 Born 级数发散, 丢弃该频率: {str(e)}")
            diverged.append(k)
            continue
        incident = np.exp(1j * k * np.abs(region.x))[:, None] * np.ones(region.ny)
        total = RectangleField(k * k * m.values * (incident + result.field.values), region)
        modes = evaluate_modes(modal_sources_from_field(total, n_terms), k, [measure_x])
        for n in range(n_modes + 1):
            if n * np.pi >= k:
                break
            k_n = longitudinal_wavenumber(k, n).value.real
            rows.append((n, k, k + k_n, complex(modes[n, 0] * np.exp(1j * k_n * measure_x))))
    meta = {"measure_x": measure_x, "n_terms": n_terms, "guard": guard, "diverged_k": diverged}
    return FrequencyDataset.from_triples(rows, provenance="born-series", defect_type="inhomogeneity", meta=meta)
