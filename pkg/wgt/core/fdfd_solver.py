"""
独立的全波数据生成器: 带 PML 的二阶有限差分频域 (FDFD) 求解器

在映射后的直波导中离散 ∇·(S∇u) + k²τu = −τs,
PML 通过 x 方向复坐标拉伸 s(x) = 1 + iσ(x,k)/k 实现。
未知量按 x 优先的字典序排列 (下标 i*ny + j), 九点模板的带宽为 ny+1。
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from wgt.core.defect_models import (
    BendParams,
    BendSequence,
    BumpProfiles,
    DefectDescriptor,
    InhomogeneityMap,
    bend_coefficients,
    bend_source_density,
    bump_coefficients,
    defect_support,
    defect_type,
    inhomogeneity_coefficients,
)
from wgt.core.forward_modal import Rectangle, RectangleField
from wgt.core.modal_core import SectionField, decompose, longitudinal_wavenumber
from wgt.datasets import FrequencyDataset
from wgt.errors import DomainError, GeometryError, SolverError
from wgt.utils import near_cutoff

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
MIN_POINTS_PER_WAVELENGTH = 10.0

CoefficientFn = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class PmlProfile:
    """物理窗口 [x_left, x_right] 之外的吸收层, σ(x,k) = k·strength·(到窗口的距离)"""
    x_left: float
    x_right: float
    width_left: float
    width_right: float
    strength: float = 1.0

    def sigma(self, x: np.ndarray, k: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        depth = np.maximum(x - self.x_right, 0.0) + np.maximum(self.x_left - x, 0.0)
        return k * self.strength * depth

    def stretch(self, x: np.ndarray, k: float) -> np.ndarray:
        return 1.0 + 1j * self.sigma(x, k) / k


@dataclass(frozen=True)
class DiscretizationConfig:
    """FDFD 网格与吸收层配置"""
    dx: float = 0.01
    dy: float = 0.01
    x_left: float = -1.0
    x_right: float = 8.0
    pml_left: float = 19.0
    pml_right: float = 19.0
    pml_strength: float = 1.0
    source_x: float = 0.0

    def __post_init__(self):
        if not (self.dx > 0 and self.dy > 0):
            raise DomainError("网格步长必须为正")
        if self.x_right <= self.x_left:
            raise DomainError("物理窗口需要 x_right > x_left")
        if self.pml_left <= 0 or self.pml_right <= 0:
            raise DomainError("PML 宽度必须为正")
        if not self.x_left < self.source_x < self.x_right:
            raise GeometryError(f"源位置 {self.source_x} 必须严格位于物理窗口 ({self.x_left}, {self.x_right}) 内")

    @property
    def pml(self) -> PmlProfile:
        return PmlProfile(self.x_left, self.x_right, self.pml_left, self.pml_right, self.pml_strength)

    @property
    def region(self) -> Rectangle:
        return Rectangle.with_step(self.x_left - self.pml_left, self.x_right + self.pml_right, self.dx, self.dy)

    def points_per_wavelength(self, k: float) -> float:
        return 2.0 * np.pi / (k * max(self.dx, self.dy))


@dataclass
class BandedComplexSystem:
    """LAPACK 带状存储的复线性系统: ab[ku + p − q, q] = A[p, q]"""
    ab: np.ndarray
    kl: int
    ku: int
    rhs: np.ndarray
    region: Optional[Rectangle] = None
    k: Optional[float] = None

    @property
    def dimension(self) -> int:
        return self.ab.shape[1]

    @property
    def bandwidth(self) -> int:
        return max(self.kl, self.ku)

    @classmethod
    def from_dense(cls, A: np.ndarray, kl: int, ku: int, rhs: np.ndarray) -> "BandedComplexSystem":
        """由稠密矩阵抽取带状部分"""
        n = A.shape[0]
        ab = np.zeros((kl + ku + 1, n), dtype=complex)
        for o in range(-kl, ku + 1):
            diag = np.diagonal(A, offset=o)
            if o >= 0:
                ab[ku - o, o:] = diag
            else:
                ab[ku - o, :n + o] = diag
        return cls(ab, kl, ku, np.asarray(rhs, dtype=complex))

    def matvec(self, u: np.ndarray) -> np.ndarray:
        return band_matvec(self.ab, self.kl, self.ku, u)


def band_matvec(ab: np.ndarray, kl: int, ku: int, u: np.ndarray) -> np.ndarray:
    """带状矩阵乘向量"""
    n = ab.shape[1]
    u = np.asarray(u)
    out = np.zeros(n, dtype=complex)
    for r in range(kl + ku + 1):
        o = ku - r
        if o >= 0:
            out[:n - o] += ab[r, o:] * u[o:]
        else:
            out[-o:] += ab[r, :n + o] * u[:n + o]
    return out


# ---------------------------------------------------------------------------
# 系数与装配
# ---------------------------------------------------------------------------

def _homogeneous(X: np.ndarray, Y: np.ndarray):
    ones = np.ones(np.broadcast(X, Y).shape)
    return ones, np.zeros_like(ones), ones, ones


def coefficient_function(defect: Optional[DefectDescriptor]) -> CoefficientFn:
    """缺陷对应的 (S11, S12, S22, τ) 系数场"""
    if defect is None:
        return _homogeneous
    if isinstance(defect, BendParams):
        return lambda X, Y: bend_coefficients((defect,), X, Y)
    if isinstance(defect, BendSequence):
        return lambda X, Y: bend_coefficients(defect.bends, X, Y)
    if isinstance(defect, BumpProfiles):
        return lambda X, Y: bump_coefficients(defect, X, Y)
    if isinstance(defect, InhomogeneityMap):
        return lambda X, Y: inhomogeneity_coefficients(defect, X, Y)
    raise DomainError(f"未知的缺陷类型: {type(defect).__name__}")


def _wall_weights(ny: int, dy: float) -> Tuple[Dict[int, np.ndarray], np.ndarray]:
    """y 方向导数模板权重 (壁面单侧) 与控制体高度"""
    w = {d: np.zeros(ny) for d in (-1, 0, 1)}
    w[1][1:-1] = 1.0 / (2 * dy)
    w[-1][1:-1] = -1.0 / (2 * dy)
    w[1][0], w[0][0] = 1.0 / dy, -1.0 / dy
    w[0][-1], w[-1][-1] = 1.0 / dy, -1.0 / dy
    height = np.full(ny, dy)
    height[0] = height[-1] = dy / 2
    return w, height


def _operator_bands(coeff_fn: CoefficientFn, k: float, cfg: DiscretizationConfig) -> Tuple[np.ndarray, Rectangle]:
    region = cfg.region
    nx, ny = region.nx, region.ny
    dx, dy = region.dx, region.dy
    x, y = region.x, region.y
    xm = 0.5 * (x[:-1] + x[1:])
    ym = 0.5 * (y[:-1] + y[1:])

    s_node = cfg.pml.stretch(x, k)
    s_mid = cfg.pml.stretch(xm, k)

    # x 面 (i+1/2, j), y 面 (i, j+1/2), 节点 (i, j)
    a_f, b_f, _, _ = coeff_fn(*np.meshgrid(xm, y, indexing="ij"))
    _, b_g, c_g, _ = coeff_fn(*np.meshgrid(x, ym, indexing="ij"))
    _, _, _, tau = coeff_fn(*np.meshgrid(x, y, indexing="ij"))

    alpha = a_f / s_mid[:, None]
    alpha_plus = np.vstack([alpha, alpha[-1:]])
    alpha_minus = np.vstack([alpha[:1], alpha])
    b_plus = np.vstack([b_f, b_f[-1:]])
    b_minus = np.vstack([b_f[:1], b_f])

    w, height = _wall_weights(ny, dy)
    C: Dict[Tuple[int, int], np.ndarray] = {(di, dj): np.zeros((nx, ny), dtype=complex)
                                            for di in (-1, 0, 1) for dj in (-1, 0, 1)}

    # ∂x(a/s ∂x u)
    C[(1, 0)] += alpha_plus / dx ** 2
    C[(-1, 0)] += alpha_minus / dx ** 2
    C[(0, 0)] -= (alpha_plus + alpha_minus) / dx ** 2

    # ∂x(b ∂y u): x 面上 ∂y u 取两侧列的平均
    for dj in (-1, 0, 1):
        wj = w[dj][None, :]
        C[(0, dj)] += b_plus / (2 * dx) * wj - b_minus / (2 * dx) * wj
        C[(1, dj)] += b_plus / (2 * dx) * wj
        C[(-1, dj)] -= b_minus / (2 * dx) * wj

    # ∂y(s c ∂y u) 与 ∂y(b ∂x u), 壁面通量为0
    gamma = s_node[:, None] * c_g / dy
    up = np.zeros((nx, ny), dtype=complex)
    down = np.zeros((nx, ny), dtype=complex)
    up[:, :-1] = gamma
    down[:, 1:] = gamma
    C[(0, 1)] += up / height
    C[(0, -1)] += down / height
    C[(0, 0)] -= (up + down) / height

    bu = np.zeros((nx, ny))
    bd = np.zeros((nx, ny))
    bu[:, :-1] = b_g
    bd[:, 1:] = b_g
    for dj, factor in ((0, bu), (1, bu)):
        C[(1, dj)] += factor / (2 * height) / (2 * dx)
        C[(-1, dj)] -= factor / (2 * height) / (2 * dx)
    for dj, factor in ((-1, bd), (0, bd)):
        C[(1, dj)] -= factor / (2 * height) / (2 * dx)
        C[(-1, dj)] += factor / (2 * height) / (2 * dx)

    # s k² τ u
    C[(0, 0)] += s_node[:, None] * k * k * tau

    n = nx * ny
    kl = ku = ny + 1
    ab = np.zeros((kl + ku + 1, n), dtype=complex)
    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    P = I * ny + J
    for (di, dj), coef in C.items():
        valid = (I + di >= 0) & (I + di < nx) & (J + dj >= 0) & (J + dj < ny)
        o = di * ny + dj
        ab[ku - o, P[valid] + o] += coef[valid]
    return ab, region


def incident_field(k: float, cfg: DiscretizationConfig) -> np.ndarray:
    """入射场 e^{ik|x − x_s|} 在网格上的采样 (展平)"""
    region = cfg.region
    col = np.exp(1j * k * np.abs(region.x - cfg.source_x))
    return np.repeat(col, region.ny)


def _check_support(defect: DefectDescriptor, cfg: DiscretizationConfig) -> None:
    lo, hi = defect_support(defect)
    if lo < cfg.x_left or hi > cfg.x_right:
        raise GeometryError(f"缺陷支撑 [{lo:.4g}, {hi:.4g}] 超出物理窗口 [{cfg.x_left}, {cfg.x_right}]")


def _bend_rhs(defect: Union[BendParams, BendSequence], k: float, cfg: DiscretizationConfig,
              region: Rectangle) -> np.ndarray:
    """弯管散射场方程的右端项 −1_弯曲 k² e^{ik|x−x_s|} h_r(y) (展平)"""
    bends = defect.bends if isinstance(defect, BendSequence) else (defect,)
    rhs = np.zeros((region.nx, region.ny), dtype=complex)
    incident = np.exp(1j * k * np.abs(region.x - cfg.source_x))
    for b in bends:
        if b.theta == 0:
            continue
        inside = b.inside(region.x)
        rhs[inside] -= k * k * np.outer(incident[inside], bend_source_density(b, region.y))
    return rhs.ravel()


def assemble(defect: Optional[DefectDescriptor], k: float, cfg: DiscretizationConfig,
             source: Union[str, np.ndarray, None] = None) -> BandedComplexSystem:
    """装配带状系统

    source: None 为零右端项; "point" 为 −2ik δ(x − x_s) 点源;
    "scattered" 为散射场右端项: 弯管取弯曲段源 −k² u_inc h_r(y), 其余缺陷取 (A_空 − A_缺陷) u_inc; 也可直接给出 (nx, ny) 数组。
    """
    if not k > 0:
        raise DomainError(f"频率必须为正: k={k}")
    if defect is not None:
        _check_support(defect, cfg)
    if cfg.points_per_wavelength(k) < MIN_POINTS_PER_WAVELENGTH:
        logger.warning(f"k={k:.4g} 时每波长仅 {cfg.points_per_wavelength(k):.1f} 个网格点 (< {MIN_POINTS_PER_WAVELENGTH:.0f})")

    ab, region = _operator_bands(coefficient_function(defect), k, cfg)
    kl = ku = region.ny + 1
    n = region.nx * region.ny

    if source is None:
        rhs = np.zeros(n, dtype=complex)
    elif isinstance(source, str) and source == "point":
        rhs = np.zeros((region.nx, region.ny), dtype=complex)
        i_s = int(round((cfg.source_x - region.x_min) / region.dx))
        rhs[i_s, :] = 2j * k / region.dx
        rhs = rhs.ravel()
    elif isinstance(source, str) and source == "scattered":
        if defect is None:
            rhs = np.zeros(n, dtype=complex)
        elif isinstance(defect, (BendParams, BendSequence)):
            rhs = _bend_rhs(defect, k, cfg, region)
        else:
            ab_empty, _ = _operator_bands(_homogeneous, k, cfg)
            rhs = band_matvec(ab_empty - ab, kl, ku, incident_field(k, cfg))
    elif isinstance(source, str):
        raise DomainError(f"未知的源类型: {source}")
    else:
        arr = np.asarray(source, dtype=complex)
        if arr.shape != (region.nx, region.ny):
            raise DomainError(f"右端项形状 {arr.shape} 与网格 ({region.nx}, {region.ny}) 不一致")
        s_node = cfg.pml.stretch(region.x, k)
        rhs = (arr * s_node[:, None]).ravel()

    logger.debug(f"装配完成: k={k:.4g}, 维数 {n}, 带宽 {kl}")
    return BandedComplexSystem(ab, kl, ku, rhs, region, k)


def solve_vector(sys: BandedComplexSystem) -> np.ndarray:
    """带状 LU (带内部分选主元) 直接求解并检查残差, 返回解向量"""
    b_norm = np.linalg.norm(sys.rhs)
    if b_norm == 0:
        u = np.zeros(sys.dimension, dtype=complex)
    else:
        try:
            u = solve_banded((sys.kl, sys.ku), sys.ab, sys.rhs, check_finite=False)
        except (LinAlgError, ValueError) as e:
            raise SolverError(f"带状求解失败: {str(e)}", k=sys.k) from e
        if not np.all(np.isfinite(u)):
            raise SolverError("带状求解结果包含非有限值", k=sys.k)
        residual = np.linalg.norm(sys.matvec(u) - sys.rhs) / b_norm
        if residual >= RESIDUAL_TOL:
            raise SolverError(f"相对残差 {residual:.2e} 超过 {RESIDUAL_TOL:.0e}", k=sys.k)
        logger.debug(f"求解完成: 相对残差 {residual:.2e}")
    return u


def solve(sys: BandedComplexSystem) -> RectangleField:
    """求解网格系统, 返回 (nx, ny) 复场"""
    if sys.region is None:
        raise DomainError("系统未关联网格, 请使用 solve_vector")
    u = solve_vector(sys)
    return RectangleField(u.reshape(sys.region.nx, sys.region.ny), sys.region)


def solve_point_source(k: float, cfg: DiscretizationConfig,
                       defect: Optional[DefectDescriptor] = None) -> RectangleField:
    """点源 −2ik δ(x − x_s) 激发的总场"""
    return solve(assemble(defect, k, cfg, source="point"))


def section_at(field: RectangleField, x: float) -> SectionField:
    """x 处截面 (相邻两列线性插值)"""
    region = field.region
    t = (x - region.x_min) / region.dx
    if t < 0 or t > region.nx - 1:
        raise DomainError(f"截面位置 x={x} 超出网格")
    i0 = min(int(np.floor(t)), region.nx - 2)
    frac = t - i0
    return SectionField((1 - frac) * field.values[i0] + frac * field.values[i0 + 1])


# ---------------------------------------------------------------------------
# 数据合成
# ---------------------------------------------------------------------------

def _measure_one(defect: Optional[DefectDescriptor], k: float, measure_x: float, n_modes: int,
                 cfg: DiscretizationConfig) -> List[Tuple[int, float, float, complex]]:
    field = solve(assemble(defect, k, cfg, source="scattered"))
    coeffs = decompose(section_at(field, measure_x), n_modes).coeffs
    rows = []
    for n in range(n_modes + 1):
        if n * np.pi >= k:
            break
        k_n = longitudinal_wavenumber(k, n).value.real
        # 平移到参考截面 x=0, 并换算到位于 x=0 的单位相位源
        datum = coeffs[n] * np.exp(1j * k_n * measure_x) * np.exp(1j * k * cfg.source_x)
        rows.append((n, float(k), float(k + k_n), complex(datum)))
    return rows


def synthesize_measurements(defect: Optional[DefectDescriptor], K: Sequence[float], measure_x: float,
                            n_modes: int, cfg: DiscretizationConfig, guard: float = 0.0,
                            jobs: int = 1) -> FrequencyDataset:
    """逐频率求解全波问题并在测量截面上提取散射模态数据"""
    K = np.asarray(K, dtype=float)
    if defect is not None:
        lo, _ = defect_support(defect)
        if not cfg.source_x < measure_x < lo:
            raise GeometryError(f"测量截面 x={measure_x} 必须严格位于源 {cfg.source_x} 与缺陷支撑 {lo:.4g} 之间")
    elif not cfg.source_x < measure_x < cfg.x_right:
        raise GeometryError(f"测量截面 x={measure_x} 必须位于源右侧的物理窗口内")

    ks = []
    for k in K:
        if guard > 0 and near_cutoff(k, guard):
            logger.warning(f"跳过靠近截止频率的 k={k:.4g} (保护带 {guard})")
            continue
        ks.append(float(k))
    if ks and cfg.points_per_wavelength(max(ks)) < MIN_POINTS_PER_WAVELENGTH:
        logger.warning(f"最高频率 k={max(ks):.4g} 处分辨率不足: 每波长 {cfg.points_per_wavelength(max(ks)):.1f} 点")

    logger.info(f"开始FDFD数据合成: {len(ks)} 个频率, 模态 <= {n_modes}, 并行数 {jobs}")
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(lambda k: _measure_one(defect, k, measure_x, n_modes, cfg), ks))
    else:
        batches = [_measure_one(defect, k, measure_x, n_modes, cfg) for k in ks]

    rows = [row for batch in batches for row in batch]
    meta = {"measure_x": measure_x, "dx": cfg.dx, "dy": cfg.dy, "pml": [cfg.pml_left, cfg.pml_right],
            "window": [cfg.x_left, cfg.x_right], "guard": guard}
    dataset = FrequencyDataset.from_triples(rows, provenance="fdfd",
                                            defect_type=defect_type(defect) if defect is not None else None,
                                            meta=meta)
    logger.info(f"FDFD数据合成完成: {len(dataset)} 条记录")
    return dataset
