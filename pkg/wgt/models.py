"""
实验配置的 Pydantic 模型

配置文件为 JSON, 未知字段一律拒绝; 缺陷描述按 "type" 字段区分。
"""

import logging
from typing import Annotated, Any, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Discriminator, Field, Tag, model_validator

from wgt.core.defect_models import (
    BendParams,
    BendSequence,
    BumpProfiles,
    DefectDescriptor,
    InhomogeneityMap,
)
from wgt.core.fdfd_solver import DiscretizationConfig
from wgt.core.inversion import RegularizationConfig
from wgt.core.modal_core import LineFunction
from wgt.utils import frequency_grid
from wgt.wgt_config import wgt_config as config

logger = logging.getLogger(__name__)


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ---------------------------------------------------------------------------
# 网格
# ---------------------------------------------------------------------------

class GridRule(StrictModel):
    """频率网格: [k_min, k_max] 上 count 个点 (含端点), 去掉 nπ 保护带"""
    k_min: float = Field(gt=0)
    k_max: float = Field(gt=0)
    count: int = Field(ge=1)
    guard: float = Field(default_factory=lambda: config.GUARD_BAND, ge=0)

    @model_validator(mode="after")
    def check_order(self) -> "GridRule":
        if self.count > 1 and self.k_max <= self.k_min:
            raise ValueError("k_max 必须大于 k_min")
        return self

    def frequencies(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.k_min])
        return frequency_grid(self.k_min, self.k_max, self.count, self.guard)


class LineGrid(StrictModel):
    """一维窗口 [x_min, x_max] 上 count 个点"""
    x_min: float
    x_max: float
    count: int = Field(ge=2)

    @model_validator(mode="after")
    def check_order(self) -> "LineGrid":
        if self.x_max <= self.x_min:
            raise ValueError("x_max 必须大于 x_min")
        return self

    def as_tuple(self) -> Tuple[float, float, int]:
        return self.x_min, self.x_max, self.count


# ---------------------------------------------------------------------------
# 缺陷描述
# ---------------------------------------------------------------------------

class BendModel(StrictModel):
    type: Literal["bend"] = "bend"
    x_c: float
    r: float = Field(gt=0)
    theta: float

    def build(self) -> BendParams:
        return BendParams(self.x_c, self.r, self.theta)


class BendListModel(StrictModel):
    type: Literal["bends"] = "bends"
    bends: List[BendModel] = Field(min_length=1)

    def build(self) -> BendSequence:
        return BendSequence(tuple(b.build() for b in self.bends))


class QuarticPiece(StrictModel):
    """amplitude·1_{[start,end]}·(x−start)²(end−x)²"""
    amplitude: float
    start: float
    end: float

    @model_validator(mode="after")
    def check_order(self) -> "QuarticPiece":
        if self.end <= self.start:
            raise ValueError("end 必须大于 start")
        return self

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        inside = (x >= self.start) & (x <= self.end)
        return np.where(inside, self.amplitude * (x - self.start) ** 2 * (self.end - x) ** 2, 0.0)


class BumpModel(StrictModel):
    type: Literal["bump"] = "bump"
    grid: LineGrid
    h: List[QuarticPiece] = Field(default_factory=list)
    g: List[QuarticPiece] = Field(default_factory=list)

    def build(self) -> BumpProfiles:
        def profile(pieces):
            return lambda x: sum((p.evaluate(x) for p in pieces), np.zeros_like(x))

        return BumpProfiles.from_callables(profile(self.g), profile(self.h), *self.grid.as_tuple())


class EllipseModel(StrictModel):
    """amplitude·ρ^power·1_{ρ<=1}, ρ = |((x−cx)/ax, (y−cy)/ay)|"""
    type: Literal["inhomogeneity"] = "inhomogeneity"
    amplitude: float
    center: Tuple[float, float]
    semi_axes: Tuple[float, float]
    power: float = 2.0
    x_min: float
    x_max: float
    nx: int = Field(ge=2)
    ny: int = Field(ge=2)

    @model_validator(mode="after")
    def check_axes(self) -> "EllipseModel":
        if min(self.semi_axes) <= 0:
            raise ValueError("半轴长度必须为正")
        if self.x_max <= self.x_min:
            raise ValueError("x_max 必须大于 x_min")
        return self

    def build(self) -> InhomogeneityMap:
        (cx, cy), (ax, ay) = self.center, self.semi_axes

        def h(X, Y):
            rho = np.hypot((X - cx) / ax, (Y - cy) / ay)
            return np.where(rho <= 1.0, self.amplitude * rho ** self.power, 0.0)

        m = InhomogeneityMap.from_callable(h, self.x_min, self.x_max, self.nx, self.ny)
        m.label = f"ellipse@({cx}, {cy})"
        return m


class SampledBumpModel(StrictModel):
    """采样形式的凸起剖面, grid = (x0, dx, n); g、h 为空表示恒为0"""
    type: Literal["bump"] = "bump"
    grid: Tuple[float, float, int]
    g: List[float] = Field(default_factory=list)
    h: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_samples(self) -> "SampledBumpModel":
        _, dx, n = self.grid
        if dx <= 0 or n < 2:
            raise ValueError(f"grid 需要 dx > 0 且 n >= 2, 实际为 {self.grid}")
        for name in ("g", "h"):
            size = len(getattr(self, name))
            if size not in (0, n):
                raise ValueError(f"{name} 有 {size} 个采样, 与网格点数 {n} 不符")
        return self

    def build(self) -> BumpProfiles:
        x0, dx, n = self.grid

        def profile(samples):
            return LineFunction(np.asarray(samples, dtype=float) if samples else np.zeros(n), x0, dx)

        return BumpProfiles(profile(self.g), profile(self.h))


class SampledInhomogeneityModel(StrictModel):
    """采样形式的折射率扰动, values 形状 (nx, ny), y 方向均匀覆盖 [0, 1]"""
    type: Literal["inhomogeneity"] = "inhomogeneity"
    x0: float
    dx: float = Field(gt=0)
    nx: int = Field(ge=2)
    ny: int = Field(ge=2)
    values: List[List[float]]
    label: str = ""

    @model_validator(mode="after")
    def check_shape(self) -> "SampledInhomogeneityModel":
        if len(self.values) != self.nx or any(len(row) != self.ny for row in self.values):
            raise ValueError(f"values 的形状必须是 ({self.nx}, {self.ny})")
        return self

    def build(self) -> InhomogeneityMap:
        return InhomogeneityMap(np.asarray(self.values, dtype=float), self.x0, self.dx, self.label)


def _defect_tag(value: Any) -> Optional[str]:
    """按 "type" 区分, 同一类型的参数形式与采样形式按字段区分"""
    if isinstance(value, dict):
        kind = value.get("type")
        if kind == "bump" and isinstance(value.get("grid"), (list, tuple)):
            return "bump-samples"
        if kind == "inhomogeneity" and "values" in value:
            return "inhomogeneity-samples"
        return kind
    return DEFECT_TAGS.get(type(value))


DEFECT_TAGS = {
    BendModel: "bend",
    BendListModel: "bends",
    BumpModel: "bump",
    SampledBumpModel: "bump-samples",
    EllipseModel: "inhomogeneity",
    SampledInhomogeneityModel: "inhomogeneity-samples",
}

DefectModel = Annotated[
    Union[
        Annotated[BendModel, Tag("bend")],
        Annotated[BendListModel, Tag("bends")],
        Annotated[BumpModel, Tag("bump")],
        Annotated[SampledBumpModel, Tag("bump-samples")],
        Annotated[EllipseModel, Tag("inhomogeneity")],
        Annotated[SampledInhomogeneityModel, Tag("inhomogeneity-samples")],
    ],
    Discriminator(_defect_tag),
]


def defect_model(defect: DefectDescriptor) -> StrictModel:
    """缺陷描述转换为可写入配置文件的模型; 凸起与非均匀介质按采样值写出"""
    if isinstance(defect, BendParams):
        return BendModel(x_c=defect.x_c, r=defect.r, theta=defect.theta)
    if isinstance(defect, BendSequence):
        return BendListModel(bends=[defect_model(b) for b in defect.bends])
    if isinstance(defect, BumpProfiles):
        grid = (defect.h.x0, defect.h.dx, defect.h.n)
        return SampledBumpModel(grid=grid, g=defect.g.samples.real.tolist(), h=defect.h.samples.real.tolist())
    if isinstance(defect, InhomogeneityMap):
        return SampledInhomogeneityModel(x0=defect.x0, dx=defect.dx, nx=defect.nx, ny=defect.ny,
                                         values=defect.values.tolist(), label=defect.label)
    raise ValueError(f"未知的缺陷类型: {type(defect).__name__}")


# ---------------------------------------------------------------------------
# 求解与反演
# ---------------------------------------------------------------------------

class DiscretizationModel(StrictModel):
    dx: float = Field(default_factory=lambda: config.FDFD_DX, gt=0)
    dy: float = Field(default=0.01, gt=0)
    x_left: float = -1.0
    x_right: float = 8.0
    pml_left: float = Field(default_factory=lambda: config.PML_WIDTH, gt=0)
    pml_right: float = Field(default_factory=lambda: config.PML_WIDTH, gt=0)
    source_x: float = 0.0

    def build(self) -> DiscretizationConfig:
        return DiscretizationConfig(dx=self.dx, dy=self.dy, x_left=self.x_left, x_right=self.x_right,
                                    pml_left=self.pml_left, pml_right=self.pml_right, source_x=self.source_x)


class InversionModel(StrictModel):
    window: Optional[LineGrid] = None
    lam: float = Field(default=0.0, ge=0)
    max_iter: int = Field(default_factory=lambda: config.MAX_ITER, ge=0)
    grad_tol: float = Field(default_factory=lambda: config.GRAD_TOL, gt=0)
    positivity: bool = False
    real_valued: bool = True
    n_bends: int = Field(default=1, ge=1)
    bend_window: Tuple[float, float] = (0.0, 10.0)
    modes: int = Field(default=0, ge=0)
    ny: int = Field(default=101, ge=2)

    def build(self) -> RegularizationConfig:
        return RegularizationConfig(lam=self.lam, max_iter=self.max_iter, grad_tol=self.grad_tol,
                                    positivity=self.positivity, real_valued=self.real_valued)


class ExperimentConfig(StrictModel):
    """一次正演/反演实验的完整配置"""
    id: str = "experiment"
    defect: Optional[DefectModel] = None
    frequencies: GridRule
    n_modes: int = Field(default=0, ge=0)
    measure_x: float = 1.0
    generator: Literal["fdfd", "born-series", "born-model"] = "fdfd"
    discretization: DiscretizationModel = Field(default_factory=DiscretizationModel)
    inversion: InversionModel = Field(default_factory=InversionModel)
    output_dir: Optional[str] = None
    seed: Optional[int] = None
    noise_level: float = Field(default=0.0, ge=0)
    jobs: int = Field(default_factory=lambda: config.JOBS, ge=1)

    @model_validator(mode="after")
    def check_generator(self) -> "ExperimentConfig":
        if self.generator == "born-series" and self.defect_type != "inhomogeneity":
            raise ValueError("born-series 生成器只支持 inhomogeneity 缺陷")
        if self.generator == "born-model" and self.defect is None:
            raise ValueError("born-model 生成器需要缺陷描述")
        return self

    def build_defect(self) -> Optional[DefectDescriptor]:
        return None if self.defect is None else self.defect.build()

    @property
    def defect_type(self) -> Optional[str]:
        return None if self.defect is None else self.defect.type


class ConditionStudyConfig(StrictModel):
    """条件数研究: r 网格与 ω0 列表"""
    id: str = "condition-study"
    r_values: List[float] = Field(default_factory=lambda: [float(r) for r in np.round(np.linspace(0.02, 1.0, 50), 10)])
    omega0_values: List[float] = Field(default_factory=lambda: [n * float(np.pi) for n in range(1, 7)])
    points_per_unit: int = Field(default=250, ge=1)
    fft_size: int = Field(default=16384, ge=16)

    @model_validator(mode="after")
    def check_radii(self) -> "ConditionStudyConfig":
        if any(r <= 0 for r in self.r_values):
            raise ValueError("r 必须为正")
        return self
