"""
结果表、验收报告与诊断图
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from wgt.utils import write_json  # noqa: E402

logger = logging.getLogger(__name__)

# 固定 SVG 内部 id, 同一输入得到相同文件
plt.rcParams["svg.hashsalt"] = "wgt"

PathLike = Union[str, Path]

FEM_NOTE = "参考图表由有限元数据生成, 本工具使用有限差分数据, 不要求逐像素一致"


@dataclass
class ResultTable:
    """带标题与出处的结果表"""
    frame: pd.DataFrame
    caption: str = ""
    provenance: str = ""

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def columns(self) -> List[str]:
        return list(self.frame.columns)

    def save_csv(self, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        logger.info(f"结果表已保存: {path}")
        return path

    def save_json(self, path: PathLike) -> Path:
        return write_json(path, {"caption": self.caption, "provenance": self.provenance,
                                 "rows": self.frame.to_dict(orient="records")})


# ---------------------------------------------------------------------------
# 验收报告
# ---------------------------------------------------------------------------

@dataclass
class Criterion:
    name: str
    measured: Any
    bound: Any
    passed: bool
    provenance: str = ""


@dataclass
class AcceptanceReport:
    """逐项 pass/fail 的验收报告"""
    experiment: str
    provenance: str = ""
    criteria: List[Criterion] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def _add(self, name: str, measured: Any, bound: Any, passed: bool) -> bool:
        passed = bool(passed)
        self.criteria.append(Criterion(name, measured, bound, passed, self.provenance))
        level = logging.INFO if passed else logging.WARNING
        logger.log(level, f"[{self.experiment}] {name}: 测量值 {measured}, 界 {bound} -> {'通过' if passed else '未通过'}")
        return passed

    def at_most(self, name: str, measured: float, bound: float) -> bool:
        return self._add(name, float(measured), {"max": bound}, np.isfinite(measured) and measured <= bound)

    def within(self, name: str, measured: float, lo: float, hi: float) -> bool:
        return self._add(name, float(measured), {"min": lo, "max": hi}, np.isfinite(measured) and lo <= measured <= hi)

    def relative_to(self, name: str, measured: float, reference: float, rtol: float) -> bool:
        """|measured − reference| <= rtol·|reference|"""
        ok = np.isfinite(measured) and abs(measured - reference) <= rtol * abs(reference)
        return self._add(name, float(measured), {"reference": reference, "rtol": rtol}, ok)

    def within_factor(self, name: str, measured: float, reference: float, factor: float) -> bool:
        """reference/factor <= measured <= reference·factor"""
        ok = np.isfinite(measured) and measured > 0 and reference / factor <= measured <= reference * factor
        return self._add(name, float(measured), {"reference": reference, "factor": factor}, ok)

    def monotone(self, name: str, values: Sequence[float], strict: bool = False) -> bool:
        diffs = np.diff(np.asarray(values, dtype=float))
        ok = bool(np.all(diffs > 0)) if strict else bool(np.all(diffs >= 0))
        return self._add(name, [float(v) for v in values], "strictly increasing" if strict else "non-decreasing", ok)

    def flag(self, name: str, measured: Any, passed: bool, bound: Any = True) -> bool:
        return self._add(name, measured, bound, passed)

    def to_payload(self) -> Dict[str, Any]:
        return {
            "experiment": self.experiment,
            "passed": self.passed,
            "note": FEM_NOTE,
            "criteria": [{"name": c.name, "measured": c.measured, "bound": c.bound,
                          "passed": c.passed, "provenance": c.provenance} for c in self.criteria],
        }

    def save_json(self, path: PathLike) -> Path:
        return write_json(path, self.to_payload())


# ---------------------------------------------------------------------------
# 绘图 (Agg 后端, SVG)
# ---------------------------------------------------------------------------

def _save(fig, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"图已保存: {path}")
    return path


def plot_curves(path: PathLike, curves: Mapping[str, Tuple[Sequence[float], Sequence[float]]],
                title: str = "", xlabel: str = "x", ylabel: str = "", logx: bool = False,
                logy: bool = False) -> Path:
    """折线图, curves 为 {标签: (x, y)}"""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label, (x, y) in curves.items():
        ax.plot(x, y, label=label, linewidth=1.2)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(curves) > 1:
        ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_table(path: PathLike, frame: pd.DataFrame, x: str, y: str, group: Optional[str] = None,
               title: str = "", logx: bool = False, logy: bool = False) -> Path:
    """按 group 分组绘制结果表的两列"""
    if group is None:
        curves = {y: (frame[x].to_numpy(), frame[y].to_numpy())}
    else:
        curves = {f"{group}={key:.4g}" if isinstance(key, float) else f"{group}={key}":
                  (part[x].to_numpy(), part[y].to_numpy()) for key, part in frame.groupby(group, sort=True)}
    return plot_curves(path, curves, title=title, xlabel=x, ylabel=y, logx=logx, logy=logy)


def plot_heatmaps(path: PathLike, maps: Mapping[str, np.ndarray], extent: Tuple[float, float, float, float],
                  title: str = "") -> Path:
    """灰度热图, 每个二维数组 (nx, ny) 一行"""
    fig, axes = plt.subplots(len(maps), 1, figsize=(6.4, 2.2 * len(maps)), squeeze=False)
    for ax, (label, values) in zip(axes[:, 0], maps.items()):
        image = ax.imshow(np.asarray(values).T, origin="lower", extent=extent, aspect="auto", cmap="gray_r")
        ax.set_title(label)
        fig.colorbar(image, ax=ax)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _save(fig, path)
