"""
实验运行器: 正演数据生成、反演、条件数研究以及登记表中的复现实验
"""

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from wgt.core.defect_models import (
    BendParams,
    BendSequence,
    BumpProfiles,
    DefectDescriptor,
    InhomogeneityMap,
    bend_map,
    born_model_measurements,
    born_series_measurements,
    inhomogeneity_scattered_field,
)
from wgt.core.fdfd_solver import DiscretizationConfig, synthesize_measurements
from wgt.core.inversion import (
    ConditioningGrid,
    RegularizationConfig,
    band_top_study,
    conditioning_study,
    low_gap_study,
    recover_bend,
    recover_bump,
    recover_inhomogeneity,
    source_recovery,
    support_study,
)
from wgt.datasets import FrequencyDataset
from wgt.errors import ConfigError, DatasetError, GeometryError
from wgt.harness.reporting import AcceptanceReport, ResultTable, plot_curves, plot_heatmaps, plot_table
from wgt.models import (
    BendListModel,
    BendModel,
    ConditionStudyConfig,
    EllipseModel,
    ExperimentConfig,
    BumpModel,
    GridRule,
    LineGrid,
    QuarticPiece,
    defect_model,
)
from wgt.utils import fit_loglog_slope, read_json, relative_l2, write_json
from wgt.wgt_config import wgt_config as config

logger = logging.getLogger(__name__)

REGISTRY_PATH = Path(__file__).with_name("registry.json")
FORMATS = ("json", "csv", "both")


# ---------------------------------------------------------------------------
# 配置与输出
# ---------------------------------------------------------------------------

def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """读取并校验实验配置 (pydantic ValidationError 原样抛出)"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"配置文件不存在: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return ExperimentConfig.model_validate(payload)


def load_registry() -> Dict[str, Dict[str, Any]]:
    return read_json(REGISTRY_PATH)


@dataclass
class ResultsWriter:
    """所有输出文件都经由同一个写入器顺序写出"""
    out_dir: Path
    fmt: str = "both"
    written: List[Path] = field(default_factory=list)

    def __post_init__(self):
        if self.fmt not in FORMATS:
            raise ConfigError(f"未知的输出格式: {self.fmt} (可选 {FORMATS})")
        self.out_dir = Path(self.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def _record(self, path: Path) -> Path:
        self.written.append(path)
        return path

    def dataset(self, dataset: FrequencyDataset, stem: str = "dataset") -> List[Path]:
        paths = []
        if self.fmt in ("json", "both"):
            paths.append(self._record(dataset.save_json(self.path(f"{stem}.json"))))
        if self.fmt in ("csv", "both"):
            paths.append(self._record(dataset.save_csv(self.path(f"{stem}.csv"))))
        return paths

    def table(self, table: ResultTable, stem: str) -> List[Path]:
        paths = [self._record(table.save_csv(self.path(f"{stem}.csv")))]
        if self.fmt in ("json", "both"):
            paths.append(self._record(table.save_json(self.path(f"{stem}.json"))))
        return paths

    def json(self, payload: Any, name: str) -> Path:
        return self._record(write_json(self.path(name), payload))

    def plot(self, draw: Callable[[Path], Path], name: str) -> Path:
        return self._record(draw(self.path(name)))


def _output_dir(out: Optional[Union[str, Path]], cfg_dir: Optional[str], name: str) -> Path:
    if out is not None:
        return Path(out)
    if cfg_dir is not None:
        return Path(cfg_dir)
    return Path(config.OUTPUT_DIR) / name


# ---------------------------------------------------------------------------
# 正演
# ---------------------------------------------------------------------------

def generate_dataset(cfg: ExperimentConfig, jobs: Optional[int] = None) -> FrequencyDataset:
    """按配置的生成器合成数据"""
    ks = cfg.frequencies.frequencies()
    defect = cfg.build_defect()
    jobs = cfg.jobs if jobs is None else jobs
    if cfg.generator == "born-model":
        return born_model_measurements(defect, ks, cfg.n_modes, cfg.frequencies.guard)
    if cfg.generator == "born-series":
        return born_series_measurements(defect, ks, cfg.measure_x, cfg.n_modes, guard=cfg.frequencies.guard)
    return synthesize_measurements(defect, ks, cfg.measure_x, cfg.n_modes, cfg.discretization.build(),
                                   guard=cfg.frequencies.guard, jobs=jobs)


def cmd_forward(cfg: ExperimentConfig, out: Optional[Union[str, Path]] = None, fmt: str = "both",
                seed: Optional[int] = None, jobs: Optional[int] = None) -> List[Path]:
    """合成测量数据并写出 JSON/CSV"""
    start = time.time()
    writer = ResultsWriter(_output_dir(out, cfg.output_dir, cfg.id), fmt)
    logger.info(f"开始正演: {cfg.id} (生成器 {cfg.generator}, 缺陷 {cfg.defect_type})")
    dataset = generate_dataset(cfg, jobs)
    if cfg.noise_level > 0:
        dataset = dataset.with_noise(cfg.noise_level, seed if seed is not None else cfg.seed)
    dataset.validate(measured=True)
    paths = writer.dataset(dataset)

    # 写出后重新读取并校验
    for path in paths:
        FrequencyDataset.load(path).validate(measured=True)
    logger.info(f"正演完成: {len(dataset)} 条记录, 耗时 {time.time() - start:.1f}s")
    return paths


# ---------------------------------------------------------------------------
# 反演
# ---------------------------------------------------------------------------

def _normalized_kind(kind: Optional[str]) -> Optional[str]:
    return "bend" if kind == "bends" else kind


def _bend_errors(true: Sequence[BendParams], found: Sequence[BendParams]) -> pd.DataFrame:
    rows = []
    for i, (t, f) in enumerate(zip(sorted(true, key=lambda b: b.x_c), found)):
        rows.append({"bend": i, "x_c": f.x_c, "r": f.r, "theta": f.theta,
                     "err_x_c": abs(f.x_c - t.x_c) / abs(t.x_c),
                     "err_r": abs(f.r - t.r) / abs(t.r),
                     "err_theta": abs(abs(f.theta) - abs(t.theta)) / abs(t.theta)})
    return pd.DataFrame(rows, columns=["bend", "x_c", "r", "theta", "err_x_c", "err_r", "err_theta"])


def _bend_list(defect: Optional[DefectDescriptor]) -> List[BendParams]:
    if isinstance(defect, BendParams):
        return [defect]
    if isinstance(defect, BendSequence):
        return list(defect.bends)
    return []


def _outline(bends: Sequence[BendParams], x_max: float, count: int = 400) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    """依次施加各弯曲映射得到的上下壁曲线"""
    xs = np.linspace(0.0, x_max, count)
    curves = {}
    for label, y in (("y=0", 0.0), ("y=1", 1.0)):
        pts = []
        for x in xs:
            pts.append(_compose_bends(bends, x, y))
        pts = np.array(pts)
        curves[label] = (pts[:, 0], pts[:, 1])
    return curves


def _compose_bends(bends: Sequence[BendParams], x: float, y: float) -> Tuple[float, float]:
    # 每段弯曲之后的直段是一个刚体标架: 原点 (ox, oy), 转角 angle, 起点坐标 s0
    ox, oy, angle, s0 = 0.0, 0.0, 0.0, 0.0

    def place(px: float, py: float) -> Tuple[float, float]:
        c, s = np.cos(angle), np.sin(angle)
        return ox + c * px - s * py, oy + s * px + c * py

    for b in sorted(bends, key=lambda p: p.x_c):
        if x <= b.x_c:
            break
        local = BendParams(b.x_c - s0, b.r, b.theta)
        if x < b.x_end:
            px, py = place(*bend_map(local, x - s0, y))
            return float(px), float(py)
        ox, oy = place(*bend_map(local, b.x_end - s0, 0.0))
        angle -= b.theta
        s0 = b.x_end
    px, py = place(x - s0, y)
    return float(px), float(py)


def _centroid(m: InhomogeneityMap) -> Tuple[float, float]:
    weights = np.abs(m.values)
    total = weights.sum()
    if total == 0:
        return float("nan"), float("nan")
    X, Y = np.meshgrid(m.x, m.y, indexing="ij")
    return float((weights * X).sum() / total), float((weights * Y).sum() / total)


def _map_error(recovered: InhomogeneityMap, truth: InhomogeneityMap) -> float:
    X, Y = np.meshgrid(recovered.x, recovered.y, indexing="ij")
    return relative_l2(recovered.values, truth.evaluate(X, Y))


def _write_defect(writer: ResultsWriter, build: Callable[[], DefectDescriptor]) -> None:
    """重建结果按配置文件中 defect 的格式写出"""
    try:
        defect = build()
    except GeometryError as e:
        logger.warning(f"重建结果不是合法的缺陷描述, 未写出 defect.json: {str(e)}")
        return
    writer.json(defect_model(defect).model_dump(mode="json"), "defect.json")


def invert_dataset(dataset: FrequencyDataset, cfg: ExperimentConfig, writer: ResultsWriter,
                   jobs: int = 1) -> Dict[str, Any]:
    """按缺陷类型调用对应的重建流程, 写出结果、误差表与诊断图"""
    kind = _normalized_kind(dataset.defect_type) or _normalized_kind(cfg.defect_type)
    if kind is None:
        raise ConfigError("数据集与配置都没有给出缺陷类型")
    if dataset.defect_type and cfg.defect_type and _normalized_kind(dataset.defect_type) != _normalized_kind(cfg.defect_type):
        raise ConfigError(f"缺陷类型不一致: 数据集 {dataset.defect_type}, 配置 {cfg.defect_type}")
    if kind in ("bend", "bump") and 0 not in dataset.modes:
        raise DatasetError(f"{kind} 反演需要模态0数据, 数据集只有模态 {dataset.modes}")

    truth = cfg.build_defect()
    zero_data = bool(np.all(dataset.data == 0)) if len(dataset) else True
    if zero_data:
        logger.warning("数据全为0, 重建结果为平坦剖面")
    reg = cfg.inversion.build()
    summary: Dict[str, Any] = {"defect_type": kind, "provenance": dataset.provenance, "zero_data": zero_data}

    if kind == "bend":
        found = recover_bend(dataset, cfg.inversion.n_bends, tuple(cfg.inversion.bend_window))
        summary.update({"bends": [{"x_c": b.x_c, "r": b.r, "theta": b.theta} for b in found.bends],
                        "rectangles": found.rectangles, "residual": found.residual,
                        "low_confidence": found.low_confidence})
        if found.bends:
            _write_defect(writer, lambda: found.bends[0] if len(found.bends) == 1 else BendSequence(tuple(found.bends)))
        true_bends = _bend_list(truth)
        if true_bends and found.bends:
            errors = ResultTable(_bend_errors(true_bends, found.bends), "弯管参数相对误差", dataset.provenance)
            writer.table(errors, "errors")
            summary["errors"] = errors.frame.to_dict(orient="records")
        x_max = max([b.x_end for b in found.bends + true_bends] + [1.0]) + 2.0
        curves = {}
        for label, bends in (("true", true_bends), ("recovered", found.bends)):
            if bends:
                for wall, (x, y) in _outline(bends, x_max).items():
                    curves[f"{label} {wall}"] = (x, y)
        if curves:
            writer.plot(lambda p: plot_curves(p, curves, title="bend", xlabel="x", ylabel="y"), "reconstruction.svg")

    elif kind == "bump":
        if cfg.inversion.window is None:
            raise ConfigError("凸起反演需要 inversion.window")
        found = recover_bump(dataset, cfg.inversion.window.as_tuple(), reg)
        x = found.h.x
        frame = pd.DataFrame({"x": x, "h": found.h.samples.real, "g": found.g.samples.real})
        writer.table(ResultTable(frame, "凸起剖面重建", dataset.provenance), "profiles")
        summary.update({"partial": found.partial,
                        "iterations": {str(n): r.iterations for n, r in found.results.items()}})
        _write_defect(writer, lambda: BumpProfiles(found.g, found.h))
        curves = {"h recovered": (x, found.h.samples.real), "g recovered": (x, found.g.samples.real)}
        if isinstance(truth, BumpProfiles):
            h_true = truth.h.evaluate(x).real
            g_true = truth.g.evaluate(x).real
            summary["error_h"] = relative_l2(found.h.samples.real, h_true)
            summary["error_g"] = relative_l2(found.g.samples.real, g_true) if np.any(g_true) else None
            curves.update({"h true": (x, h_true), "g true": (x, g_true)})
            writer.table(ResultTable(pd.DataFrame([{"error_h": summary["error_h"], "error_g": summary["error_g"]}]),
                                     "凸起剖面相对误差", dataset.provenance), "errors")
        writer.plot(lambda p: plot_curves(p, curves, title="bump", xlabel="x"), "reconstruction.svg")

    elif kind == "inhomogeneity":
        if cfg.inversion.window is None:
            raise ConfigError("非均匀介质反演需要 inversion.window")
        found = recover_inhomogeneity(dataset, cfg.inversion.window.as_tuple(), cfg.inversion.modes, reg,
                                      ny=cfg.inversion.ny, jobs=jobs)
        m = found.map
        X, Y = np.meshgrid(m.x, m.y, indexing="ij")
        frame = pd.DataFrame({"x": X.ravel(), "y": Y.ravel(), "h": m.values.ravel()})
        writer.table(ResultTable(frame, "折射率扰动重建", dataset.provenance), "map")
        summary.update({"modes": sorted(found.results), "skipped": found.skipped, "centroid": _centroid(m)})
        _write_defect(writer, lambda: m)
        maps = {"recovered": m.values}
        if isinstance(truth, InhomogeneityMap):
            summary["error"] = _map_error(m, truth)
            cx, cy = _centroid(truth)
            summary["centroid_distance"] = float(np.hypot(summary["centroid"][0] - cx, summary["centroid"][1] - cy))
            maps = {"true": truth.evaluate(X, Y), "recovered": m.values}
            writer.table(ResultTable(pd.DataFrame([{"error": summary["error"],
                                                    "centroid_distance": summary["centroid_distance"]}]),
                                     "非均匀介质相对误差", dataset.provenance), "errors")
        extent = (m.x0, m.x_end, 0.0, 1.0)
        writer.plot(lambda p: plot_heatmaps(p, maps, extent, title="h"), "reconstruction.svg")
    else:
        raise ConfigError(f"未知的缺陷类型: {kind}")

    writer.json(summary, "result.json")
    return summary


def cmd_invert(dataset_path: Union[str, Path], cfg: ExperimentConfig, out: Optional[Union[str, Path]] = None,
               fmt: str = "both", jobs: Optional[int] = None) -> Dict[str, Any]:
    """读取数据集并重建缺陷"""
    dataset = FrequencyDataset.load(dataset_path)
    dataset.validate(measured=True)
    writer = ResultsWriter(_output_dir(out, cfg.output_dir, cfg.id), fmt)
    logger.info(f"开始反演: {dataset_path} ({len(dataset)} 条记录, 来源 {dataset.provenance})")
    return invert_dataset(dataset, cfg, writer, jobs=cfg.jobs if jobs is None else jobs)


# ---------------------------------------------------------------------------
# 条件数研究
# ---------------------------------------------------------------------------

def cmd_condition_study(study: ConditionStudyConfig, out: Optional[Union[str, Path]] = None,
                        fmt: str = "both") -> ResultTable:
    """cond(M Mᴴ) 表与对数坐标图"""
    writer = ResultsWriter(_output_dir(out, None, study.id), fmt)
    frame = conditioning_study(study.r_values, study.omega0_values,
                               ConditioningGrid(study.points_per_unit, study.fft_size))
    table = ResultTable(frame, "Condition number of M M^H versus r and omega0", "condition study")
    writer.table(table, "condition_numbers")
    if len(frame):
        writer.plot(lambda p: plot_table(p, frame, "r", "cond", group="omega0", title="cond", logy=True),
                    "condition_numbers.svg")
    return table


# ---------------------------------------------------------------------------
# 登记表复现
# ---------------------------------------------------------------------------

def parabola(start: float, end: float) -> Callable[[np.ndarray], np.ndarray]:
    """(x−start)(end−x)·1_{[start,end]}"""
    def f(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where((x >= start) & (x <= end), (x - start) * (end - x), 0.0)
    return f


def _fdfd_config(params: Dict[str, Any], x_end: float) -> DiscretizationConfig:
    d = params["discretization"]
    return DiscretizationConfig(dx=d["dx"], dy=d["dy"], x_left=-d["padding"], x_right=x_end + d["padding"],
                                pml_left=d["pml"], pml_right=d["pml"], source_x=0.0)


def _run_source_highband(params, acceptance, writer: ResultsWriter, report: AcceptanceReport, jobs: int) -> None:
    f = parabola(*params["source"])
    k_min, k_max, count = params["band"]
    cfg = RegularizationConfig(lam=params["lam"])
    result, error = source_recovery(f, tuple(params["source"]), np.linspace(k_min, k_max, count),
                                    tuple(params["window"]), cfg)
    x = result.y.x
    writer.table(ResultTable(pd.DataFrame({"x": x, "recovered": result.profile, "exact": f(x)}),
                             "source reconstruction", report.provenance), "profile")
    writer.plot(lambda p: plot_curves(p, {"exact": (x, f(x)), "recovered": (x, result.profile)},
                                      title="f", xlabel="x"), "reconstruction.svg")
    report.at_most("relative L2 error", error, acceptance["max_relative_error"])


def _run_source_slope(params, acceptance, writer, report, jobs) -> None:
    f = parabola(*params["source"])
    cfg = RegularizationConfig(lam=params["lam"])
    frame, slope = band_top_study(f, tuple(params["source"]), params["omega1"], tuple(params["window"]), cfg,
                                  omega_min=params["omega_min"], omega_count=params["omega_count"],
                                  x_per_omega=params["x_per_omega"])
    writer.table(ResultTable(frame, "error versus omega1", report.provenance), "error_vs_omega1")
    writer.plot(lambda p: plot_table(p, frame, "omega1", "error", title=f"slope {slope:.3f}", logx=True, logy=True),
                "error_vs_omega1.svg")
    lo, hi = acceptance["slope"]
    report.within("log-log slope", slope, lo, hi)


def _run_condition(params, acceptance, writer, report, jobs) -> None:
    r_start, r_stop, r_count = params["r"]
    radii = [float(r) for r in np.round(np.linspace(r_start, r_stop, r_count), 10)]
    omega0 = [m * np.pi for m in params["omega0_multiples"]]
    grid = ConditioningGrid(params["points_per_unit"], params["fft_size"])
    frame = conditioning_study(radii, omega0, grid)
    writer.table(ResultTable(frame, "condition numbers", report.provenance), "condition_numbers")
    writer.plot(lambda p: plot_table(p, frame, "r", "cond", group="omega0", title="cond", logy=True),
                "condition_numbers.svg")

    small = acceptance["spot_small"]
    large = acceptance["spot_large"]
    for spot, check in ((small, "rtol"), (large, "factor")):
        row = conditioning_study([spot["r"]], [spot["omega0_multiple"] * np.pi], grid).iloc[0]
        name = f"cond(r={spot['r']}, omega0={spot['omega0_multiple']}pi)"
        if check == "rtol":
            report.relative_to(name, row["cond"], spot["reference"], spot["rtol"])
        else:
            report.within_factor(name, row["cond"], spot["reference"], spot["factor"])
    for w0, part in frame.groupby("omega0", sort=True):
        report.monotone(f"monotone in r (omega0={w0:.4f})", part.sort_values("r")["cond"].to_numpy())


def _run_source_lowgap(params, acceptance, writer, report, jobs) -> None:
    f = parabola(*params["source"])
    cfg = RegularizationConfig(lam=params["lam"])
    omega0 = [m * np.pi for m in params["omega0_multiples"]]
    frame = low_gap_study(f, tuple(params["source"]), omega0, tuple(params["window"]), cfg,
                          omega1=params["omega1"], omega_count=params["omega_count"])
    writer.table(ResultTable(frame, "error versus omega0", report.provenance), "error_vs_omega0")
    writer.plot(lambda p: plot_table(p, frame, "omega0", "error", title="low-frequency gap", logy=True),
                "error_vs_omega0.svg")
    report.monotone("error non-decreasing in omega0", frame["error"].to_numpy())


def _run_source_support(params, acceptance, writer, report, jobs) -> None:
    cfg = RegularizationConfig(lam=params["lam"])
    frame = support_study(params["radii"], params["omega0_multiple"] * np.pi, cfg, omega1=params["omega1"],
                          omega_count=params["omega_count"])
    writer.table(ResultTable(frame, "error versus support radius", report.provenance), "error_vs_r")
    writer.plot(lambda p: plot_table(p, frame, "r", "error", title="support size", logy=True), "error_vs_r.svg")
    report.monotone("error non-decreasing in r", frame["error"].to_numpy())


def _bend_experiment(bends: List[BendParams], params, jobs) -> FrequencyDataset:
    rule = GridRule(**params["frequencies"])
    defect = bends[0] if len(bends) == 1 else BendSequence(tuple(bends))
    x_end = max(b.x_end for b in bends)
    return synthesize_measurements(defect, rule.frequencies(), params["measure_x"], 0,
                                   _fdfd_config(params, x_end), guard=rule.guard, jobs=jobs)


def _run_bend_table(params, acceptance, writer, report, jobs) -> None:
    rows = []
    for i, case in enumerate(params["cases"]):
        bend = BendParams(case["x_c"], case["r"], case["theta"])
        data = _bend_experiment([bend], params, jobs)
        writer.dataset(data, f"dataset_case{i}")
        found = recover_bend(data, 1, tuple(params["bend_window"]))
        if not found.bends:
            report.flag(f"case {i}: bend recovered", False, False)
            continue
        err = _bend_errors([bend], found.bends).iloc[0]
        rows.append({"case": i, "x_c": case["x_c"], "r": case["r"], "theta": case["theta"],
                     "err_x_c": err["err_x_c"], "err_r": err["err_r"], "err_theta": err["err_theta"],
                     "residual": found.residual})
        for name, value, bound in zip(("x_c", "r", "theta"), (err["err_x_c"], err["err_r"], err["err_theta"]),
                                      case["bounds"]):
            report.at_most(f"case {i}: relative error on {name}", value, bound)

        # 闭式模型数据的一致性回路
        model = born_model_measurements(bend, GridRule(**params["frequencies"]).frequencies())
        found_model = recover_bend(model, 1, tuple(params["bend_window"]))
        if found_model.bends:
            e = _bend_errors([bend], found_model.bends).iloc[0]
            worst = float(max(e["err_x_c"], e["err_r"], e["err_theta"]))
        else:
            worst = float("inf")
        report.at_most(f"case {i}: model-consistent round trip", worst, acceptance["model_consistent"])

    frame = pd.DataFrame(rows, columns=["case", "x_c", "r", "theta", "err_x_c", "err_r", "err_theta", "residual"])
    writer.table(ResultTable(frame, "Relative errors on (x_c, r, theta)", report.provenance), "bend_errors")


def _run_bend_figure(params, acceptance, writer, report, jobs) -> None:
    bends = [BendModel(**b).build() for b in params["bends"]]
    data = _bend_experiment(bends, params, jobs)
    writer.dataset(data)
    cfg = ExperimentConfig(id=report.experiment, frequencies=GridRule(**params["frequencies"]),
                           defect=(BendModel(**params["bends"][0]) if len(bends) == 1
                                   else BendListModel(bends=[BendModel(**b) for b in params["bends"]])))
    cfg.inversion.n_bends = len(bends)
    cfg.inversion.bend_window = tuple(params["bend_window"])
    summary = invert_dataset(data, cfg, writer, jobs)
    recovered = summary.get("bends", [])
    report.flag("number of bends recovered", len(recovered), len(recovered) == len(bends), len(bends))
    for row in summary.get("errors", []):
        worst = max(row["err_x_c"], row["err_r"], row["err_theta"])
        report.at_most(f"bend {row['bend']}: worst relative error", worst, acceptance["max_relative_error"])


def _bump_defect(params, h_pieces, g_pieces) -> BumpProfiles:
    grid = params["profile_grid"]
    return BumpModel(grid=LineGrid(x_min=grid[0], x_max=grid[1], count=grid[2]),
                     h=[QuarticPiece(**p) for p in h_pieces], g=[QuarticPiece(**p) for p in g_pieces]).build()


def _bump_run(bump: BumpProfiles, params, jobs):
    rule = GridRule(**params["frequencies"])
    support_end = bump.h.x_end
    data = synthesize_measurements(bump, rule.frequencies(), params["measure_x"], 1,
                                   _fdfd_config(params, support_end), guard=rule.guard, jobs=jobs)
    found = recover_bump(data, tuple(params["window"]), RegularizationConfig(lam=params["lam"]))
    return data, found


def _run_bump_table(params, acceptance, writer, report, jobs) -> None:
    a, b = params["support"]
    rows = []
    for amplitude, reference in zip(params["amplitudes"], acceptance["reference"]):
        bump = _bump_defect(params, [{"amplitude": amplitude, "start": a, "end": b}], [])
        data, found = _bump_run(bump, params, jobs)
        writer.dataset(data, f"dataset_A{amplitude}")
        x = found.h.x
        error = relative_l2(found.h.samples.real, bump.h.evaluate(x).real)
        rows.append({"A": amplitude, "error_h": error, "reference": reference})
        report.within_factor(f"A={amplitude}: relative error on h", error, reference, acceptance["factor"])
    frame = pd.DataFrame(rows, columns=["A", "error_h", "reference"])
    writer.table(ResultTable(frame, "Relative errors for different amplitudes A", report.provenance), "bump_errors")
    writer.plot(lambda p: plot_table(p, frame, "A", "error_h", title="error versus A"), "bump_errors.svg")
    report.monotone("error strictly increasing in A", frame["error_h"].to_numpy(), strict=True)


def _run_bump_figure(params, acceptance, writer, report, jobs) -> None:
    bump = _bump_defect(params, params["h"], params["g"])
    data, found = _bump_run(bump, params, jobs)
    writer.dataset(data)
    x = found.h.x
    h_true, g_true = bump.h.evaluate(x).real, bump.g.evaluate(x).real
    error_h = relative_l2(found.h.samples.real, h_true)
    error_g = relative_l2(found.g.samples.real, g_true)
    frame = pd.DataFrame({"x": x, "h": found.h.samples.real, "g": found.g.samples.real,
                          "h_true": h_true, "g_true": g_true})
    writer.table(ResultTable(frame, "bump profiles", report.provenance), "profiles")
    writer.plot(lambda p: plot_curves(p, {"h true": (x, h_true), "h recovered": (x, found.h.samples.real),
                                          "g true": (x, g_true), "g recovered": (x, found.g.samples.real)},
                                      title="bump", xlabel="x"), "reconstruction.svg")
    report.flag("mode-1 data available", not found.partial, not found.partial)
    report.at_most("relative L2 error on h", error_h, acceptance["max_relative_error_h"])
    report.flag("relative L2 error on g", error_g, True, "reported")


def _inhomogeneity_data(params) -> Tuple[InhomogeneityMap, FrequencyDataset]:
    truth = EllipseModel(**params["ellipse"]).build()
    rule = GridRule(**params["frequencies"])
    data = born_series_measurements(truth, rule.frequencies(), params["measure_x"], params["modes"],
                                    guard=rule.guard)
    return truth, data


def _run_inhomogeneity_modes(params, acceptance, writer, report, jobs) -> None:
    truth, data = _inhomogeneity_data(params)
    writer.dataset(data)
    N = params["modes"]
    found = recover_inhomogeneity(data, tuple(params["window"]), N, RegularizationConfig(lam=params["lam"]),
                                  jobs=jobs)
    x = np.linspace(*params["window"])
    Xg, Yg = np.meshgrid(x, truth.y, indexing="ij")
    exact = InhomogeneityMap(truth.evaluate(Xg, Yg), x[0], x[1] - x[0]).modal_components(N)
    rows, curves = [], {}
    for n in range(N + 1):
        if n in found.results:
            rec = found.results[n].profile
            rows.append({"mode": n, "error": relative_l2(rec, exact[n])})
            if n < 4:
                curves[f"h_{n} recovered"] = (x, rec)
                curves[f"h_{n} true"] = (x, exact[n])
    frame = pd.DataFrame(rows, columns=["mode", "error"])
    writer.table(ResultTable(frame, "modal component errors", report.provenance), "mode_errors")
    writer.plot(lambda p: plot_curves(p, curves, title="h_n", xlabel="x"), "modes.svg")
    err0 = float(frame.loc[frame["mode"] == 0, "error"].iloc[0]) if (frame["mode"] == 0).any() else float("inf")
    report.at_most("relative L2 error on h_0", err0, acceptance["max_relative_error_h0"])

    # Born 近似误差随扰动幅值的一阶标度
    check = params["born_check"]
    shape = EllipseModel(**check["ellipse"]).build()
    ratios = []
    for amplitude in check["amplitudes"]:
        m = InhomogeneityMap(amplitude * shape.values, shape.x0, shape.dx)
        w = inhomogeneity_scattered_field(m, check["k"], check["modes"]).field
        v = inhomogeneity_scattered_field(m, check["k"], check["modes"], multiple=False).field
        ratios.append(relative_l2(w.values, v.values))
    born = pd.DataFrame({"amplitude": check["amplitudes"], "ratio": ratios})
    writer.table(ResultTable(born, "Born approximation error", report.provenance), "born_validity")
    lo, hi = acceptance["born_slope"]
    report.within("Born error slope in amplitude", fit_loglog_slope(check["amplitudes"], ratios), lo, hi)


def _run_inhomogeneity_map(params, acceptance, writer, report, jobs) -> None:
    truth, data = _inhomogeneity_data(params)
    writer.dataset(data)
    window = tuple(params["window"])
    N = params["modes"]
    plain = recover_inhomogeneity(data, window, N, RegularizationConfig(lam=params["lam"]), jobs=jobs)
    results = {"unconstrained": plain.map}
    if params.get("positivity"):
        projected = recover_inhomogeneity(data, window, N, RegularizationConfig(lam=params["lam"], positivity=True))
        results["positivity"] = projected.map
    X, Y = np.meshgrid(plain.map.x, plain.map.y, indexing="ij")
    maps = {"true": truth.evaluate(X, Y)}
    rows = []
    true_centroid = _centroid(truth)
    for label, m in results.items():
        maps[label] = m.values
        cx, cy = _centroid(m)
        rows.append({"variant": label, "error": _map_error(m, truth), "centroid_x": cx, "centroid_y": cy,
                     "centroid_distance": float(np.hypot(cx - true_centroid[0], cy - true_centroid[1]))})
    frame = pd.DataFrame(rows, columns=["variant", "error", "centroid_x", "centroid_y", "centroid_distance"])
    writer.table(ResultTable(frame, "inhomogeneity reconstruction", report.provenance), "errors")
    writer.plot(lambda p: plot_heatmaps(p, maps, (plain.map.x0, plain.map.x_end, 0.0, 1.0), title="h"),
                "reconstruction.svg")
    report.flag("dropped frequencies (Born series diverged)", len(data.meta.get("diverged_k", [])), True, "reported")

    first = frame.iloc[0]
    if "max_relative_error" in acceptance:
        report.at_most("relative L2 error", first["error"], acceptance["max_relative_error"])
    if "max_centroid_distance" in acceptance:
        report.at_most("centroid distance", first["centroid_distance"], acceptance["max_centroid_distance"])
    if acceptance.get("projected_not_worse") and len(frame) > 1:
        report.at_most("projected error minus unconstrained error", frame.iloc[1]["error"] - first["error"], 0.0)


RUNNERS: Dict[str, Callable] = {
    "source_highband": _run_source_highband,
    "source_slope": _run_source_slope,
    "condition": _run_condition,
    "source_lowgap": _run_source_lowgap,
    "source_support": _run_source_support,
    "bend_table": _run_bend_table,
    "bend_figure": _run_bend_figure,
    "bump_table": _run_bump_table,
    "bump_figure": _run_bump_figure,
    "inhomogeneity_modes": _run_inhomogeneity_modes,
    "inhomogeneity_map": _run_inhomogeneity_map,
}

PROVENANCE = {
    "source_highband": "synthetic Γ data (quadrature)",
    "source_slope": "synthetic Γ data (quadrature)",
    "condition": "closed-form Gram matrix",
    "source_lowgap": "synthetic Γ data (quadrature)",
    "source_support": "synthetic Γ data (quadrature)",
    "bend_table": "fdfd",
    "bend_figure": "fdfd",
    "bump_table": "fdfd",
    "bump_figure": "fdfd",
    "inhomogeneity_modes": "born-series",
    "inhomogeneity_map": "born-series",
}


def cmd_reproduce(experiment_id: str, out: Optional[Union[str, Path]] = None, fmt: str = "both",
                  jobs: Optional[int] = None) -> AcceptanceReport:
    """按登记表运行一个图/表的完整流程并生成验收报告"""
    registry = load_registry()
    if experiment_id not in registry:
        raise ConfigError(f"未知的实验编号 {experiment_id}, 可选: {', '.join(sorted(registry))}")
    entry = registry[experiment_id]
    runner = RUNNERS[entry["runner"]]
    jobs = config.JOBS if jobs is None else jobs
    writer = ResultsWriter(_output_dir(out, None, experiment_id), fmt)
    report = AcceptanceReport(experiment_id, PROVENANCE[entry["runner"]])

    start = time.time()
    logger.info(f"开始复现 {experiment_id}: {entry['caption']}")
    runner(entry["params"], entry["acceptance"], writer, report, jobs)
    writer.json(report.to_payload(), "acceptance.json")
    logger.info(f"复现完成 {experiment_id}: {'通过' if report.passed else '未通过'}, 耗时 {time.time() - start:.1f}s")
    return report


def registry_ids() -> List[str]:
    return sorted(load_registry())


# ---------------------------------------------------------------------------
# 配置校验与模式导出
# ---------------------------------------------------------------------------

def validate_config(path: Union[str, Path]) -> Union[ExperimentConfig, ConditionStudyConfig]:
    """校验实验配置或条件数研究配置, 失败时抛出 pydantic ValidationError"""
    payload = read_json(path)
    if isinstance(payload, dict) and "r_values" in payload:
        cfg = ConditionStudyConfig.model_validate(payload)
    else:
        cfg = ExperimentConfig.model_validate(payload)
    logger.info(f"配置校验通过: {path} ({type(cfg).__name__})")
    return cfg


def write_schema(path: Union[str, Path]) -> Path:
    """导出实验配置的 JSON Schema"""
    path = write_json(path, ExperimentConfig.model_json_schema())
    logger.info(f"配置模式已写出: {path}")
    return path
