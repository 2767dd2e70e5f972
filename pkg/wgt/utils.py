import json
import logging
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import numpy as np
import pandas as pd

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def setup_logging(level: str = "info", log_file: Optional[str] = None) -> None:
    """按 WGT_LOG 约定配置日志"""
    handlers = [logging.StreamHandler()]
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(level=_LEVELS.get(level.lower(), logging.INFO), format=LOG_FORMAT,
                        handlers=handlers, force=True)


def uniform_grid(x_min: float, x_max: float, count: int) -> np.ndarray:
    """包含两端点的均匀网格"""
    if count < 2:
        raise ValueError("网格点数必须不少于2")
    return np.linspace(x_min, x_max, count)


def near_cutoff(k: Union[float, np.ndarray], guard: float) -> Union[bool, np.ndarray]:
    """k 到 {nπ, n>=1} 的距离是否小于 guard"""
    k = np.asarray(k, dtype=float)
    n = np.maximum(np.round(k / np.pi), 1.0)
    dist = np.abs(k - np.pi * n)
    result = dist < guard
    return bool(result) if result.ndim == 0 else result


def frequency_grid(k_min: float, k_max: float, count: int, guard: float = 0.0) -> np.ndarray:
    """[k_min, k_max] 上 count 个点(含端点), 去掉 nπ 保护带内的频率"""
    ks = uniform_grid(k_min, k_max, count)
    if guard > 0:
        ks = ks[~near_cutoff(ks, guard)]
    return ks


def trapezoid_weights(count: int, step: float) -> np.ndarray:
    """复合梯形公式权重"""
    w = np.full(count, step)
    w[0] = w[-1] = step / 2
    return w


def relative_l2(approx: np.ndarray, exact: np.ndarray) -> float:
    """相对L2误差"""
    denom = np.linalg.norm(exact)
    if denom == 0:
        return float(np.linalg.norm(approx))
    return float(np.linalg.norm(np.asarray(approx) - np.asarray(exact)) / denom)


def recursively_convert(obj: Any) -> Any:
    """把 numpy / pandas 对象转换为可JSON序列化的结构"""
    if isinstance(obj, pd.DataFrame):
        return obj.to_dict(orient="records")
    if isinstance(obj, np.ndarray):
        return [recursively_convert(item) for item in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (list, tuple)):
        return [recursively_convert(item) for item in obj]
    if isinstance(obj, dict):
        return {str(key): recursively_convert(value) for key, value in obj.items()}
    return obj


def write_json(path: Union[str, Path], payload: Any) -> Path:
    """写JSON(键排序, 输出可复现)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(recursively_convert(payload), fh, sort_keys=True, indent=2, ensure_ascii=False)
        fh.write("\n")
    return path


def read_json(path: Union[str, Path]) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def fit_loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """对数坐标下的最小二乘斜率"""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)
