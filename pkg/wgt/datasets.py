"""
频率数据集: (模态 n, 频率 k, 空间频率 ω, 复数据) 记录的集合
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from wgt.errors import DatasetError
from wgt.utils import write_json

logger = logging.getLogger(__name__)

COLUMNS = ["mode", "k", "omega", "re", "im"]
PROVENANCES = ("fdfd", "born-model", "born-series", "external")


class FrequencyDataset:
    """反演的输入数据"""

    def __init__(self, records: pd.DataFrame, provenance: str = "external",
                 defect_type: Optional[str] = None, meta: Optional[Dict[str, Any]] = None):
        if provenance not in PROVENANCES:
            raise DatasetError(f"未知的数据来源标签: {provenance}")
        missing = [c for c in COLUMNS if c not in records.columns]
        if missing:
            raise DatasetError(f"数据集缺少列: {missing}")
        frame = records[COLUMNS].copy()
        frame["mode"] = frame["mode"].astype(int)
        for col in COLUMNS[1:]:
            frame[col] = frame[col].astype(float)
        self.records = frame.sort_values(["mode", "omega"], kind="mergesort").reset_index(drop=True)
        self.provenance = provenance
        self.defect_type = defect_type
        self.meta = dict(meta or {})

    @classmethod
    def from_triples(cls, rows: Iterable[Tuple[int, float, float, complex]], provenance: str = "external",
                     defect_type: Optional[str] = None, meta: Optional[Dict[str, Any]] = None) -> "FrequencyDataset":
        """由 (n, k, ω, datum) 构造"""
        data = [{"mode": int(n), "k": float(k), "omega": float(w), "re": complex(d).real, "im": complex(d).imag}
                for n, k, w, d in rows]
        frame = pd.DataFrame(data, columns=COLUMNS)
        return cls(frame, provenance, defect_type, meta)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def modes(self) -> List[int]:
        return sorted(int(n) for n in self.records["mode"].unique())

    @property
    def data(self) -> np.ndarray:
        return self.records["re"].to_numpy() + 1j * self.records["im"].to_numpy()

    def for_mode(self, n: int) -> pd.DataFrame:
        """单个模态的记录, 按 ω 升序"""
        return self.records[self.records["mode"] == n].reset_index(drop=True)

    def mode_arrays(self, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """返回 (k, ω, datum)"""
        frame = self.for_mode(n)
        return (frame["k"].to_numpy(), frame["omega"].to_numpy(),
                frame["re"].to_numpy() + 1j * frame["im"].to_numpy())

    def validate(self, measured: bool = True) -> None:
        """检查数据集不变量"""
        if not np.all(np.isfinite(self.records[COLUMNS[1:]].to_numpy())):
            raise DatasetError("数据集包含非有限值")
        for n in self.modes:
            frame = self.for_mode(n)
            if n < 0:
                raise DatasetError(f"模态编号必须非负: {n}")
            if np.any(np.diff(frame["omega"].to_numpy()) <= 0):
                raise DatasetError(f"模态 {n} 的 ω 必须严格递增")
            if np.any(frame["omega"].to_numpy() <= 0):
                raise DatasetError(f"模态 {n} 的 ω 必须为正")
            if measured and np.any(frame["k"].to_numpy() <= n * np.pi):
                raise DatasetError(f"模态 {n} 存在低于截止频率 {n}π 的记录")
            if measured and np.any(frame["omega"].to_numpy() <= n * np.pi):
                raise DatasetError(f"模态 {n} 存在 ω <= {n}π 的记录")

    def with_noise(self, level: float, seed: Optional[int] = None) -> "FrequencyDataset":
        """加入相对均方根为 level 的复高斯噪声"""
        if level <= 0:
            return FrequencyDataset(self.records, self.provenance, self.defect_type, self.meta)
        rng = np.random.default_rng(seed)
        data = self.data
        rms = np.sqrt(np.mean(np.abs(data) ** 2)) if data.size else 0.0
        noise = (rng.standard_normal(data.size) + 1j * rng.standard_normal(data.size)) / np.sqrt(2.0)
        noisy = data + level * rms * noise
        frame = self.records.copy()
        frame["re"], frame["im"] = noisy.real, noisy.imag
        meta = dict(self.meta, noise_level=level, noise_seed=seed)
        logger.info(f"加入噪声: 相对水平 {level}, 种子 {seed}")
        return FrequencyDataset(frame, self.provenance, self.defect_type, meta)

    # -----------------------------------------------------------------
    # 序列化
    # -----------------------------------------------------------------

    def to_payload(self) -> Dict[str, Any]:
        return {
            "provenance": self.provenance,
            "defect_type": self.defect_type,
            "meta": self.meta,
            "records": self.records.to_dict(orient="records"),
        }

    def save_json(self, path: Union[str, Path]) -> Path:
        path = write_json(path, self.to_payload())
        logger.info(f"数据集已保存: {path} ({len(self)} 条记录)")
        return path

    def save_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.records.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        logger.info(f"数据集已保存: {path} ({len(self)} 条记录)")
        return path

    @classmethod
    def load(cls, path: Union[str, Path], provenance: Optional[str] = None) -> "FrequencyDataset":
        """读取 JSON 或 CSV 数据集"""
        path = Path(path)
        if not path.exists():
            raise DatasetError(f"数据集文件不存在: {path}")
        try:
            if path.suffix.lower() == ".csv":
                frame = pd.read_csv(path)
                dataset = cls(frame, provenance or "external")
            else:
                with open(path, "r", encoding="utf-8") as fh:
                    payload = json.load(fh)
                if isinstance(payload, list):
                    dataset = cls(pd.DataFrame(payload, columns=COLUMNS), provenance or "external")
                else:
                    dataset = cls(pd.DataFrame(payload.get("records", []), columns=COLUMNS),
                                  provenance or payload.get("provenance", "external"),
                                  payload.get("defect_type"), payload.get("meta"))
        except (ValueError, KeyError, json.JSONDecodeError) as e:
            if isinstance(e, DatasetError):
                raise
            raise DatasetError(f"无法解析数据集 {path}: {str(e)}") from e
        logger.info(f"已加载数据集: {path} ({len(dataset)} 条记录, 来源 {dataset.provenance})")
        return dataset
