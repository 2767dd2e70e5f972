"""实验运行器、验收报告与命令行测试"""
from __future__ import annotations

import json

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

import wgt.cli as cli
from wgt.datasets import FrequencyDataset
from wgt.errors import ConfigError, SolverError
from wgt.harness.experiments import (
    ResultsWriter,
    cmd_condition_study,
    cmd_forward,
    cmd_invert,
    cmd_reproduce,
    load_config,
    registry_ids,
    validate_config,
    write_schema,
)
from wgt.harness.reporting import AcceptanceReport, ResultTable, plot_curves
from wgt.models import ConditionStudyConfig, ExperimentConfig


def _bend_payload() -> dict:
    return {
        "id": "bend-unit",
        "defect": {"type": "bend", "x_c": 2.0, "r": 10.0, "theta": 0.1},
        "frequencies": {"k_min": 0.5, "k_max": 10.0, "count": 40},
        "generator": "born-model",
        "inversion": {"n_bends": 1, "bend_window": [0.0, 5.0]},
    }


@pytest.fixture
def bend_config_path(tmp_path):
    path = tmp_path / "bend.json"
    path.write_text(json.dumps(_bend_payload()), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# 验收报告与结果表
# ---------------------------------------------------------------------------
class TestAcceptanceReport:

    def test_criteria(self):
        report = AcceptanceReport("unit", "born-model")
        assert report.at_most("error", 0.01, 0.05)
        assert report.within("slope", -1.0, -1.4, -0.6)
        assert report.relative_to("cond", 1.021, 1.0202, 1e-2)
        assert report.within_factor("cond large", 3e6, 7e6, 10.0)
        assert report.monotone("growth", [1.0, 1.0, 2.0])
        assert report.passed

    def test_failures(self):
        report = AcceptanceReport("unit")
        assert not report.at_most("error", float("nan"), 1.0)
        assert not report.monotone("growth", [1.0, 1.0, 2.0], strict=True)
        assert not report.within_factor("cond", -1.0, 1.0, 2.0)
        assert not report.passed

    def test_payload(self, tmp_path):
        report = AcceptanceReport("unit", "fdfd")
        report.flag("converged", True, True)
        payload = json.loads(report.save_json(tmp_path / "acceptance.json").read_text(encoding="utf-8"))
        assert payload["passed"] is True
        assert payload["note"]
        assert payload["criteria"][0]["provenance"] == "fdfd"


class TestResultsWriter:

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ConfigError):
            ResultsWriter(tmp_path, "xml")

    def test_table_formats(self, tmp_path):
        table = ResultTable(pd.DataFrame({"r": [0.1, 0.2], "cond": [1.5, 3.0]}), "cond", "unit")
        csv_only = ResultsWriter(tmp_path / "csv", "csv").table(table, "t")
        both = ResultsWriter(tmp_path / "both", "both").table(table, "t")
        assert [p.suffix for p in csv_only] == [".csv"]
        assert [p.suffix for p in both] == [".csv", ".json"]

    def test_plot_is_reproducible(self, tmp_path):
        x = np.linspace(0.0, 1.0, 50)
        curves = {"sin": (x, np.sin(x)), "cos": (x, np.cos(x))}
        a = plot_curves(tmp_path / "a.svg", curves, title="t")
        b = plot_curves(tmp_path / "b.svg", curves, title="t")
        assert a.read_bytes() == b.read_bytes()


# ---------------------------------------------------------------------------
# 正演与反演
# ---------------------------------------------------------------------------
class TestForwardInvert:

    def test_forward_writes_datasets(self, bend_config_path, tmp_path):
        cfg = load_config(bend_config_path)
        paths = cmd_forward(cfg, tmp_path / "out", "both")
        assert sorted(p.name for p in paths) == ["dataset.csv", "dataset.json"]
        assert all(p.exists() for p in paths)

    def test_forward_is_byte_reproducible(self, bend_config_path, tmp_path):
        cfg = load_config(bend_config_path)
        first = cmd_forward(cfg, tmp_path / "a", "both")
        second = cmd_forward(cfg, tmp_path / "b", "both")
        for a, b in zip(first, second):
            assert a.read_bytes() == b.read_bytes()

    def test_noise_seed(self, tmp_path):
        cfg = ExperimentConfig.model_validate(dict(_bend_payload(), noise_level=0.05))
        a = cmd_forward(cfg, tmp_path / "a", "json", seed=3)[0].read_bytes()
        b = cmd_forward(cfg, tmp_path / "b", "json", seed=3)[0].read_bytes()
        c = cmd_forward(cfg, tmp_path / "c", "json", seed=4)[0].read_bytes()
        assert a == b
        assert a != c

    def test_invert_bend(self, bend_config_path, tmp_path):
        cfg = load_config(bend_config_path)
        dataset_path = cmd_forward(cfg, tmp_path / "data", "json")[0]
        summary = cmd_invert(dataset_path, cfg, tmp_path / "inv", "both")
        assert summary["defect_type"] == "bend"
        assert summary["provenance"] == "born-model"
        assert len(summary["bends"]) == 1
        errors = summary["errors"][0]
        assert max(errors["err_x_c"], errors["err_r"], errors["err_theta"]) < 1e-2
        assert (tmp_path / "inv" / "result.json").exists()
        assert (tmp_path / "inv" / "reconstruction.svg").exists()
        recovered = json.loads((tmp_path / "inv" / "defect.json").read_text(encoding="utf-8"))
        rebuilt = ExperimentConfig.model_validate(dict(_bend_payload(), defect=recovered)).build_defect()
        assert rebuilt.r == pytest.approx(summary["bends"][0]["r"])

    def test_invert_zero_data_is_flagged(self, bend_config_path, tmp_path):
        rows = [(0, k, 2.0 * k, 0.0) for k in np.linspace(0.5, 10.0, 20)]
        zeros = FrequencyDataset.from_triples(rows, provenance="fdfd", defect_type="bend")
        path = zeros.save_json(tmp_path / "zeros.json")
        summary = cmd_invert(path, load_config(bend_config_path), tmp_path / "inv", "json")
        assert summary["zero_data"]
        assert summary["bends"] == []
        assert summary["low_confidence"]

    def test_missing_config(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.json")


class TestConditionStudy:

    def test_small_study(self, tmp_path):
        study = ConditionStudyConfig(r_values=[0.02, 0.05], omega0_values=[np.pi])
        table = cmd_condition_study(study, tmp_path, "both")
        assert len(table) == 2
        assert table.columns == ["r", "omega0", "cond", "singular"]
        for name in ("condition_numbers.csv", "condition_numbers.json", "condition_numbers.svg"):
            assert (tmp_path / name).exists()

    def test_empty_gap_list(self, tmp_path):
        table = cmd_condition_study(ConditionStudyConfig(r_values=[0.1], omega0_values=[]), tmp_path, "csv")
        assert len(table) == 0
        assert not (tmp_path / "condition_numbers.svg").exists()


# ---------------------------------------------------------------------------
# 登记表与配置校验
# ---------------------------------------------------------------------------
class TestRegistry:

    def test_ids(self):
        ids = registry_ids()
        assert len(ids) == 13
        assert "fig-condnum" in ids and "tab-bend" in ids

    def test_unknown_id(self, tmp_path):
        with pytest.raises(ConfigError):
            cmd_reproduce("fig-unknown", tmp_path)

    def test_validate_config(self, bend_config_path, tmp_path):
        assert isinstance(validate_config(bend_config_path), ExperimentConfig)
        study = tmp_path / "study.json"
        study.write_text(json.dumps({"r_values": [0.1], "omega0_values": [3.0]}), encoding="utf-8")
        assert isinstance(validate_config(study), ConditionStudyConfig)

    def test_validate_rejects_unknown_field(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(dict(_bend_payload(), extra=1)), encoding="utf-8")
        with pytest.raises(ValidationError):
            validate_config(path)

    def test_schema(self, tmp_path):
        schema = json.loads(write_schema(tmp_path / "schema.json").read_text(encoding="utf-8"))
        assert "frequencies" in schema["properties"]


# ---------------------------------------------------------------------------
# 命令行退出码
# ---------------------------------------------------------------------------
class TestCli:

    def test_validate_ok(self, bend_config_path):
        assert cli.main(["validate", "--config", str(bend_config_path)]) == cli.EXIT_OK

    def test_forward_ok(self, bend_config_path, tmp_path):
        out = tmp_path / "out"
        assert cli.main(["forward", "--config", str(bend_config_path), "--out", str(out)]) == cli.EXIT_OK
        assert (out / "dataset.json").exists()

    def test_missing_config(self, tmp_path):
        assert cli.main(["forward", "--config", str(tmp_path / "absent.json")]) == cli.EXIT_VALIDATION

    def test_invalid_config(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(dict(_bend_payload(), generator="born-series")), encoding="utf-8")
        assert cli.main(["validate", "--config", str(path)]) == cli.EXIT_VALIDATION

    def test_invalid_jobs(self, bend_config_path):
        assert cli.main(["forward", "--config", str(bend_config_path), "--jobs", "0"]) == cli.EXIT_VALIDATION

    def test_unknown_experiment(self, tmp_path):
        assert cli.main(["reproduce", "fig-unknown", "--out", str(tmp_path)]) == cli.EXIT_VALIDATION

    def test_numerical_failure(self, monkeypatch):
        def fail(args):
            raise SolverError("带状LU分解失败", k=np.pi, guard=0.2)

        monkeypatch.setattr(cli, "run", fail)
        assert cli.main(["validate", "--schema", "unused.json"]) == cli.EXIT_NUMERICAL

    def test_acceptance_failure(self, monkeypatch, tmp_path):
        def failing_report(*args, **kwargs):
            report = AcceptanceReport("fig-condnum")
            report.at_most("error", 2.0, 1.0)
            return report

        monkeypatch.setattr(cli, "cmd_reproduce", failing_report)
        assert cli.main(["reproduce", "fig-condnum", "--out", str(tmp_path)]) == cli.EXIT_ACCEPTANCE
