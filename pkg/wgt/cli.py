#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
波导缺陷反演命令行入口

    wgt forward --config cfg.json [--out DIR] [--seed N] [--format json|csv|both] [--jobs N]
    wgt invert --dataset data.json --config cfg.json [--out DIR]
    wgt condition-study [--config study.json] [--out DIR]
    wgt reproduce ID [--out DIR] [--jobs N]
    wgt validate --config cfg.json | --schema schema.json
"""

import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from wgt.errors import NumericalFailure, ValidationFailure
from wgt.harness.experiments import (
    FORMATS,
    cmd_condition_study,
    cmd_forward,
    cmd_invert,
    cmd_reproduce,
    load_config,
    registry_ids,
    validate_config,
    write_schema,
)
from wgt.models import ConditionStudyConfig
from wgt.utils import read_json, setup_logging
from wgt.wgt_config import wgt_config as config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_ACCEPTANCE = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wgt", description="波导缺陷多频反演工具")
    parser.add_argument("--log-level", default=None, choices=["error", "warn", "info", "debug"],
                        help="日志级别 (默认读取 WGT_LOG)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", default=None, help="输出目录")
        p.add_argument("--format", default="both", choices=FORMATS, help="数据输出格式")
        p.add_argument("--jobs", type=int, default=None, help="并行求解的最大线程数")

    p = sub.add_parser("forward", help="合成测量数据")
    p.add_argument("--config", required=True, help="实验配置 JSON")
    p.add_argument("--seed", type=int, default=None, help="噪声随机种子 (覆盖配置)")
    common(p)

    p = sub.add_parser("invert", help="由数据集重建缺陷")
    p.add_argument("--dataset", required=True, help="数据集 JSON 或 CSV")
    p.add_argument("--config", required=True, help="实验配置 JSON")
    common(p)

    p = sub.add_parser("condition-study", help="cond(M Mᴴ) 随 r 与 ω0 的变化")
    p.add_argument("--config", default=None, help="条件数研究配置 JSON (缺省为默认网格)")
    common(p)

    p = sub.add_parser("reproduce", help="复现登记表中的图/表")
    p.add_argument("id", help=f"实验编号: {', '.join(registry_ids())}")
    common(p)

    p = sub.add_parser("validate", help="校验配置或导出配置模式")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--config", help="待校验的配置 JSON")
    group.add_argument("--schema", help="导出 JSON Schema 的路径")
    return parser


def _jobs(value: Optional[int]) -> Optional[int]:
    if value is not None and value < 1:
        raise ValidationFailure(f"--jobs 必须为正整数: {value}")
    return value


def run(args: argparse.Namespace) -> int:
    if args.command == "forward":
        cfg = load_config(args.config)
        paths = cmd_forward(cfg, args.out, args.format, seed=args.seed, jobs=_jobs(args.jobs))
        for path in paths:
            print(path)
        return EXIT_OK

    if args.command == "invert":
        cfg = load_config(args.config)
        summary = cmd_invert(args.dataset, cfg, args.out, args.format, jobs=_jobs(args.jobs))
        print(f"反演完成: {summary['defect_type']} (来源 {summary['provenance']})")
        return EXIT_OK

    if args.command == "condition-study":
        study = ConditionStudyConfig.model_validate(read_json(args.config)) if args.config else ConditionStudyConfig()
        table = cmd_condition_study(study, args.out, args.format)
        print(f"条件数表: {len(table)} 行")
        return EXIT_OK

    if args.command == "reproduce":
        report = cmd_reproduce(args.id, args.out, args.format, jobs=_jobs(args.jobs))
        print("=" * 60)
        print(f"{report.experiment}: {'通过' if report.passed else '未通过'}")
        for c in report.criteria:
            print(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.measured} (界 {c.bound})")
        print("=" * 60)
        return EXIT_OK if report.passed else EXIT_ACCEPTANCE

    if args.command == "validate":
        if args.schema:
            print(write_schema(args.schema))
        else:
            cfg = validate_config(args.config)
            print(f"配置有效: {args.config} ({type(cfg).__name__})")
        return EXIT_OK

    raise ValidationFailure(f"未知命令: {args.command}")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config.validate()
    except ValueError as e:
        print(f"环境配置错误: {str(e)}", file=sys.stderr)
        return EXIT_VALIDATION
    setup_logging(args.log_level or config.LOG_LEVEL, config.LOG_FILE)

    try:
        return run(args)
    except ValidationError as e:
        logger.error(f"配置校验失败:\n{e}")
        return EXIT_VALIDATION
    except ValidationFailure as e:
        logger.error(f"输入无效: {str(e)}")
        return EXIT_VALIDATION
    except OSError as e:
        logger.error(f"文件读写失败: {str(e)}")
        return EXIT_VALIDATION
    except NumericalFailure as e:
        logger.error(f"数值计算失败: {str(e)}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
