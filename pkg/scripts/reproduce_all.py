#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
复现登记表中的全部图表并汇总验收结果
"""

import argparse
import logging
import os
import sys
from datetime import datetime
from pathlib import Path

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from wgt.errors import WaveguideError
from wgt.harness.experiments import cmd_reproduce, registry_ids
from wgt.utils import setup_logging
from wgt.wgt_config import wgt_config as config

logger = logging.getLogger(__name__)


def main() -> int:
    parser = argparse.ArgumentParser(description="复现全部登记实验")
    parser.add_argument("--out", default=config.OUTPUT_DIR, help="输出根目录")
    parser.add_argument("--jobs", type=int, default=config.JOBS, help="并行线程数")
    parser.add_argument("--only", nargs="*", default=None, help="只运行指定编号")
    args = parser.parse_args()

    setup_logging(config.LOG_LEVEL, config.LOG_FILE)
    ids = args.only or registry_ids()

    print("=" * 60)
    print("登记实验复现脚本")
    print("=" * 60)
    print(f"开始时间: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    print(f"输出目录: {args.out}")
    print(f"实验数量: {len(ids)}")
    print()

    results = {}
    for experiment_id in ids:
        print(f"正在复现 {experiment_id} ...")
        try:
            report = cmd_reproduce(experiment_id, Path(args.out) / experiment_id, jobs=args.jobs)
            results[experiment_id] = report.passed
            print(f"{'✓' if report.passed else '⚠'} {experiment_id}: {'通过' if report.passed else '未通过'}")
        except WaveguideError as e:
            logger.error(f"复现 {experiment_id} 失败: {str(e)}")
            results[experiment_id] = False
            print(f"❌ {experiment_id}: {str(e)}")

    print()
    print("=" * 60)
    print("复现结果:")
    passed = sum(results.values())
    print(f"✓ 通过: {passed}/{len(results)}")
    failed = [i for i, ok in results.items() if not ok]
    if failed:
        print(f"⚠ 未通过: {', '.join(failed)}")
        print("请查看各实验目录下的 acceptance.json")
    print("=" * 60)
    print(f"完成时间: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    return 0 if not failed else 4


if __name__ == "__main__":
    sys.exit(main())
