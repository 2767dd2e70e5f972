"""
实验编排模块
提供正演/反演/条件数研究命令、登记表复现与验收报告
"""

from .experiments import (
    cmd_condition_study,
    cmd_forward,
    cmd_invert,
    cmd_reproduce,
    load_config,
    validate_config,
)
from .reporting import AcceptanceReport, ResultTable

__all__ = [
    "cmd_forward",
    "cmd_invert",
    "cmd_condition_study",
    "cmd_reproduce",
    "load_config",
    "validate_config",
    "AcceptanceReport",
    "ResultTable",
]
