"""公共测试夹具: 随机数发生器与粗网格 FDFD 配置"""
from __future__ import annotations

import numpy as np
import pytest

from wgt.core.fdfd_solver import DiscretizationConfig


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def small_cfg() -> DiscretizationConfig:
    """[-0.5, 2] 物理窗口, 两侧各 1 个单位 PML 的粗网格"""
    return DiscretizationConfig(dx=0.05, dy=0.1, x_left=-0.5, x_right=2.0, pml_left=1.0, pml_right=1.0,
                                source_x=0.0)
