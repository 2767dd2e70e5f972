"""
数值核心模块
提供模态分解、模态正演与Born级数、缺陷数据模型、FDFD求解以及部分频带反演
"""

from .modal_core import (
    LineFunction,
    SectionField,
    decompose,
    gamma_transform,
    inverse_gamma,
    longitudinal_wavenumber,
    recompose,
)
from .forward_modal import born_series, solve_boundary, solve_source
from .defect_models import (
    BendParams,
    BendSequence,
    BumpProfiles,
    InhomogeneityMap,
    bend_data_model,
    bump_data_model,
    inhomogeneity_data_model,
)
from .fdfd_solver import DiscretizationConfig, assemble, solve, synthesize_measurements
from .inversion import (
    RegularizationConfig,
    conditioning_study,
    recover_bend,
    recover_bump,
    recover_inhomogeneity,
    steepest_descent,
)

__all__ = [
    "LineFunction",
    "SectionField",
    "decompose",
    "recompose",
    "gamma_transform",
    "inverse_gamma",
    "longitudinal_wavenumber",
    "solve_source",
    "solve_boundary",
    "born_series",
    "BendParams",
    "BendSequence",
    "BumpProfiles",
    "InhomogeneityMap",
    "bend_data_model",
    "bump_data_model",
    "inhomogeneity_data_model",
    "DiscretizationConfig",
    "assemble",
    "solve",
    "synthesize_measurements",
    "RegularizationConfig",
    "steepest_descent",
    "recover_bend",
    "recover_bump",
    "recover_inhomogeneity",
    "conditioning_study",
]
