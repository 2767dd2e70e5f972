"""异常定义"""

from typing import Optional


class WaveguideError(Exception):
    """所有工具包异常的基类"""


# ---- 输入/校验类错误 (CLI退出码2) ----

class ValidationFailure(WaveguideError, ValueError):
    """输入不满足前置条件"""


class DomainError(ValidationFailure):
    """参数超出定义域"""


class CutoffError(ValidationFailure):
    """频率恰好位于截止频率 k = nπ"""


class AliasingError(ValidationFailure):
    """横向采样点数不足以分辨所需模态"""


class GeometryError(ValidationFailure):
    """几何退化, 例如通道宽度 1+h-g <= 0 或缺陷超出计算窗口"""


class ModeUnavailableError(ValidationFailure):
    """模态在该频率下不传播"""


class NoSolutionError(ValidationFailure):
    """方程在给定区间内无解"""


class ConfigError(ValidationFailure):
    """实验配置错误"""


class DatasetError(ValidationFailure):
    """频率数据集不满足不变量"""


# ---- 数值类错误 (CLI退出码3) ----

class NumericalFailure(WaveguideError, RuntimeError):
    """数值计算失败"""


class DivergenceError(NumericalFailure):
    """Born级数发散"""


class NumericalError(NumericalFailure):
    """迭代过程中出现非有限值"""

    def __init__(self, message: str, iteration: Optional[int] = None):
        super().__init__(message)
        self.iteration = iteration


class SolverError(NumericalFailure):
    """带状直接求解失败"""

    def __init__(self, message: str, k: Optional[float] = None, guard: float = 0.2):
        hint = ""
        if k is not None:
            hint = f" (k={k:.6g}; 建议避开 [nπ-{guard}, nπ+{guard}] 保护带)"
        super().__init__(message + hint)
        self.k = k
        self.guard = guard
