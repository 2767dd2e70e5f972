import os

from dotenv import load_dotenv

load_dotenv()

LOG_LEVELS = {"error", "warn", "info", "debug"}


class Config:
    """运行环境配置类"""

    def __init__(self):
        # 日志配置
        self.LOG_LEVEL = os.getenv("WGT_LOG", "info").lower()
        self.LOG_FILE = os.getenv("WGT_LOG_FILE")

        # 输出与并行
        self.OUTPUT_DIR = os.getenv("WGT_OUTPUT_DIR", "./results")
        self.JOBS = int(os.getenv("WGT_JOBS", "1"))

        # 频率保护带
        self.GUARD_BAND = float(os.getenv("WGT_GUARD_BAND", "0.2"))

        # FDFD离散配置
        self.FDFD_DX = float(os.getenv("WGT_FDFD_DX", "0.01"))
        self.PML_WIDTH = float(os.getenv("WGT_PML_WIDTH", "19.0"))

        # 反演迭代配置
        self.GRAD_TOL = float(os.getenv("WGT_GRAD_TOL", "1e-6"))
        self.MAX_ITER = int(os.getenv("WGT_MAX_ITER", "5000"))

        # Born级数配置
        self.BORN_TOL = float(os.getenv("WGT_BORN_TOL", "1e-8"))
        self.BORN_MAX_TERMS = int(os.getenv("WGT_BORN_MAX_TERMS", "50"))

    def validate(self):
        """验证配置"""
        if self.LOG_LEVEL not in LOG_LEVELS:
            raise ValueError(f"WGT_LOG必须是 {sorted(LOG_LEVELS)} 之一")

        if self.JOBS <= 0:
            raise ValueError("WGT_JOBS必须大于0")

        if self.GUARD_BAND < 0:
            raise ValueError("WGT_GUARD_BAND不能小于0")

        if self.FDFD_DX <= 0:
            raise ValueError("WGT_FDFD_DX必须大于0")

        if self.PML_WIDTH <= 0:
            raise ValueError("WGT_PML_WIDTH必须大于0")

        if not 0 < self.GRAD_TOL < 1:
            raise ValueError("WGT_GRAD_TOL必须在(0, 1)之间")

        if self.MAX_ITER <= 0:
            raise ValueError("WGT_MAX_ITER必须大于0")

        if self.BORN_TOL <= 0:
            raise ValueError("WGT_BORN_TOL必须大于0")

        if self.BORN_MAX_TERMS <= 0:
            raise ValueError("WGT_BORN_MAX_TERMS必须大于0")


# 全局配置实例
wgt_config = Config()
