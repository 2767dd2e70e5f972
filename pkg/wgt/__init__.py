"""
波导缺陷反演工具包
多频模态数据的正演、Born近似数据模型、部分频带傅里叶反演以及独立的FDFD数据生成
"""

__version__ = "0.1.0"
