"""
部分频带傅里叶反演

离散算子 γ(y) = (ih/2) Σ_x y_x e^{iωx}, 循环差分正则 G(y) = (y_i − y_{i−1}),
目标函数 J(y) = ½‖γy − d‖² + (λ/2)‖Gy‖², 精确线搜索最速下降。
数据在读入时除去各模型的前置因子, 所有缺陷类型共用同一个反演核心。
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.linalg import toeplitz
from scipy.optimize import minimize

from wgt.core.defect_models import BendParams, InhomogeneityMap, bend_fit_model, bend_params_from_profile
from wgt.core.modal_core import LineFunction, gamma_transform, modal_matrix
from wgt.datasets import FrequencyDataset
from wgt.errors import DatasetError, DomainError, NoSolutionError, NumericalError
from wgt.utils import fit_loglog_slope, relative_l2, trapezoid_weights, uniform_grid, write_json
from wgt.wgt_config import wgt_config as config

logger = logging.getLogger(__name__)

# 单次迭代中步长减半的最大次数
MAX_HALVINGS = 30
# 复迭代模式下虚部占比的告警阈值
IMAG_WARN_RATIO = 0.1
# 弯管拟合的低置信度阈值 (相对残差)
BEND_RESIDUAL_THRESHOLD = 0.5

Projector = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# 离散算子
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GammaOperatorSpec:
    """支撑窗口上的均匀网格 X = x0 + h·(0..n_x−1) 与数据频率 Ω"""
    x0: float
    h: float
    n_x: int
    omegas: np.ndarray

    def __post_init__(self):
        omegas = np.atleast_1d(np.asarray(self.omegas, dtype=float))
        object.__setattr__(self, "omegas", omegas)
        if self.n_x < 2:
            raise DomainError("X 至少需要2个点")
        if not self.h > 0:
            raise DomainError(f"网格步长必须为正: h={self.h}")
        if omegas.size == 0:
            raise DomainError("频率集合为空")
        if np.any(omegas <= 0) or np.any(np.diff(omegas) <= 0):
            raise DomainError("Ω 必须严格递增且为正")

    @classmethod
    def from_window(cls, x_min: float, x_max: float, n_x: int, omegas: Sequence[float]) -> "GammaOperatorSpec":
        if not x_max > x_min:
            raise DomainError("支撑窗口需要 x_max > x_min")
        return cls(float(x_min), (x_max - x_min) / (n_x - 1), int(n_x), np.asarray(omegas, dtype=float))

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.n_x)

    @property
    def x_max(self) -> float:
        return self.x0 + self.h * (self.n_x - 1)

    @property
    def n_omega(self) -> int:
        return self.omegas.size

    @cached_property
    def matrix(self) -> np.ndarray:
        """(n_ω, n_x) 矩阵 (ih/2) e^{iωx}"""
        return 0.5j * self.h * np.exp(1j * np.outer(self.omegas, self.x))

    def with_omegas(self, omegas: Sequence[float]) -> "GammaOperatorSpec":
        return GammaOperatorSpec(self.x0, self.h, self.n_x, np.asarray(omegas, dtype=float))


def gamma_apply(y: np.ndarray, spec: GammaOperatorSpec) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (spec.n_x,):
        raise DomainError(f"y 长度 {y.shape} 与 X 点数 {spec.n_x} 不一致")
    return spec.matrix @ y


def gamma_adjoint(d: np.ndarray, spec: GammaOperatorSpec) -> np.ndarray:
    d = np.asarray(d)
    if d.shape != (spec.n_omega,):
        raise DomainError(f"数据长度 {d.shape} 与频率个数 {spec.n_omega} 不一致")
    return spec.matrix.conj().T @ d


def discrete_gradient(y: np.ndarray) -> np.ndarray:
    """循环一阶差分 y_i − y_{i−1}"""
    y = np.asarray(y)
    if y.size < 2:
        raise DomainError("差分至少需要2个点")
    return y - np.roll(y, 1)


def discrete_gradient_adjoint(z: np.ndarray) -> np.ndarray:
    """G 的伴随: z_i − z_{i+1} (循环)"""
    z = np.asarray(z)
    if z.size < 2:
        raise DomainError("差分至少需要2个点")
    return z - np.roll(z, -1)


# ---------------------------------------------------------------------------
# 目标函数与最速下降
# ---------------------------------------------------------------------------

@dataclass
class RegularizationConfig:
    """惩罚最小二乘配置"""
    lam: float = 0.0
    max_iter: int = field(default_factory=lambda: config.MAX_ITER)
    grad_tol: float = field(default_factory=lambda: config.GRAD_TOL)
    positivity: bool = False
    real_valued: bool = True

    def __post_init__(self):
        if self.lam < 0:
            raise DomainError(f"正则化参数必须非负: lambda={self.lam}")
        if self.max_iter < 0:
            raise DomainError("max_iter 必须非负")
        if not self.grad_tol > 0:
            raise DomainError("grad_tol 必须为正")


@dataclass
class ReconstructionResult:
    """单个剖面的重建结果"""
    y: LineFunction
    objective_trace: List[float]
    iterations: int
    converged: bool
    imag_ratio: float = 0.0
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def profile(self) -> np.ndarray:
        return self.y.samples.real

    def to_payload(self) -> Dict[str, Any]:
        return {
            "x": self.y.x,
            "re": self.y.samples.real,
            "im": self.y.samples.imag,
            "objective_trace": self.objective_trace,
            "iterations": self.iterations,
            "converged": self.converged,
            "imag_ratio": self.imag_ratio,
            "meta": self.meta,
        }

    def save_json(self, path: Union[str, Path]) -> Path:
        return write_json(path, self.to_payload())

    def save_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame({"x": self.y.x, "re": self.y.samples.real, "im": self.y.samples.imag})
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        return path


def objective_and_gradient(y: np.ndarray, d: np.ndarray, spec: GammaOperatorSpec,
                           cfg: RegularizationConfig) -> Tuple[float, np.ndarray]:
    """J(y) 及其梯度 γ*(γy − d) + λG*Gy (实模式下取实部)"""
    residual = gamma_apply(y, spec) - np.asarray(d)
    Gy = discrete_gradient(y)
    J = 0.5 * float(np.vdot(residual, residual).real) + 0.5 * cfg.lam * float(np.vdot(Gy, Gy).real)
    grad = gamma_adjoint(residual, spec) + cfg.lam * discrete_gradient_adjoint(Gy)
    if cfg.real_valued:
        grad = grad.real
    return J, grad


def clamp_nonnegative(y: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(y).real, 0.0)


def _finish(y: np.ndarray, spec: GammaOperatorSpec, cfg: RegularizationConfig, trace: List[float],
            iterations: int, converged: bool) -> ReconstructionResult:
    imag_ratio = 0.0
    if np.iscomplexobj(y):
        re_norm = np.linalg.norm(y.real)
        im_norm = np.linalg.norm(y.imag)
        imag_ratio = float(im_norm / re_norm) if re_norm > 0 else (0.0 if im_norm == 0 else np.inf)
        if imag_ratio > IMAG_WARN_RATIO:
            logger.warning(f"重建结果虚部占比 {imag_ratio:.2%} 超过 {IMAG_WARN_RATIO:.0%}, 已舍弃虚部")
        y = y.real
    return ReconstructionResult(LineFunction(y, spec.x0, spec.h), trace, iterations, converged, imag_ratio)


def steepest_descent(d: np.ndarray, spec: GammaOperatorSpec, cfg: RegularizationConfig,
                     y0: Optional[np.ndarray] = None, projector: Optional[Projector] = None) -> ReconstructionResult:
    """精确线搜索最速下降, 目标函数轨迹单调不增"""
    d = np.asarray(d, dtype=complex)
    if d.shape != (spec.n_omega,):
        raise DomainError(f"数据长度 {d.shape} 与频率个数 {spec.n_omega} 不一致")
    dtype = float if cfg.real_valued else complex
    y = np.zeros(spec.n_x, dtype=dtype) if y0 is None else np.asarray(y0, dtype=dtype).copy()
    if y.shape != (spec.n_x,):
        raise DomainError(f"初值长度 {y.shape} 与 X 点数 {spec.n_x} 不一致")

    J, grad = objective_and_gradient(y, d, spec, cfg)
    trace = [J]
    g0 = float(np.linalg.norm(grad))
    if g0 == 0.0:
        return _finish(y, spec, cfg, trace, 0, True)

    converged = False
    iteration = 0
    while iteration < cfg.max_iter:
        g_sq = float(np.vdot(grad, grad).real)
        Eg = gamma_apply(grad, spec)
        Gg = discrete_gradient(grad)
        curvature = float(np.vdot(Eg, Eg).real) + cfg.lam * float(np.vdot(Gg, Gg).real)
        if curvature <= 0.0:
            break
        t = g_sq / curvature

        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            candidate = y - t * grad
            if projector is not None:
                candidate = projector(candidate)
            J_new, grad_new = objective_and_gradient(candidate, d, spec, cfg)
            if not np.isfinite(J_new) or not np.all(np.isfinite(grad_new)):
                raise NumericalError(f"第 {iteration + 1} 次迭代出现非有限值", iteration=iteration + 1)
            if J_new <= J:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            logger.debug(f"步长减半 {MAX_HALVINGS} 次后目标函数仍未下降, 在第 {iteration} 次迭代停止")
            break

        iteration += 1
        stalled = projector is not None and J_new == J
        y, J, grad = candidate, J_new, grad_new
        trace.append(J)
        if np.linalg.norm(grad) < cfg.grad_tol * g0 or stalled:
            # 投影约束下梯度不一定趋于0, 目标不再下降即停止
            converged = True
            break

    logger.debug(f"最速下降结束: {iteration} 次迭代, J={J:.4e}, 收敛={converged}")
    return _finish(y, spec, cfg, trace, iteration, converged)


def positivity_projected_descent(d: np.ndarray, spec: GammaOperatorSpec, cfg: RegularizationConfig,
                                 y0: Optional[np.ndarray] = None) -> ReconstructionResult:
    """每步之后把剖面投影到非负函数集合"""
    real_cfg = RegularizationConfig(cfg.lam, cfg.max_iter, cfg.grad_tol, True, True)
    start = None if y0 is None else clamp_nonnegative(y0)
    return steepest_descent(d, spec, real_cfg, y0=start, projector=clamp_nonnegative)


def projected_modal_descent(problems: Mapping[int, Tuple[GammaOperatorSpec, np.ndarray]],
                            cfg: RegularizationConfig, ny: int) -> Dict[int, ReconstructionResult]:
    """多模态联合下降: 每步后重组二维分布, 负值截断为0, 再分解回各模态"""
    modes = sorted(problems)
    if not modes:
        return {}
    specs = [problems[n][0] for n in modes]
    data = [np.asarray(problems[n][1], dtype=complex) for n in modes]
    base = specs[0]
    for spec in specs[1:]:
        if spec.n_x != base.n_x or not np.isclose(spec.x0, base.x0) or not np.isclose(spec.h, base.h):
            raise DomainError("联合投影要求各模态共用同一 X 网格")
    N = max(modes)
    ny = max(ny, 4 * N + 1)
    y = np.linspace(0.0, 1.0, ny)
    phi = modal_matrix(N, y)[modes]
    weights = trapezoid_weights(ny, 1.0 / (ny - 1))
    real_cfg = RegularizationConfig(cfg.lam, cfg.max_iter, cfg.grad_tol, True, True)

    def project(Y: np.ndarray) -> np.ndarray:
        field_map = np.maximum(Y.T @ phi, 0.0)
        return (phi * weights) @ field_map.T

    def evaluate(Y: np.ndarray) -> Tuple[float, np.ndarray]:
        total = 0.0
        grads = np.zeros_like(Y)
        for i, (spec, d) in enumerate(zip(specs, data)):
            J_i, g_i = objective_and_gradient(Y[i], d, spec, real_cfg)
            total += J_i
            grads[i] = g_i
        return total, grads

    Y = np.zeros((len(modes), base.n_x))
    J, grads = evaluate(Y)
    trace = [J]
    g0 = float(np.linalg.norm(grads))
    converged = g0 == 0.0
    iteration = 0
    while not converged and iteration < real_cfg.max_iter:
        steps = np.zeros(len(modes))
        for i, spec in enumerate(specs):
            Eg = gamma_apply(grads[i], spec)
            Gg = discrete_gradient(grads[i])
            curvature = float(np.vdot(Eg, Eg).real) + real_cfg.lam * float(np.vdot(Gg, Gg).real)
            steps[i] = float(np.dot(grads[i], grads[i])) / curvature if curvature > 0 else 0.0
        scale = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            candidate = project(Y - scale * steps[:, None] * grads)
            J_new, grads_new = evaluate(candidate)
            if not np.isfinite(J_new):
                raise NumericalError(f"第 {iteration + 1} 次迭代出现非有限值", iteration=iteration + 1)
            if J_new <= J:
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            break
        iteration += 1
        Y, J, grads = candidate, J_new, grads_new
        trace.append(J)
        if np.linalg.norm(grads) < real_cfg.grad_tol * g0:
            converged = True

    logger.info(f"联合投影下降结束: {iteration} 次迭代, J={J:.4e}, 收敛={converged}")
    return {n: ReconstructionResult(LineFunction(Y[i], base.x0, base.h), list(trace), iteration, converged)
            for i, n in enumerate(modes)}


# ---------------------------------------------------------------------------
# 数据读入: 除去前置因子, 化为 γ 的目标数据
# ---------------------------------------------------------------------------

def gamma_targets(data: FrequencyDataset, n: int, kind: str) -> Tuple[np.ndarray, np.ndarray]:
    """返回模态 n 的 (ω, 目标数据), 目标满足 γ(剖面) ≈ 目标

    bend: v = 2k²Γ(f)(2k) → v/k
    bump: 模态0 d = 2ikΓ(s0)(2k) → −i·d; 模态1 d = −√2ik(k1+k)/k1·Γ(s1)(k+k1) → i·k1·d/(√2k)
    inhomogeneity: d = (k+k_n)k²/k_n·Γ(h_n)(k+k_n) → d·k_n/k²
    """
    k, omega, datum = data.mode_arrays(n)
    if k.size == 0:
        return omega, datum
    if kind in ("bend", "bends"):
        if n != 0:
            raise DatasetError("弯管反演只使用模态0数据")
        target = datum / k
    elif kind == "bump":
        if n == 0:
            target = -1j * datum
        elif n == 1:
            k1 = omega - k
            target = 1j * k1 * datum / (np.sqrt(2.0) * k)
        else:
            raise DatasetError(f"凸起反演只使用模态0和1, 收到模态 {n}")
    elif kind == "inhomogeneity":
        k_n = omega - k
        target = datum * k_n / (k * k)
    else:
        raise DatasetError(f"未知的缺陷类型: {kind}")
    return omega, target


def _descend(d: np.ndarray, spec: GammaOperatorSpec, cfg: RegularizationConfig) -> ReconstructionResult:
    if cfg.positivity:
        return positivity_projected_descent(d, spec, cfg)
    return steepest_descent(d, spec, cfg)


# ---------------------------------------------------------------------------
# 弯管: 矩形源参数拟合
# ---------------------------------------------------------------------------

@dataclass
class BendRecovery:
    """弯管参数拟合结果"""
    bends: List[BendParams]
    residual: float
    low_confidence: bool
    rectangles: List[Tuple[float, float, float]]


def _rectangle_basis(p2: np.ndarray, p3: np.ndarray, omegas: np.ndarray) -> np.ndarray:
    return bend_fit_model(1.0, p2[..., None], p3[..., None], omegas)


def _best_p1(basis: np.ndarray, target: np.ndarray) -> np.ndarray:
    num = np.real(np.sum(basis.conj() * target, axis=-1))
    den = np.sum(np.abs(basis) ** 2, axis=-1)
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def _linear_amplitudes(omegas: np.ndarray, target: np.ndarray, positions: np.ndarray) -> Tuple[np.ndarray, float]:
    """给定各矩形 (p2, p3), 实系数 p1 的线性最小二乘"""
    columns = np.stack([bend_fit_model(1.0, p2, abs(p3), omegas) for p2, p3 in positions], axis=1)
    A = np.vstack([columns.real, columns.imag])
    b = np.concatenate([target.real, target.imag])
    p1, *_ = np.linalg.lstsq(A, b, rcond=None)
    misfit = float(np.linalg.norm(A @ p1 - b))
    return p1, misfit


def _grid_search(omegas: np.ndarray, target: np.ndarray, window: Tuple[float, float],
                 max_points: int = 800) -> Tuple[float, float]:
    lo, hi = window
    step = min(np.pi / (4.0 * omegas.max()), (hi - lo) / 50.0)
    n2 = min(int(np.ceil((hi - lo) / step)) + 1, max_points)
    p2_grid = np.linspace(lo, hi, n2)
    p3_grid = np.linspace((hi - lo) / n2, hi - lo, n2)
    best = (np.inf, lo, p3_grid[0])
    for p2 in p2_grid:
        p3 = p3_grid[p2 + p3_grid <= hi + 1e-12]
        if p3.size == 0:
            continue
        basis = _rectangle_basis(np.full(p3.size, p2), p3, omegas)
        p1 = _best_p1(basis, target)
        misfit = np.sum(np.abs(target - p1[:, None] * basis) ** 2, axis=-1)
        i = int(np.argmin(misfit))
        if misfit[i] < best[0]:
            best = (float(misfit[i]), float(p2), float(p3[i]))
    return best[1], best[2]


def _refine(omegas: np.ndarray, target: np.ndarray, positions: np.ndarray) -> np.ndarray:
    def objective(flat: np.ndarray) -> float:
        return _linear_amplitudes(omegas, target, flat.reshape(-1, 2))[1] ** 2

    res = minimize(objective, positions.ravel(), method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-18, "maxiter": 20000, "maxfev": 40000})
    refined = res.x.reshape(-1, 2)
    refined[:, 1] = np.abs(refined[:, 1])
    return refined


def recover_bend(data: FrequencyDataset, n_bends: int = 1, window: Tuple[float, float] = (0.0, 10.0),
                 threshold: float = BEND_RESIDUAL_THRESHOLD) -> BendRecovery:
    """拟合矩形源 −p1·1_{[p2,p2+p3]} 之和并换算为弯管参数"""
    if 0 not in data.modes:
        raise DatasetError("弯管反演需要模态0数据")
    if n_bends < 1:
        raise DomainError("弯曲个数必须为正")
    omegas, target = gamma_targets(data, 0, "bend")
    target_norm = float(np.linalg.norm(target))
    if target_norm == 0.0:
        logger.warning("弯管数据全为0, 无法拟合")
        return BendRecovery([], 0.0, True, [])

    positions = []
    remainder = target.copy()
    for _ in range(n_bends):
        p2, p3 = _grid_search(omegas, remainder, window)
        single = _refine(omegas, remainder, np.array([[p2, p3]]))
        p1, _ = _linear_amplitudes(omegas, remainder, single)
        remainder = remainder - p1[0] * bend_fit_model(1.0, single[0, 0], single[0, 1], omegas)
        positions.append(single[0])
    positions = np.array(positions)
    if n_bends > 1:
        positions = _refine(omegas, target, positions)
    p1, misfit = _linear_amplitudes(omegas, target, positions)
    residual = misfit / target_norm

    order = np.argsort(positions[:, 0])
    rectangles = [(float(p1[i]), float(positions[i, 0]), float(positions[i, 1])) for i in order]
    low_confidence = residual > threshold
    bends = []
    for rect in rectangles:
        try:
            bends.append(bend_params_from_profile(*rect))
        except NoSolutionError as e:
            logger.warning(f"矩形 {rect} 无法换算为弯管参数: {str(e)}")
            low_confidence = True
    if residual > threshold:
        logger.warning(f"弯管拟合相对残差 {residual:.3f} 超过阈值 {threshold}, 结果置信度低")
    logger.info(f"弯管拟合完成: {len(bends)} 个弯曲, 相对残差 {residual:.3e}")
    return BendRecovery(bends, float(residual), bool(low_confidence), rectangles)


# ---------------------------------------------------------------------------
# 凸起
# ---------------------------------------------------------------------------

@dataclass
class BumpRecovery:
    """凸起剖面重建结果"""
    g: LineFunction
    h: LineFunction
    partial: bool
    results: Dict[int, ReconstructionResult]


def recover_bump(data: FrequencyDataset, window: Tuple[float, float, int],
                 cfg: RegularizationConfig) -> BumpRecovery:
    """分别反演 s0 = h'−g' 与 s1 = h'+g', 再积分得到 h、g"""
    if 0 not in data.modes:
        raise DatasetError("凸起反演需要模态0数据")
    x_min, x_max, n_x = window
    results: Dict[int, ReconstructionResult] = {}
    for n in (0, 1):
        omegas, target = gamma_targets(data, n, "bump")
        if omegas.size == 0:
            continue
        spec = GammaOperatorSpec.from_window(x_min, x_max, n_x, omegas)
        results[n] = steepest_descent(target, spec, cfg)

    s0 = results[0].y.real()
    if 1 not in results:
        logger.warning("缺少模态1数据, 只能重建 h−g")
        return BumpRecovery(LineFunction.zeros_like(s0), s0.antiderivative().real(), True, results)
    s1 = results[1].y.real()
    h_prime = LineFunction(0.5 * (s0.samples + s1.samples), s0.x0, s0.dx)
    g_prime = LineFunction(0.5 * (s1.samples - s0.samples), s0.x0, s0.dx)
    logger.info("凸起剖面重建完成")
    return BumpRecovery(g_prime.antiderivative().real(), h_prime.antiderivative().real(), False, results)


# ---------------------------------------------------------------------------
# 非均匀介质
# ---------------------------------------------------------------------------

@dataclass
class InhomogeneityRecovery:
    """逐模态重建并重组的折射率扰动"""
    map: InhomogeneityMap
    results: Dict[int, ReconstructionResult]
    skipped: List[int]


def recover_inhomogeneity(data: FrequencyDataset, window: Tuple[float, float, int], N: int,
                          cfg: RegularizationConfig, ny: int = 101, jobs: int = 1) -> InhomogeneityRecovery:
    """对每个 n <= N 反演 h_n, 再重组 h(x,y) = Σ h_n(x) φ_n(y)"""
    x_min, x_max, n_x = window
    problems: Dict[int, Tuple[GammaOperatorSpec, np.ndarray]] = {}
    skipped = []
    for n in range(N + 1):
        omegas, target = gamma_targets(data, n, "inhomogeneity")
        if omegas.size == 0:
            logger.warning(f"模态 {n} 没有可用频带, 跳过")
            skipped.append(n)
            continue
        problems[n] = (GammaOperatorSpec.from_window(x_min, x_max, n_x, omegas), target)

    if cfg.positivity:
        results = projected_modal_descent(problems, cfg, ny)
    elif jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {n: pool.submit(steepest_descent, d, spec, cfg) for n, (spec, d) in problems.items()}
            results = {n: fut.result() for n, fut in futures.items()}
    else:
        results = {n: steepest_descent(d, spec, cfg) for n, (spec, d) in problems.items()}

    ny = max(ny, 4 * N + 1)
    y = np.linspace(0.0, 1.0, ny)
    phi = modal_matrix(N, y)
    values = np.zeros((n_x, ny))
    for n, result in results.items():
        values += np.outer(result.profile, phi[n])
    if cfg.positivity:
        values = np.maximum(values, 0.0)
    spec_h = (x_max - x_min) / (n_x - 1)
    recovered = InhomogeneityMap(values, x_min, spec_h, label="reconstruction")
    logger.info(f"非均匀介质重建完成: 使用模态 {sorted(results)}, 跳过 {skipped}")
    return InhomogeneityRecovery(recovered, results, skipped)


# ---------------------------------------------------------------------------
# 条件数研究
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConditioningGrid:
    """X = [1−r, 1+r] 每单位长度 points_per_unit 个间隔; K 为 FFT 频率 2πj/(N h), j = 0..N−1 中大于 ω0 的部分"""
    points_per_unit: int = 250
    fft_size: int = 16384

    def x_count(self, r: float) -> int:
        return int(round(2 * self.points_per_unit * r)) + 1


def gram_matrix(r: float, omega0: float, grid: ConditioningGrid) -> np.ndarray:
    """M Mᴴ, M = h(e^{ixk})_{x∈X, k∈K}, 按 Toeplitz 结构用几何级数闭式构造"""
    n_x = grid.x_count(r)
    h = 2.0 * r / (n_x - 1)
    dk = 2.0 * np.pi / (grid.fft_size * h)
    j_min = int(np.floor(omega0 / dk)) + 1
    j_max = grid.fft_size - 1
    count = j_max - j_min + 1
    if count <= 0:
        raise DomainError(f"ω0={omega0} 超过 FFT 频率网格的上限 {j_max * dk:.4g}")
    m = np.arange(n_x)
    z = np.exp(2j * np.pi * m / grid.fft_size)
    column = np.empty(n_x, dtype=complex)
    column[0] = count
    zm = z[1:]
    column[1:] = zm ** j_min * (1.0 - zm ** count) / (1.0 - zm)
    return h * h * toeplitz(column)


def conditioning_study(r_values: Sequence[float], omega0_values: Sequence[float],
                       grid: Optional[ConditioningGrid] = None) -> pd.DataFrame:
    """cond₂(M Mᴴ) 随支撑半径 r 与低频缺口 ω0 的变化"""
    grid = grid or ConditioningGrid()
    floor = 1e3 * np.finfo(float).eps
    rows = []
    for omega0 in omega0_values:
        for r in r_values:
            eig = np.linalg.eigvalsh(gram_matrix(r, omega0, grid))
            lam_min, lam_max = float(eig[0]), float(eig[-1])
            singular = lam_min < floor * lam_max
            cond = 1.0 / floor if singular else lam_max / lam_min
            if singular:
                logger.warning(f"r={r}, ω0={omega0:.4g}: 数值奇异, 条件数下界 {cond:.3e}")
            rows.append({"r": float(r), "omega0": float(omega0), "cond": cond, "singular": bool(singular)})
            logger.debug(f"r={r}, ω0={omega0:.4g}: cond={cond:.6e}")
    return pd.DataFrame(rows, columns=["r", "omega0", "cond", "singular"])


# ---------------------------------------------------------------------------
# 源重建研究
# ---------------------------------------------------------------------------

def source_recovery(f: Callable[[np.ndarray], np.ndarray], support: Tuple[float, float],
                    omegas: Sequence[float], window: Tuple[float, float, int], cfg: RegularizationConfig,
                    fine_points: int = 4001, noise_level: float = 0.0,
                    seed: Optional[int] = None) -> Tuple[ReconstructionResult, float]:
    """由 ω·Γ(f)(ω) 重建源 f, 返回 (结果, 相对L2误差)

    数据用支撑上的细网格求积生成, 与反演网格 X 相互独立。
    """
    omegas = np.asarray(omegas, dtype=float)
    fine = LineFunction.from_callable(f, support[0], support[1], fine_points)
    target = omegas * gamma_transform(fine, omegas)
    if noise_level > 0:
        rng = np.random.default_rng(seed)
        rms = np.sqrt(np.mean(np.abs(target) ** 2))
        target = target + noise_level * rms * (rng.standard_normal(target.size)
                                               + 1j * rng.standard_normal(target.size)) / np.sqrt(2.0)
    spec = GammaOperatorSpec.from_window(*window, omegas)
    result = _descend(target, spec, cfg)
    exact = np.where((spec.x >= support[0]) & (spec.x <= support[1]), np.real(f(spec.x)), 0.0)
    error = relative_l2(result.profile, exact)
    result.meta.update({"relative_error": error})
    return result, error


def band_top_study(f: Callable[[np.ndarray], np.ndarray], support: Tuple[float, float],
                   omega1_values: Sequence[float], window: Tuple[float, float], cfg: RegularizationConfig,
                   omega_min: float = 0.01, omega_count: int = 1000,
                   x_per_omega: float = 10.0) -> Tuple[pd.DataFrame, float]:
    """误差随频带上限 ω1 的变化及其对数斜率"""
    rows = []
    for omega1 in omega1_values:
        n_x = max(int(round(x_per_omega * omega1)), 2)
        _, error = source_recovery(f, support, uniform_grid(omega_min, omega1, omega_count),
                                   (window[0], window[1], n_x), cfg)
        rows.append({"omega1": float(omega1), "n_x": n_x, "error": error})
        logger.info(f"ω1={omega1:.4g}: 相对误差 {error:.4e}")
    table = pd.DataFrame(rows, columns=["omega1", "n_x", "error"])
    slope = fit_loglog_slope(table["omega1"], table["error"]) if len(table) >= 2 else float("nan")
    return table, slope


def low_gap_study(f: Callable[[np.ndarray], np.ndarray], support: Tuple[float, float],
                  omega0_values: Sequence[float], window: Tuple[float, float, int], cfg: RegularizationConfig,
                  omega1: float = 50.0, omega_count: int = 1000, omega_floor: float = 0.01) -> pd.DataFrame:
    """误差随低频缺口 ω0 的变化"""
    rows = []
    for omega0 in omega0_values:
        _, error = source_recovery(f, support, uniform_grid(max(omega0, omega_floor), omega1, omega_count),
                                   window, cfg)
        rows.append({"omega0": float(omega0), "error": error})
        logger.info(f"ω0={omega0:.4g}: 相对误差 {error:.4e}")
    return pd.DataFrame(rows, columns=["omega0", "error"])


def support_study(radii: Sequence[float], omega0: float, cfg: RegularizationConfig, center: float = 1.0,
                  omega1: float = 50.0, omega_count: int = 1000, points_per_unit: int = 250) -> pd.DataFrame:
    """误差随支撑半径 r 的变化, 源为 [c−r, c+r] 上的四次凸起"""
    rows = []
    for r in radii:
        lo, hi = center - r, center + r

        def bump(x: np.ndarray, lo=lo, hi=hi) -> np.ndarray:
            return np.where((x >= lo) & (x <= hi), ((x - lo) * (hi - x)) ** 2 / r ** 4, 0.0)

        n_x = int(round(2 * points_per_unit * r)) + 1
        _, error = source_recovery(bump, (lo, hi), uniform_grid(omega0, omega1, omega_count),
                                   (lo, hi, n_x), cfg)
        rows.append({"r": float(r), "error": error})
        logger.info(f"r={r}: 相对误差 {error:.4e}")
    return pd.DataFrame(rows, columns=["r", "error"])
