"""模态正演测试

支撑 [a, b] 左侧 (x < a) 的模态分量满足

    u_n(x) = e^{−ik_n x} Γ(s_n)(k_n),

在 x = 0 处即为 Γ(s_n)(k_n), 与 modal_core 中的 Γ 使用同一梯形权重。
"""
from __future__ import annotations

import numpy as np
import pytest

from wgt.core.forward_modal import (
    BoundarySources,
    InteriorSource,
    Rectangle,
    RectangleField,
    born_series,
    evaluate_modes,
    green_convolve,
    solve_boundary,
    solve_source,
)
from wgt.core.modal_core import LineFunction, gamma_transform, longitudinal_wavenumber
from wgt.errors import CutoffError, DivergenceError, DomainError


def _bump(x):
    return np.where((x >= 1.0) & (x <= 2.0), (x - 1.0) * (2.0 - x), 0.0)


@pytest.fixture
def region() -> Rectangle:
    return Rectangle(0.0, 1.0, 41, 9)


@pytest.fixture
def unit_source(region: Rectangle) -> InteriorSource:
    profile = LineFunction.from_callable(lambda x: np.sin(np.pi * x) ** 2, region.x_min, region.x_max, region.nx)
    return InteriorSource.single_mode(profile, 0, N=1)


# ---------------------------------------------------------------------------
# 格林函数
# ---------------------------------------------------------------------------
class TestGreen:

    def test_left_of_support_matches_gamma(self):
        k = 5.0
        s0 = LineFunction.from_callable(_bump, 1.0, 2.0, 201)
        s1 = LineFunction.from_callable(lambda x: 2.0 * _bump(x), 1.0, 2.0, 201)
        modes = evaluate_modes(InteriorSource([s0, s1]), k, [0.0])
        for n, s_n in enumerate((s0, s1)):
            k_n = longitudinal_wavenumber(k, n).value.real
            expected = gamma_transform(s_n, k_n)[0]
            assert modes[n, 0] == pytest.approx(expected, rel=1e-10)

    def test_far_evanescent_mode_vanishes(self):
        s = LineFunction.from_callable(lambda x: np.ones_like(x), 20.0, 21.0, 11)
        modes = evaluate_modes(InteriorSource([s, s]), 2.0, [0.0])
        assert modes[1, 0] == 0
        assert modes[0, 0] != 0

    def test_cutoff(self):
        s = LineFunction(np.ones(5), 0.0, 0.25)
        with pytest.raises(CutoffError):
            green_convolve(s, 0.0, np.linspace(0.0, 1.0, 5))

    def test_single_point_grid(self):
        s = LineFunction(np.ones(5), 0.0, 0.25)
        with pytest.raises(DomainError):
            green_convolve(s, 1.0, [0.5])


class TestFields:

    def test_solve_source_shape(self, region, unit_source):
        field = solve_source(unit_source, 3.0, region)
        assert field.values.shape == (region.nx, region.ny)
        # 只有模态0的源, 场在 y 方向为常数
        assert np.allclose(field.values, field.values[:, :1])

    def test_boundary_source_is_symmetric_in_mode_zero(self, region):
        b = LineFunction.from_callable(lambda x: np.sin(np.pi * x), region.x_min, region.x_max, region.nx)
        zero = LineFunction.zeros_like(b)
        top = solve_boundary(BoundarySources(b, zero), 2.0, region, 0)
        bottom = solve_boundary(BoundarySources(zero, b), 2.0, region, 0)
        assert np.allclose(top.values, bottom.values)

    def test_solve_source_is_linear(self, rng, region):
        def random_source() -> InteriorSource:
            return InteriorSource([LineFunction(rng.standard_normal(region.nx) + 1j * rng.standard_normal(region.nx),
                                                region.x_min, region.dx) for _ in range(3)])

        a, b = random_source(), random_source()
        alpha, beta = 0.7 - 1.3j, -2.1 + 0.4j
        combined = InteriorSource([LineFunction(alpha * sa.samples + beta * sb.samples, sa.x0, sa.dx)
                                   for sa, sb in zip(a.components, b.components)])
        k = 5.0
        lhs = solve_source(combined, k, region).values
        rhs = alpha * solve_source(a, k, region).values + beta * solve_source(b, k, region).values
        assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(rhs)

    def test_helmholtz_residual_is_second_order(self):
        """源与求值共用网格时, 内点上 D²u + k²u + s 的残差按 dx² 减小"""
        k = 5.0
        residuals = []
        for n in (101, 201):
            profile = LineFunction.from_callable(lambda x: np.sin(np.pi * x) ** 2, 0.0, 1.0, n)
            field = solve_source(InteriorSource.single_mode(profile, 0), k, Rectangle(0.0, 1.0, n, 3))
            u = field.values[:, 0]
            dx = profile.dx
            second = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / dx ** 2
            residuals.append(np.max(np.abs(second + k * k * u[1:-1] + profile.samples[1:-1])))
        assert np.log2(residuals[0] / residuals[1]) >= 1.8


# ---------------------------------------------------------------------------
# Born 级数
# ---------------------------------------------------------------------------
class TestBornSeries:

    def test_without_operators(self, region, unit_source):
        result = born_series(unit_source, None, None, None, None, 3.0, region, 1)
        assert result.converged
        assert result.iterations == 1
        assert np.allclose(result.field.values, solve_source(unit_source, 3.0, region).values)

    def test_small_operator_converges(self, region, unit_source):
        def scatter(field: RectangleField) -> RectangleField:
            return RectangleField(1e-3 * field.values, region)

        first = solve_source(unit_source, 3.0, region)
        result = born_series(unit_source, None, scatter, None, None, 3.0, region, 1, m_max=50, tol=1e-8)
        assert result.converged
        assert result.iterations > 1
        assert np.linalg.norm(result.field.values - first.values) < 1e-2 * np.linalg.norm(first.values)

    def test_large_operator_diverges(self, region, unit_source):
        def scatter(field: RectangleField) -> RectangleField:
            return RectangleField(1e4 * field.values, region)

        with pytest.raises(DivergenceError):
            born_series(unit_source, None, scatter, None, None, 3.0, region, 1, m_max=50, tol=1e-8)
