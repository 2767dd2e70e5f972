"""FDFD 求解器测试

无缺陷直波导中, 点源右端项 2ik/dx 激发的离散模态0解为

    u_i = C e^{ik'|x_i − x_s|},  cos(k' dx) = 1 − k²dx²/2,  C = k dx / sin(k' dx),

PML 足够厚时数值解应与之一致。
"""
from __future__ import annotations

import numpy as np
import pytest

from wgt.core.defect_models import BendParams, InhomogeneityMap, bend_source_density
from wgt.core.fdfd_solver import (
    BandedComplexSystem,
    DiscretizationConfig,
    assemble,
    incident_field,
    section_at,
    solve,
    solve_point_source,
    solve_vector,
    synthesize_measurements,
)
from wgt.core.modal_core import decompose
from wgt.errors import DomainError, GeometryError, SolverError
from wgt.utils import relative_l2


def _banded_dense(rng, n, kl, ku, shift=10.0):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    i, j = np.indices((n, n))
    A[(j - i > ku) | (i - j > kl)] = 0.0
    return A + shift * np.eye(n)


# ---------------------------------------------------------------------------
# 配置
# ---------------------------------------------------------------------------
class TestDiscretizationConfig:

    def test_invalid_step(self):
        with pytest.raises(DomainError):
            DiscretizationConfig(dx=0.0)

    def test_source_outside_window(self):
        with pytest.raises(GeometryError):
            DiscretizationConfig(x_left=0.5, x_right=2.0, source_x=0.0)

    def test_region_includes_pml(self, small_cfg):
        region = small_cfg.region
        assert region.x_min == pytest.approx(-1.5)
        assert region.x_max == pytest.approx(3.0)
        assert region.ny == 11


# ---------------------------------------------------------------------------
# 带状系统
# ---------------------------------------------------------------------------
class TestBandedSystem:

    def test_matvec_matches_dense(self, rng):
        A = _banded_dense(rng, 12, 2, 3)
        u = rng.standard_normal(12) + 1j * rng.standard_normal(12)
        sys = BandedComplexSystem.from_dense(A, 2, 3, np.zeros(12))
        assert np.allclose(sys.matvec(u), A @ u)

    def test_solve_matches_dense(self, rng):
        A = _banded_dense(rng, 30, 3, 2)
        b = rng.standard_normal(30) + 1j * rng.standard_normal(30)
        u = solve_vector(BandedComplexSystem.from_dense(A, 3, 2, b))
        assert np.allclose(u, np.linalg.solve(A, b))
        assert np.linalg.norm(A @ u - b) / np.linalg.norm(b) < 1e-10

    def test_zero_rhs(self, rng):
        A = _banded_dense(rng, 8, 1, 2)
        u = solve_vector(BandedComplexSystem.from_dense(A, 1, 2, np.zeros(8)))
        assert np.all(u == 0)

    def test_singular_matrix(self):
        sys = BandedComplexSystem.from_dense(np.zeros((6, 6)), 1, 2, np.ones(6))
        with pytest.raises(SolverError):
            solve_vector(sys)


# ---------------------------------------------------------------------------
# 装配
# ---------------------------------------------------------------------------
class TestAssemble:

    def test_bandwidth(self, small_cfg):
        sys = assemble(None, 3.0, small_cfg)
        ny = small_cfg.region.ny
        assert sys.kl == sys.ku == ny + 1
        assert sys.ab.shape == (2 * ny + 3, small_cfg.region.nx * ny)
        assert np.all(sys.rhs == 0)

    def test_unknown_source(self, small_cfg):
        with pytest.raises(DomainError):
            assemble(None, 3.0, small_cfg, source="plane")

    def test_wrong_rhs_shape(self, small_cfg):
        with pytest.raises(DomainError):
            assemble(None, 3.0, small_cfg, source=np.zeros((3, 3)))

    def test_defect_outside_window(self, small_cfg):
        with pytest.raises(GeometryError):
            assemble(BendParams(1.5, 10.0, 0.2), 3.0, small_cfg, source="scattered")

    def test_bend_source_lives_on_the_bend(self, small_cfg):
        bend = BendParams(0.5, 10.0, 0.05)
        k = 3.0
        sys = assemble(bend, k, small_cfg, source="scattered")
        region = small_cfg.region
        rhs = sys.rhs.reshape(region.nx, region.ny)
        inside = bend.inside(region.x)
        assert inside.any()
        assert np.all(rhs[~inside] == 0)
        i = int(np.flatnonzero(inside)[0])
        expected = -k * k * np.exp(1j * k * abs(region.x[i])) * bend_source_density(bend, region.y)
        assert np.allclose(rhs[i], expected)

    def test_inhomogeneity_source(self, small_cfg):
        region = small_cfg.region
        m = InhomogeneityMap.from_callable(lambda X, Y: 0.01 * np.exp(-((X - 1.0) / 0.1) ** 2) * Y,
                                           0.6, 1.4, 17, 11)
        k = 2.5
        sys = assemble(m, k, small_cfg, source="scattered")
        X, Y = np.meshgrid(region.x, region.y, indexing="ij")
        expected = -k * k * m.evaluate(X, Y).ravel() * incident_field(k, small_cfg)
        assert np.allclose(sys.rhs, expected, atol=1e-12)


# ---------------------------------------------------------------------------
# 求解与数据合成
# ---------------------------------------------------------------------------
class TestSolve:

    def test_point_source_mode_zero(self):
        cfg = DiscretizationConfig(dx=0.01, dy=0.05, x_left=-1.0, x_right=3.0, pml_left=3.0, pml_right=3.0,
                                   source_x=0.0)
        k = 2.0
        field = solve_point_source(k, cfg)
        dx = cfg.region.dx
        k_disc = np.arccos(1.0 - k * k * dx * dx / 2.0) / dx
        C = k * dx / np.sin(k_disc * dx)
        xs = np.linspace(-0.8, 2.8, 37)
        numeric = np.array([decompose(section_at(field, x), 0).coeffs[0] for x in xs])
        exact = C * np.exp(1j * k_disc * np.abs(xs))
        assert np.max(np.abs(numeric - exact)) < 5e-3

    @pytest.mark.parametrize("k", [5.0, 10.0])
    def test_converges_to_outgoing_wave(self, k):
        """x = 1 处的截面与 e^{ik} 的差距以二阶收敛"""
        gaps = []
        for dx in (0.02, 0.01):
            cfg = DiscretizationConfig(dx=dx, dy=0.25, x_left=-1.0, x_right=3.0, pml_left=3.0, pml_right=3.0,
                                       source_x=0.0)
            section = section_at(solve_point_source(k, cfg), 1.0)
            gaps.append(relative_l2(section.samples, np.full(section.ny, np.exp(1j * k))))
        assert gaps[1] < 0.02
        assert np.log2(gaps[0] / gaps[1]) >= 1.8

    @pytest.mark.parametrize("k", [2.0, 5.0, 10.0])
    def test_pml_reflection_is_small(self, k):
        """窗口内把模态0分解为出射与反射两支, 反射幅值不超过出射的1%"""
        cfg = DiscretizationConfig(dx=0.02, dy=0.25, x_left=-1.0, x_right=3.0, pml_left=3.0, pml_right=3.0,
                                   source_x=0.0)
        field = solve_point_source(k, cfg)
        dx = cfg.region.dx
        k_disc = np.arccos(1.0 - k * k * dx * dx / 2.0) / dx

        def split(x1, x2, sign):
            u = [decompose(section_at(field, x), 0).coeffs[0] for x in (x1, x2)]
            basis = np.array([[np.exp(sign * 1j * k_disc * x), np.exp(-sign * 1j * k_disc * x)] for x in (x1, x2)])
            outgoing, reflected = np.linalg.solve(basis, u)
            return abs(reflected) / abs(outgoing)

        assert split(1.0, 1.5, 1.0) < 0.01
        assert split(-0.9, -0.4, -1.0) < 0.01

    def test_reciprocity(self, small_cfg):
        """离散点源 1/(dx·h_j) 下, 两点互换源与观测点的场相同"""
        k = 3.0
        region = small_cfg.region
        height = np.full(region.ny, region.dy)
        height[0] = height[-1] = region.dy / 2
        points = [(40, 0), (64, 6)]
        fields = []
        for i, j in points:
            rhs = np.zeros((region.nx, region.ny), dtype=complex)
            rhs[i, j] = 1.0 / (region.dx * height[j])
            fields.append(solve(assemble(None, k, small_cfg, source=rhs)).values)
        (ia, ja), (ib, jb) = points
        forward, backward = fields[0][ib, jb], fields[1][ia, ja]
        assert abs(forward - backward) < 1e-8 * abs(forward)

    def test_empty_guide_has_no_scattered_data(self, small_cfg):
        data = synthesize_measurements(None, [2.0, 4.0], measure_x=1.0, n_modes=0, cfg=small_cfg)
        assert len(data) == 2
        assert np.all(data.data == 0)
        assert data.provenance == "fdfd"

    def test_guard_band(self, small_cfg):
        data = synthesize_measurements(None, [2.0, 3.1], measure_x=1.0, n_modes=0, cfg=small_cfg, guard=0.2)
        assert len(data) == 1

    def test_measurement_section_order(self, small_cfg):
        with pytest.raises(GeometryError):
            synthesize_measurements(BendParams(0.5, 10.0, 0.05), [2.0], measure_x=1.0, n_modes=0, cfg=small_cfg)

    def test_parallel_matches_serial(self, small_cfg):
        bend = BendParams(1.0, 10.0, 0.05)
        serial = synthesize_measurements(bend, [1.5, 2.5], 0.5, 0, small_cfg, jobs=1)
        parallel = synthesize_measurements(bend, [1.5, 2.5], 0.5, 0, small_cfg, jobs=2)
        assert np.allclose(serial.data, parallel.data, rtol=1e-12, atol=0)
        assert np.all(serial.data != 0)

    def test_solve_without_region(self, rng):
        A = _banded_dense(rng, 6, 1, 1)
        with pytest.raises(DomainError):
            solve(BandedComplexSystem.from_dense(A, 1, 1, np.ones(6)))
