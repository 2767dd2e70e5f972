"""反演核心测试

实剖面 y 的惩罚最小二乘解满足正规方程

    Re(γᴴγ + λGᵀG) y = Re(γᴴd),

小规模问题直接用稠密矩阵求解作参照。条件数研究的参照值:
r = 0.02, ω0 = π 时 cond(M Mᴴ) ≈ 1.02。
"""
from __future__ import annotations

import numpy as np
import pytest

from wgt.core.defect_models import BendParams, BumpProfiles, InhomogeneityMap, born_model_measurements
from wgt.core.inversion import (
    ConditioningGrid,
    GammaOperatorSpec,
    RegularizationConfig,
    conditioning_study,
    discrete_gradient,
    discrete_gradient_adjoint,
    gamma_adjoint,
    gamma_apply,
    gamma_targets,
    gram_matrix,
    objective_and_gradient,
    positivity_projected_descent,
    projected_modal_descent,
    recover_bend,
    recover_bump,
    recover_inhomogeneity,
    source_recovery,
    steepest_descent,
)
from wgt.datasets import FrequencyDataset
from wgt.errors import DatasetError, DomainError
from wgt.utils import relative_l2


def _parabola(x):
    return np.where((x >= 0.8) & (x <= 1.2), (x - 0.8) * (1.2 - x) / 0.04, 0.0)


@pytest.fixture
def small_spec() -> GammaOperatorSpec:
    return GammaOperatorSpec.from_window(0.0, 1.0, 6, np.linspace(1.0, 20.0, 40))


@pytest.fixture
def small_data(rng, small_spec) -> np.ndarray:
    return rng.standard_normal(small_spec.n_omega) + 1j * rng.standard_normal(small_spec.n_omega)


# ---------------------------------------------------------------------------
# 离散算子
# ---------------------------------------------------------------------------
class TestOperators:

    def test_spec_validation(self):
        with pytest.raises(DomainError):
            GammaOperatorSpec.from_window(1.0, 0.0, 5, [1.0])
        with pytest.raises(DomainError):
            GammaOperatorSpec.from_window(0.0, 1.0, 5, [2.0, 1.0])
        with pytest.raises(DomainError):
            GammaOperatorSpec.from_window(0.0, 1.0, 1, [1.0])

    def test_gamma_adjoint_identity(self, rng):
        spec = GammaOperatorSpec.from_window(-0.5, 1.5, 17, np.linspace(0.3, 9.0, 23))
        y = rng.standard_normal(17) + 1j * rng.standard_normal(17)
        d = rng.standard_normal(23) + 1j * rng.standard_normal(23)
        assert np.vdot(gamma_apply(y, spec), d) == pytest.approx(np.vdot(y, gamma_adjoint(d, spec)), rel=1e-12)

    def test_gradient_adjoint_identity(self, rng):
        y = rng.standard_normal(9) + 1j * rng.standard_normal(9)
        z = rng.standard_normal(9) + 1j * rng.standard_normal(9)
        assert np.vdot(discrete_gradient(y), z) == pytest.approx(np.vdot(y, discrete_gradient_adjoint(z)),
                                                                 rel=1e-12)

    def test_gradient_is_cyclic(self):
        assert np.allclose(discrete_gradient(np.array([1.0, 2.0, 4.0])), [-3.0, 1.0, 2.0])

    def test_shape_mismatch(self, small_spec):
        with pytest.raises(DomainError):
            gamma_apply(np.zeros(5), small_spec)
        with pytest.raises(DomainError):
            gamma_adjoint(np.zeros(3), small_spec)


# ---------------------------------------------------------------------------
# 目标函数与下降
# ---------------------------------------------------------------------------
class TestObjective:

    def test_gradient_matches_finite_differences(self, rng, small_spec, small_data):
        cfg = RegularizationConfig(lam=0.05)
        y = rng.standard_normal(small_spec.n_x)
        _, grad = objective_and_gradient(y, small_data, small_spec, cfg)
        eps = 1e-6
        fd = np.empty_like(y)
        for i in range(y.size):
            e = np.zeros_like(y)
            e[i] = eps
            J_plus, _ = objective_and_gradient(y + e, small_data, small_spec, cfg)
            J_minus, _ = objective_and_gradient(y - e, small_data, small_spec, cfg)
            fd[i] = (J_plus - J_minus) / (2.0 * eps)
        assert np.allclose(grad, fd, rtol=1e-6, atol=1e-8)

    def test_negative_lambda(self):
        with pytest.raises(DomainError):
            RegularizationConfig(lam=-1.0)


class TestSteepestDescent:

    def test_trace_is_monotone(self, small_spec, small_data):
        result = steepest_descent(small_data, small_spec, RegularizationConfig(lam=0.05, max_iter=200))
        trace = np.array(result.objective_trace)
        assert len(trace) == result.iterations + 1
        assert np.all(np.diff(trace) <= 0)

    def test_matches_normal_equations(self, small_spec, small_data):
        lam = 0.05
        cfg = RegularizationConfig(lam=lam, max_iter=20000, grad_tol=1e-10)
        result = steepest_descent(small_data, small_spec, cfg)

        M = small_spec.matrix
        G = np.eye(small_spec.n_x) - np.roll(np.eye(small_spec.n_x), 1, axis=0)
        lhs = (M.conj().T @ M).real + lam * G.T @ G
        rhs = (M.conj().T @ small_data).real
        expected = np.linalg.solve(lhs, rhs)
        assert np.allclose(result.profile, expected, rtol=1e-4, atol=1e-4)

    def test_zero_data(self, small_spec):
        result = steepest_descent(np.zeros(small_spec.n_omega), small_spec, RegularizationConfig())
        assert result.converged
        assert result.iterations == 0
        assert np.all(result.profile == 0)

    def test_data_length_mismatch(self, small_spec):
        with pytest.raises(DomainError):
            steepest_descent(np.zeros(3), small_spec, RegularizationConfig())

    def test_positivity(self, small_spec, small_data):
        result = positivity_projected_descent(small_data, small_spec, RegularizationConfig(lam=0.05, max_iter=300))
        assert np.all(result.profile >= 0)
        assert np.all(np.diff(result.objective_trace) <= 0)


class TestModalProjection:

    def test_mismatched_grids(self, small_data):
        a = GammaOperatorSpec.from_window(0.0, 1.0, 6, np.linspace(1.0, 20.0, 40))
        b = GammaOperatorSpec.from_window(0.0, 2.0, 6, np.linspace(1.0, 20.0, 40))
        with pytest.raises(DomainError):
            projected_modal_descent({0: (a, small_data), 1: (b, small_data)}, RegularizationConfig(), 11)

    def test_empty_problem(self):
        assert projected_modal_descent({}, RegularizationConfig(), 11) == {}


# ---------------------------------------------------------------------------
# 数据读入
# ---------------------------------------------------------------------------
class TestTargets:

    def test_bend_target_divides_by_k(self):
        data = FrequencyDataset.from_triples([(0, 2.0, 4.0, 2.0 + 4.0j)], provenance="born-model",
                                             defect_type="bend")
        omega, target = gamma_targets(data, 0, "bend")
        assert omega[0] == 4.0
        assert target[0] == pytest.approx(1.0 + 2.0j)

    def test_bend_uses_mode_zero_only(self):
        data = FrequencyDataset.from_triples([(1, 4.0, 6.0, 1.0)], provenance="external", defect_type="bend")
        with pytest.raises(DatasetError):
            gamma_targets(data, 1, "bend")

    def test_unknown_kind(self):
        data = FrequencyDataset.from_triples([(0, 2.0, 4.0, 1.0)], provenance="external")
        with pytest.raises(DatasetError):
            gamma_targets(data, 0, "crack")


# ---------------------------------------------------------------------------
# 弯管
# ---------------------------------------------------------------------------
class TestRecoverBend:

    def test_model_consistent_round_trip(self):
        truth = BendParams(2.0, 10.0, 0.1)
        data = born_model_measurements(truth, np.linspace(0.01, 40.0, 100))
        fit = recover_bend(data, n_bends=1, window=(0.0, 5.0))
        assert not fit.low_confidence
        assert len(fit.bends) == 1
        bend = fit.bends[0]
        assert bend.x_c == pytest.approx(truth.x_c, rel=1e-3)
        assert bend.r == pytest.approx(truth.r, rel=1e-3)
        assert bend.theta == pytest.approx(truth.theta, rel=1e-3)
        assert fit.residual < 1e-3

    def test_zero_data(self):
        rows = [(0, k, 2.0 * k, 0.0) for k in (1.0, 2.0, 3.0)]
        fit = recover_bend(FrequencyDataset.from_triples(rows, provenance="born-model", defect_type="bend"))
        assert fit.bends == []
        assert fit.low_confidence

    def test_requires_mode_zero(self):
        data = FrequencyDataset.from_triples([(1, 4.0, 6.0, 1.0)], provenance="external", defect_type="bend")
        with pytest.raises(DatasetError):
            recover_bend(data)


# ---------------------------------------------------------------------------
# 凸起与非均匀介质
# ---------------------------------------------------------------------------
class TestRecoverProfiles:

    def test_bump_without_mode_one_is_partial(self):
        def h(x):
            return np.where((x >= 3.0) & (x <= 5.0), 0.1 * (x - 3.0) ** 2 * (5.0 - x) ** 2, 0.0)

        bump = BumpProfiles.from_callables(lambda x: np.zeros_like(x), h, 2.5, 5.5, 301)
        data = born_model_measurements(bump, np.linspace(0.5, 3.0, 20), n_modes=1)
        recovery = recover_bump(data, (2.5, 5.5, 61), RegularizationConfig(lam=1e-3, max_iter=100))
        assert recovery.partial
        assert sorted(recovery.results) == [0]
        assert np.all(recovery.g.samples == 0)

    def test_bump_two_mode_round_trip(self):
        """剖面与反演窗口同网格, 两个模态的频带都覆盖一个完整的混叠周期, λ=0 时收敛到离散精确解"""
        def h(x):
            return np.where((x >= 3.5) & (x <= 4.5), 1.6 * (x - 3.5) ** 2 * (4.5 - x) ** 2, 0.0)

        def g(x):
            return np.where((x >= 3.6) & (x <= 4.4), -4.0 * (x - 3.6) ** 2 * (4.4 - x) ** 2, 0.0)

        bump = BumpProfiles.from_callables(g, h, 3.0, 5.0, 41)
        data = born_model_measurements(bump, np.linspace(0.1, 70.0, 600), n_modes=1)
        omegas, target = gamma_targets(data, 1, "bump")
        g_d, h_d = bump.derivatives()
        s1 = h_d.samples + g_d.samples
        expected = 0.5j * bump.h.dx * np.exp(1j * np.outer(omegas, bump.x)) @ s1
        assert np.allclose(target, expected, rtol=0, atol=1e-10)

        cfg = RegularizationConfig(lam=0.0, max_iter=20000, grad_tol=1e-10)
        recovery = recover_bump(data, (3.0, 5.0, 41), cfg)
        assert not recovery.partial
        assert sorted(recovery.results) == [0, 1]
        assert relative_l2(recovery.h.samples, h_d.antiderivative().samples.real) < 1e-4
        assert relative_l2(recovery.g.samples, g_d.antiderivative().samples.real) < 1e-4
        assert relative_l2(recovery.h.samples, bump.h.samples.real) < 0.05
        assert relative_l2(recovery.g.samples, bump.g.samples.real) < 0.05

    def test_inhomogeneity_skips_cut_off_modes(self):
        m = InhomogeneityMap.from_callable(lambda X, Y: 0.01 * np.exp(-((X - 1.0) / 0.1) ** 2), 0.6, 1.4, 41, 11)
        data = born_model_measurements(m, np.linspace(0.5, 3.0, 20), n_modes=1)
        recovery = recover_inhomogeneity(data, (0.6, 1.4, 41), 1, RegularizationConfig(lam=1e-3, max_iter=100),
                                         ny=21)
        assert recovery.skipped == [1]
        assert recovery.map.values.shape == (41, 21)

    def test_inhomogeneity_positivity(self):
        m = InhomogeneityMap.from_callable(lambda X, Y: 0.01 * np.exp(-((X - 1.0) / 0.1) ** 2), 0.6, 1.4, 41, 11)
        data = born_model_measurements(m, np.linspace(3.5, 8.0, 20), n_modes=1)
        cfg = RegularizationConfig(lam=1e-3, max_iter=100, positivity=True)
        recovery = recover_inhomogeneity(data, (0.6, 1.4, 41), 1, cfg, ny=21)
        assert recovery.skipped == []
        assert np.all(recovery.map.values >= 0)


# ---------------------------------------------------------------------------
# 源重建
# ---------------------------------------------------------------------------
class TestSourceRecovery:

    def test_parabola(self):
        omegas = np.linspace(0.01, 50.0, 1000)
        cfg = RegularizationConfig(lam=1e-3, max_iter=5000, grad_tol=1e-6)
        result, error = source_recovery(_parabola, (0.8, 1.2), omegas, (0.5, 1.5, 501), cfg)
        assert error < 0.05
        assert result.meta["relative_error"] == error
        assert np.all(np.diff(result.objective_trace) <= 0)

    def test_positivity_constraint(self):
        omegas = np.linspace(0.01, 50.0, 400)
        cfg = RegularizationConfig(lam=1e-3, max_iter=500, positivity=True)
        result, _ = source_recovery(_parabola, (0.8, 1.2), omegas, (0.5, 1.5, 101), cfg)
        assert np.all(result.profile >= 0)


# ---------------------------------------------------------------------------
# 条件数
# ---------------------------------------------------------------------------
class TestConditioning:

    def test_gram_is_hermitian(self):
        G = gram_matrix(0.05, np.pi, ConditioningGrid())
        assert np.allclose(G, G.conj().T)
        assert np.all(np.linalg.eigvalsh(G) > 0)

    def test_small_support_reference(self):
        table = conditioning_study([0.02], [np.pi])
        assert table.loc[0, "cond"] == pytest.approx(1.0202, rel=1e-2)
        assert not table.loc[0, "singular"]

    def test_grows_with_support(self):
        table = conditioning_study([0.02, 0.1, 0.5], [np.pi])
        assert list(table["r"]) == [0.02, 0.1, 0.5]
        assert table["cond"].is_monotonic_increasing

    def test_gap_beyond_grid(self):
        with pytest.raises(DomainError):
            gram_matrix(0.02, 1e6, ConditioningGrid())
