import numpy as np
import pytest

from hdsa.operators import (
    KktConfig,
    KktOperator,
    ParamJacobianOperator,
    ProjectedSensitivityOperator,
    SensitivityOperator,
    SolveError,
)
from hdsa.optimizer import solve_optimization
from hdsa.problems import build_diffusion_control_1d, build_logistic_toy


@pytest.fixture(scope="module")
def diffusion_point():
    problem = build_diffusion_control_1d(n_state=24, n_param=6)
    rng = np.random.default_rng(0)
    theta = 0.2 * rng.standard_normal(6)
    opt = solve_optimization(problem, theta)
    return problem, opt.as_eval_point()


@pytest.fixture(scope="module")
def logistic_point():
    problem = build_logistic_toy()
    opt = solve_optimization(problem, np.array([0.5, 0.5]))
    return problem, opt.as_eval_point()


class TestKktOperator:
    def test_dense_is_symmetric(self, diffusion_point):
        problem, point = diffusion_point
        k = KktOperator(problem, point).dense()
        np.testing.assert_allclose(k, k.T, atol=1e-10)

    def test_apply_matches_dense(self, diffusion_point):
        problem, point = diffusion_point
        op = KktOperator(problem, point)
        k = op.dense()
        rng = np.random.default_rng(1)
        v = rng.standard_normal(op.dim)
        np.testing.assert_allclose(op.apply(v), k @ v, rtol=1e-12, atol=1e-12)

    def test_self_adjoint_action(self, diffusion_point):
        problem, point = diffusion_point
        op = KktOperator(problem, point)
        rng = np.random.default_rng(2)
        v = rng.standard_normal(op.dim)
        w = rng.standard_normal(op.dim)
        lhs = float(op.apply(v) @ w)
        rhs = float(v @ op.apply(w))
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)

    @pytest.mark.parametrize("method", ["dense", "schur", "minres"])
    def test_solve_paths_agree(self, diffusion_point, method):
        problem, point = diffusion_point
        rng = np.random.default_rng(3)
        rhs = rng.standard_normal(problem.dims.n_stacked)
        ref = KktOperator(problem, point, KktConfig(method="dense"))
        x_ref, _ = ref.solve(rhs)
        op = KktOperator(problem, point, KktConfig(method=method, tol=1e-10))
        x, stats = op.solve(rhs)
        assert stats.converged
        np.testing.assert_allclose(
            x, x_ref, atol=1e-6 * np.linalg.norm(x_ref)
        )

    def test_solve_residual_small(self, diffusion_point):
        problem, point = diffusion_point
        op = KktOperator(problem, point)
        rng = np.random.default_rng(4)
        rhs = rng.standard_normal(op.dim)
        x, _ = op.solve(rhs)
        k = op.dense()
        r = np.linalg.norm(rhs - k @ x)
        assert r <= 1e-8 * (np.linalg.norm(k, 2) * np.linalg.norm(x))

    def test_unknown_method_rejected(self, logistic_point):
        problem, point = logistic_point
        op = KktOperator(problem, point, KktConfig(method="qr"))
        with pytest.raises(SolveError):
            op.solve(np.ones(op.dim))


class TestParamJacobian:
    def test_adjoint_consistency(self, diffusion_point):
        problem, point = diffusion_point
        b = ParamJacobianOperator(problem, point)
        rng = np.random.default_rng(5)
        phi = rng.standard_normal(b.in_dim)
        w = rng.standard_normal(b.out_dim)
        lhs = float(b.apply(phi) @ w)
        rhs = float(phi @ b.apply_adjoint(w))
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)


class TestSensitivityOperator:
    def test_logistic_matches_analytic_values(self, logistic_point):
        problem, point = logistic_point
        d = SensitivityOperator(problem, point).dense()
        # chain rule on the reduced stationarity condition at the optimum
        np.testing.assert_allclose(
            d.ravel(), [-9.98954, -3.11988], atol=5e-4
        )

    def test_transpose_consistency(self, diffusion_point):
        problem, point = diffusion_point
        sens = SensitivityOperator(problem, point)
        rng = np.random.default_rng(6)
        phi = rng.standard_normal(sens.n_theta)
        w = rng.standard_normal(sens.n_z)
        lhs = float(sens.apply(phi) @ w)
        rhs = float(phi @ sens.apply_transpose(w))
        assert abs(lhs - rhs) <= 1e-8 * max(abs(lhs), 1.0)

    def test_dense_matches_apply(self, diffusion_point):
        problem, point = diffusion_point
        sens = SensitivityOperator(problem, point)
        d = sens.dense()
        rng = np.random.default_rng(7)
        phi = rng.standard_normal(sens.n_theta)
        np.testing.assert_allclose(sens.apply(phi), d @ phi, atol=1e-9)

    def test_directional_sensitivity_scale_invariant(self, diffusion_point):
        problem, point = diffusion_point
        sens = SensitivityOperator(problem, point)
        rng = np.random.default_rng(8)
        phi = rng.standard_normal(sens.n_theta)
        a = sens.directional_sensitivity(phi)
        b = sens.directional_sensitivity(7.3 * phi)
        assert a == pytest.approx(b, rel=1e-10)

    def test_projected_operator_masks_coordinates(self, diffusion_point):
        problem, point = diffusion_point
        sens = SensitivityOperator(problem, point)
        proj = ProjectedSensitivityOperator(sens, np.array([0, 1]))
        rng = np.random.default_rng(9)
        phi = rng.standard_normal(sens.n_theta)
        masked = phi.copy()
        masked[2:] = 0.0
        np.testing.assert_allclose(proj.apply(phi), sens.apply(masked), atol=1e-10)
        w = rng.standard_normal(sens.n_z)
        back = proj.apply_transpose(w)
        np.testing.assert_allclose(back[2:], 0.0, atol=0.0)
