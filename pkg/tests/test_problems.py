import numpy as np
import pytest

from hdsa.problems import (
    EvalPoint,
    ProblemError,
    SetPartition,
    build_advdiff_inversion_1d,
    build_diffusion_control_1d,
    build_logistic_toy,
    check_derivatives,
)
from hdsa.problems.fem1d import (
    advection_matrix_neumann,
    hat_interpolation,
    mass_matrix,
    stiffness_matrix_neumann,
)


def random_point(problem, seed=0, scale=0.5):
    rng = np.random.default_rng(seed)
    d = problem.dims
    return EvalPoint(
        u=scale * rng.standard_normal(d.n_u),
        z=scale * rng.standard_normal(d.n_z),
        lam=scale * rng.standard_normal(d.n_lambda),
        theta=0.3 * rng.standard_normal(d.n_theta),
    )


class TestFem1d:
    def test_mass_matrix_total_mass(self):
        m = mass_matrix(17, length=2.0).toarray()
        ones = np.ones(17)
        assert ones @ m @ ones == pytest.approx(2.0)

    def test_stiffness_annihilates_constants(self):
        k = stiffness_matrix_neumann(12).toarray()
        np.testing.assert_allclose(k @ np.ones(12), 0.0, atol=1e-14)

    def test_advection_skew_part(self):
        c = advection_matrix_neumann(10).toarray()
        # int phi_i phi_j' over (0,1): row sums vanish, c + c^T is boundary-only
        np.testing.assert_allclose(c.sum(axis=1), 0.0, atol=1e-14)
        s = c + c.T
        assert abs(s[0, 0] + 1.0) < 1e-14 and abs(s[-1, -1] - 1.0) < 1e-14
        np.testing.assert_allclose(s[1:-1, :], 0.0, atol=1e-14)

    def test_hat_interpolation_partition_of_unity(self):
        pts = np.linspace(0.0, 1.0, 33)
        phi = hat_interpolation(pts, 7)
        np.testing.assert_allclose(phi.sum(axis=1), 1.0, atol=1e-14)


class TestPartition:
    def test_overlap_rejected(self):
        with pytest.raises(ProblemError):
            SetPartition((("a", 0, 3), ("b", 2, 5)))

    def test_cover_validation(self):
        part = SetPartition((("a", 0, 2), ("b", 2, 4)))
        part.validate_cover(4)
        with pytest.raises(ProblemError):
            part.validate_cover(5)


@pytest.mark.parametrize(
    "build",
    [
        build_logistic_toy,
        lambda: build_diffusion_control_1d(n_state=24, n_param=6),
        lambda: build_advdiff_inversion_1d(n_space=16, n_steps=8, n_window=5),
    ],
    ids=["logistic", "diffusion", "advdiff"],
)
def test_derivative_blocks_consistent(build):
    problem = build()
    point = random_point(problem, seed=1)
    report = check_derivatives(problem, point, h=1e-4)
    assert report.passed, report.failures()


def test_corrupt_derivative_flag_caught():
    problem = build_logistic_toy(corrupt_derivative=True)
    point = random_point(problem, seed=2)
    report = check_derivatives(problem, point, h=1e-4)
    assert not report.passed
    assert "L_ztheta" in report.failures()


class TestDiffusion:
    def test_forward_matches_dense_assembly(self):
        p = build_diffusion_control_1d(n_state=24, n_param=6)
        rng = np.random.default_rng(3)
        theta = 0.4 * rng.standard_normal(6)
        z = rng.standard_normal(24)
        pt = EvalPoint(np.zeros(24), z, np.zeros(24), theta)
        u = p.state_jacobian_solve(pt, p.mass_dense() @ z)
        np.testing.assert_allclose(
            p.stiffness_dense(theta) @ u, p.mass_dense() @ z, atol=1e-12
        )
        np.testing.assert_allclose(p.residual(u, z, theta), 0.0, atol=1e-12)

    def test_ellipticity_guard(self):
        p = build_diffusion_control_1d(n_state=24, n_param=6, amplitude=0.5)
        with pytest.raises(ProblemError):
            p.residual(np.zeros(24), np.zeros(24), -3.0 * np.ones(6))

    def test_per_parameter_amplitude(self):
        amp = [0.3, 0.2, 0.1, 0.05]
        p = build_diffusion_control_1d(n_state=16, n_param=4, amplitude=amp)
        point = random_point(p, seed=4)
        report = check_derivatives(p, point, h=1e-4)
        assert report.passed, report.failures()

    def test_bad_amplitude_length(self):
        with pytest.raises(ProblemError):
            build_diffusion_control_1d(n_state=16, n_param=4, amplitude=[0.1, 0.2])


class TestAdvDiff:
    def test_state_solve_inverts_jacobian(self):
        p = build_advdiff_inversion_1d(n_space=16, n_steps=8, n_window=5)
        rng = np.random.default_rng(5)
        pt = random_point(p, seed=5)
        rhs = rng.standard_normal(p.dims.n_u)
        u = p.state_jacobian_solve(pt, rhs)
        np.testing.assert_allclose(p.c_u(pt, u), rhs, atol=1e-10)
        w = p.state_jacobian_adjoint_solve(pt, rhs)
        np.testing.assert_allclose(p.c_u_adj(pt, w), rhs, atol=1e-10)

    def test_mass_conservation_pure_diffusion(self):
        # with zero velocity and zero-flux boundaries, the injected source
        # mass is conserved by backward Euler
        p = build_advdiff_inversion_1d(
            n_space=24, n_steps=10, vel0=0.0, n_window=5, noise_level=0.0
        )
        theta = np.zeros(p.dims.n_theta)
        z = p.true_source
        pt = EvalPoint(np.zeros(p.dims.n_u), z, np.zeros(p.dims.n_u), theta)
        u = p.state_jacobian_solve(pt, -p.residual(np.zeros(p.dims.n_u), z, theta))
        c = u.reshape(p.n_steps, p.n_space)
        mass = p._mass @ np.ones(p.n_space)
        total = c[-1] @ mass
        injected = p.dt * p._weights(theta).sum() * (p._mass @ z) @ np.ones(p.n_space)
        assert total == pytest.approx(injected, rel=1e-10)

    def test_window_guard(self):
        with pytest.raises(ProblemError):
            build_advdiff_inversion_1d(window=(0.4, 0.2))

    def test_data_deterministic(self):
        p1 = build_advdiff_inversion_1d(n_space=16, n_steps=8, n_window=5)
        p2 = build_advdiff_inversion_1d(n_space=16, n_steps=8, n_window=5)
        np.testing.assert_array_equal(p1.data, p2.data)
