"""Transient 1D advection-diffusion source inversion with backward Euler.

State: concentration at every time step, stacked into one vector. The
stationary spatial source z is active on a fixed time window and recovered
from sparse noisy observations:

min 1/2 sum_{i in obs} ||S c_i - d_i||^2 + alpha/2 z^T M z
s.t. M (c_i - c_{i-1}) + dt A(theta) c_i = dt w_i(theta) M z,  c_0 = 0

A(theta) = eps(theta) K + vel(theta) C with zero-flux boundaries. Uncertain
parameters: a diffusion scalar, a velocity scalar, and the temporal weights of
the source window.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from ..linalg import SpdOperator
from .base import EvalPoint, ProblemDefinition, ProblemDims, ProblemError, SetPartition, WeightedSpaces
from .fem1d import (
    advection_matrix_neumann,
    evaluate_preset,
    hat_interpolation,
    mass_matrix,
    stiffness_matrix_neumann,
)


class AdvDiffInversionProblem(ProblemDefinition):
    name = "advdiff_inversion_1d"

    def __init__(
        self,
        n_space: int = 64,
        n_steps: int = 40,
        t_final: float = 0.5,
        eps0: float = 0.05,
        vel0: float = 1.0,
        diff_amplitude: float = 0.2,
        vel_amplitude: float = 0.2,
        window: tuple[float, float] = (0.05, 0.35),
        n_window: int = 14,
        window_amplitude: float = 0.2,
        alpha: float = 0.0005,
        sensors: list[float] | None = None,
        obs_every: int = 1,
        noise_level: float = 0.03,
        data_seed: int = 2025,
        data_refine: int = 2,
        true_source: dict | None = None,
    ):
        if eps0 <= 0:
            raise ProblemError("nominal diffusion coefficient must be positive")
        if not (0.0 <= window[0] < window[1] <= t_final):
            raise ProblemError("source window must lie inside (0, t_final)")
        if n_window < 2:
            raise ProblemError("need at least 2 source-window parameters")
        self.n_space = n_space
        self.n_steps = n_steps
        self.t_final = t_final
        self.dt = t_final / n_steps
        self.eps0 = eps0
        self.vel0 = vel0
        self.diff_amplitude = diff_amplitude
        self.vel_amplitude = vel_amplitude
        self.window = window
        self.n_window = n_window
        self.window_amplitude = window_amplitude
        self.alpha = alpha
        self.noise_level = noise_level
        self.data_seed = data_seed

        n_theta = 2 + n_window
        self._dims = ProblemDims(
            n_u=n_space * n_steps, n_z=n_space, n_theta=n_theta, n_lambda=n_space * n_steps
        )
        self.x_nodes = np.linspace(0.0, 1.0, n_space)

        self._mass = mass_matrix(n_space).toarray()
        self._stiff = stiffness_matrix_neumann(n_space).toarray()
        self._adv = advection_matrix_neumann(n_space).toarray()

        # temporal source profile: chi on the window plus hat-basis weights
        times = self.dt * np.arange(1, n_steps + 1)
        self.times = times
        self._chi = ((times >= window[0]) & (times <= window[1])).astype(float)
        psi = np.zeros((n_steps, n_window))
        in_win = self._chi > 0.0
        if not np.any(in_win):
            raise ProblemError("source window contains no time steps")
        win_nodes = np.linspace(window[0], window[1], n_window)
        rel = (times[in_win] - window[0]) / (window[1] - window[0])
        psi[in_win] = hat_interpolation(rel, n_window)
        self._psi = psi
        self._win_nodes = win_nodes

        if sensors is None:
            sensors = list(np.linspace(0.0, 1.0, 11))
        self.sensors = np.asarray(sensors, dtype=float)
        self._s_obs = hat_interpolation(self.sensors, n_space)
        self.obs_steps = np.arange(0, n_steps, obs_every)  # 0-based step indices
        self.n_sensors = self.sensors.shape[0]

        m_theta = scipy.linalg.block_diag(
            np.eye(2), mass_matrix(n_window, length=window[1] - window[0]).toarray()
        )
        partition = SetPartition(
            (
                ("diffusion", 0, 1),
                ("velocity", 1, 2),
                ("source_window", 2, n_theta),
            )
        )
        self._spaces = WeightedSpaces(
            m_theta=SpdOperator(m_theta),
            m_z=SpdOperator(self._mass),
            partition=partition,
        )

        true_source = true_source if true_source is not None else {
            "preset": "gaussian-bump",
            "center": 0.3,
            "width": 0.05,
            "amplitude": 1.0,
        }
        self._true_source_spec = dict(true_source)
        self.true_source = evaluate_preset(true_source, self.x_nodes)
        self.data = self._generate_data(max(1, data_refine))

    # Coefficients -----------------------------------------------------------

    def _coeffs(self, theta: np.ndarray) -> tuple[float, float]:
        eps = self.eps0 * (1.0 + self.diff_amplitude * theta[0])
        vel = self.vel0 * (1.0 + self.vel_amplitude * theta[1])
        if eps <= 0.0:
            raise ProblemError("diffusion coefficient is non-positive for this theta")
        return eps, vel

    def _weights(self, theta: np.ndarray) -> np.ndarray:
        return self._chi + self.window_amplitude * (self._psi @ theta[2:])

    def _system_matrix(self, theta: np.ndarray) -> np.ndarray:
        eps, vel = self._coeffs(theta)
        return self._mass + self.dt * (eps * self._stiff + vel * self._adv)

    def _blocks(self, v: np.ndarray) -> np.ndarray:
        return v.reshape(self.n_steps, self.n_space)

    # Synthetic data ----------------------------------------------------------

    def _generate_data(self, refine: int) -> np.ndarray:
        nx = refine * (self.n_space - 1) + 1
        x = np.linspace(0.0, 1.0, nx)
        mass = mass_matrix(nx).toarray()
        stiff = stiffness_matrix_neumann(nx).toarray()
        adv = advection_matrix_neumann(nx).toarray()
        g = mass + self.dt * (self.eps0 * stiff + self.vel0 * adv)
        lu = scipy.linalg.lu_factor(g)
        z_true = evaluate_preset(self._true_source_spec, x)
        s_obs = hat_interpolation(self.sensors, nx)
        c = np.zeros(nx)
        data = np.zeros((self.obs_steps.shape[0], self.n_sensors))
        obs_set = {int(s): r for r, s in enumerate(self.obs_steps)}
        for i in range(self.n_steps):
            rhs = mass @ c + self.dt * self._chi[i] * (mass @ z_true)
            c = scipy.linalg.lu_solve(lu, rhs)
            if i in obs_set:
                data[obs_set[i]] = s_obs @ c
        if self.noise_level > 0.0:
            rng = np.random.default_rng(np.random.SeedSequence(self.data_seed))
            data = data + self.noise_level * np.abs(data) * rng.standard_normal(data.shape)
        return data

    # Problem surface ----------------------------------------------------------

    @property
    def dims(self) -> ProblemDims:
        return self._dims

    @property
    def spaces(self) -> WeightedSpaces:
        return self._spaces

    def objective(self, u, z, theta) -> float:
        c = self._blocks(u)
        misfit = 0.0
        for r, i in enumerate(self.obs_steps):
            res = self._s_obs @ c[i] - self.data[r]
            misfit += float(res @ res)
        return 0.5 * misfit + 0.5 * self.alpha * float(z @ (self._mass @ z))

    def residual(self, u, z, theta) -> np.ndarray:
        c = self._blocks(u)
        g = self._system_matrix(theta)
        w = self._weights(theta)
        mz = self._mass @ z
        out = np.empty_like(c)
        prev = np.zeros(self.n_space)
        for i in range(self.n_steps):
            out[i] = g @ c[i] - self._mass @ prev - self.dt * w[i] * mz
            prev = c[i]
        return out.ravel()

    def obj_grad_u(self, u, z, theta) -> np.ndarray:
        c = self._blocks(u)
        out = np.zeros_like(c)
        for r, i in enumerate(self.obs_steps):
            out[i] = self._s_obs.T @ (self._s_obs @ c[i] - self.data[r])
        return out.ravel()

    def obj_grad_z(self, u, z, theta) -> np.ndarray:
        return self.alpha * (self._mass @ z)

    def obj_grad_theta(self, u, z, theta) -> np.ndarray:
        return np.zeros(self.dims.n_theta)

    def c_u(self, p, v) -> np.ndarray:
        c = self._blocks(v)
        g = self._system_matrix(p.theta)
        out = np.empty_like(c)
        prev = np.zeros(self.n_space)
        for i in range(self.n_steps):
            out[i] = g @ c[i] - self._mass @ prev
            prev = c[i]
        return out.ravel()

    def c_u_adj(self, p, w) -> np.ndarray:
        lam = self._blocks(w)
        g = self._system_matrix(p.theta)
        out = np.empty_like(lam)
        nxt = np.zeros(self.n_space)
        for i in range(self.n_steps - 1, -1, -1):
            out[i] = g.T @ lam[i] - self._mass @ nxt
            nxt = lam[i]
        return out.ravel()

    def c_z(self, p, v) -> np.ndarray:
        w = self._weights(p.theta)
        mv = self._mass @ v
        return (-self.dt * w[:, None] * mv[None, :]).ravel()

    def c_z_adj(self, p, w) -> np.ndarray:
        lam = self._blocks(w)
        wt = self._weights(p.theta)
        return -self.dt * (self._mass @ (wt @ lam))

    def c_theta(self, p, v) -> np.ndarray:
        c = self._blocks(p.u)
        dk = self.eps0 * self.diff_amplitude * v[0]
        dv = self.vel0 * self.vel_amplitude * v[1]
        dw = self.window_amplitude * (self._psi @ v[2:])
        mz = self._mass @ p.z
        out = self.dt * (
            dk * (c @ self._stiff.T) + dv * (c @ self._adv.T) - dw[:, None] * mz[None, :]
        )
        return out.ravel()

    def c_theta_adj(self, p, w) -> np.ndarray:
        c = self._blocks(p.u)
        lam = self._blocks(w)
        mz = self._mass @ p.z
        out = np.zeros(self.dims.n_theta)
        out[0] = self.dt * self.eps0 * self.diff_amplitude * float(
            np.sum(lam * (c @ self._stiff.T))
        )
        out[1] = self.dt * self.vel0 * self.vel_amplitude * float(
            np.sum(lam * (c @ self._adv.T))
        )
        out[2:] = -self.dt * self.window_amplitude * (self._psi.T @ (lam @ mz))
        return out

    def l_uu(self, p, v) -> np.ndarray:
        c = self._blocks(v)
        out = np.zeros_like(c)
        for i in self.obs_steps:
            out[i] = self._s_obs.T @ (self._s_obs @ c[i])
        return out.ravel()

    def l_uz(self, p, v) -> np.ndarray:
        return np.zeros(self.dims.n_u)

    def l_zu(self, p, v) -> np.ndarray:
        return np.zeros(self.dims.n_z)

    def l_zz(self, p, v) -> np.ndarray:
        return self.alpha * (self._mass @ v)

    def l_utheta(self, p, v) -> np.ndarray:
        lam = self._blocks(p.lam)
        dk = self.eps0 * self.diff_amplitude * v[0]
        dv = self.vel0 * self.vel_amplitude * v[1]
        out = self.dt * (dk * (lam @ self._stiff) + dv * (lam @ self._adv))
        return out.ravel()

    def l_utheta_adj(self, p, w) -> np.ndarray:
        lam = self._blocks(p.lam)
        wb = self._blocks(w)
        out = np.zeros(self.dims.n_theta)
        out[0] = self.dt * self.eps0 * self.diff_amplitude * float(
            np.sum(wb * (lam @ self._stiff))
        )
        out[1] = self.dt * self.vel0 * self.vel_amplitude * float(
            np.sum(wb * (lam @ self._adv))
        )
        return out

    def l_ztheta(self, p, v) -> np.ndarray:
        lam = self._blocks(p.lam)
        dw = self.window_amplitude * (self._psi @ v[2:])
        return -self.dt * (self._mass @ (dw @ lam))

    def l_ztheta_adj(self, p, w) -> np.ndarray:
        lam = self._blocks(p.lam)
        out = np.zeros(self.dims.n_theta)
        mv = self._mass @ w
        out[2:] = -self.dt * self.window_amplitude * (self._psi.T @ (lam @ mv))
        return out

    def state_jacobian_solve(self, p, rhs) -> np.ndarray:
        b = self._blocks(rhs)
        g = self._system_matrix(p.theta)
        lu = scipy.linalg.lu_factor(g)
        out = np.empty_like(b)
        prev = np.zeros(self.n_space)
        for i in range(self.n_steps):
            out[i] = scipy.linalg.lu_solve(lu, b[i] + self._mass @ prev)
            prev = out[i]
        return out.ravel()

    def state_jacobian_adjoint_solve(self, p, rhs) -> np.ndarray:
        b = self._blocks(rhs)
        g = self._system_matrix(p.theta)
        lu = scipy.linalg.lu_factor(g.T)
        out = np.empty_like(b)
        nxt = np.zeros(self.n_space)
        for i in range(self.n_steps - 1, -1, -1):
            out[i] = scipy.linalg.lu_solve(lu, b[i] + self._mass @ nxt)
            nxt = out[i]
        return out.ravel()


def build_advdiff_inversion_1d(**kwargs) -> AdvDiffInversionProblem:
    if "window" in kwargs and isinstance(kwargs["window"], list):
        kwargs["window"] = tuple(kwargs["window"])
    return AdvDiffInversionProblem(**kwargs)
