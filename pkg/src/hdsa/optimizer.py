"""Reduced-space Newton-CG solver for the inner PDE-constrained problem.

Produces a verified stationary triple (u0, z0, lambda0) with adjoint recovery
and a second-order sufficiency check, as required before any sensitivity
computation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import DENSE_THRESHOLD, dense_sym_eig
from .problems.base import EvalPoint, ProblemDefinition
from .sampling import InitialIterate


class OptimizerError(Exception):
    """Non-convergence or a rejected (non-minimizer) stationary point."""


@dataclass
class OptimizerConfig:
    stationarity_tol: float = 1e-9  # on the M^{-1}-norm of the reduced gradient
    max_iter: int = 100
    forward_tol: float = 1e-12
    forward_max_iter: int = 50
    cg_tol: float = 1e-12
    armijo_c1: float = 1e-4
    min_step: float = 1e-14
    check_sosc: bool = True


@dataclass
class OptimalPoint:
    u0: np.ndarray
    z0: np.ndarray
    lambda0: np.ndarray
    theta0: np.ndarray
    grad_norm: float
    sosc_min_eig: float
    iterations: int
    objective: float = 0.0

    def as_eval_point(self) -> EvalPoint:
        return EvalPoint(self.u0, self.z0, self.lambda0, self.theta0)


def _point(problem, u, z, theta, lam=None):
    if lam is None:
        lam = np.zeros(problem.dims.n_lambda)
    return EvalPoint(u, z, lam, theta)


def solve_forward(
    problem: ProblemDefinition,
    z: np.ndarray,
    theta: np.ndarray,
    u_guess: np.ndarray | None = None,
    tol: float = 1e-12,
    max_iter: int = 50,
) -> np.ndarray:
    """Newton with backtracking on the constraint residual c(u, z, theta) = 0."""
    u = np.zeros(problem.dims.n_u) if u_guess is None else u_guess.copy()
    r = problem.residual(u, z, theta)
    r0 = max(float(np.linalg.norm(r)), 1.0)
    for _ in range(max_iter):
        rn = float(np.linalg.norm(r))
        if rn <= tol * r0 or rn <= tol:
            return u
        du = problem.state_jacobian_solve(_point(problem, u, z, theta), -r)
        step = 1.0
        while step >= 1e-12:
            u_trial = u + step * du
            try:
                r_trial = problem.residual(u_trial, z, theta)
            except Exception:
                step *= 0.5
                continue
            if float(np.linalg.norm(r_trial)) < rn:
                u, r = u_trial, r_trial
                break
            step *= 0.5
        else:
            raise OptimizerError(
                f"forward Newton line search failed at residual {rn:.3e}"
            )
    rn = float(np.linalg.norm(r))
    if rn <= tol * r0 or rn <= tol:
        return u
    raise OptimizerError(f"forward solve did not converge: residual {rn:.3e}")


def solve_adjoint(
    problem: ProblemDefinition, u: np.ndarray, z: np.ndarray, theta: np.ndarray
) -> np.ndarray:
    """Adjoint state from c_u^T lambda = -J_u."""
    p = _point(problem, u, z, theta)
    rhs = -problem.obj_grad_u(u, z, theta)
    return problem.state_jacobian_adjoint_solve(p, rhs)


def reduced_gradient(problem, u, z, theta, lam) -> np.ndarray:
    p = EvalPoint(u, z, lam, theta)
    return problem.obj_grad_z(u, z, theta) + problem.c_z_adj(p, lam)


def reduced_hessian_matvec(problem: ProblemDefinition, p: EvalPoint, v: np.ndarray) -> np.ndarray:
    """Action of the reduced Hessian at a stationary-ish point."""
    du = problem.state_jacobian_solve(p, -problem.c_z(p, v))
    w = problem.l_uu(p, du) + problem.l_uz(p, v)
    dlam = problem.state_jacobian_adjoint_solve(p, -w)
    return problem.l_zu(p, du) + problem.l_zz(p, v) + problem.c_z_adj(p, dlam)


def reduced_hessian_dense(problem: ProblemDefinition, p: EvalPoint) -> np.ndarray:
    n_z = problem.dims.n_z
    if n_z > DENSE_THRESHOLD:
        raise OptimizerError("reduced Hessian too large to form densely")
    cols = [reduced_hessian_matvec(problem, p, e) for e in np.eye(n_z)]
    h = np.column_stack(cols)
    return 0.5 * (h + h.T)


def check_sosc(problem: ProblemDefinition, p: EvalPoint) -> float:
    """Smallest eigenvalue of the reduced Hessian at the point."""
    h = reduced_hessian_dense(problem, p)
    evals, _ = dense_sym_eig(h)
    return float(evals[-1])


def _newton_cg_direction(problem, p, g, tol) -> np.ndarray:
    """Truncated CG on H d = -g with Steihaug-style negative-curvature exit."""
    n = g.shape[0]
    d = np.zeros(n)
    r = -g.copy()
    q = r.copy()
    rr = float(r @ r)
    g_norm = float(np.linalg.norm(g))
    if g_norm == 0.0:
        return d
    for _ in range(2 * n + 10):
        if np.sqrt(rr) <= tol * g_norm:
            return d
        hq = reduced_hessian_matvec(problem, p, q)
        curv = float(q @ hq)
        if curv <= 0.0:
            # negative-curvature exit: keep progress, or fall back to steepest descent
            return d if float(d @ g) < 0.0 else -g
        alpha = rr / curv
        d = d + alpha * q
        r = r - alpha * hq
        rr_new = float(r @ r)
        q = r + (rr_new / rr) * q
        rr = rr_new
    return d


def solve_optimization(
    problem: ProblemDefinition,
    theta0: np.ndarray,
    init: InitialIterate | None = None,
    cfg: OptimizerConfig | None = None,
) -> OptimalPoint:
    """Reduced-space Newton with Armijo backtracking.

    Returns an OptimalPoint whose adjoint is recomputed at the final iterate
    and whose reduced Hessian is verified positive definite (unless disabled).
    """
    cfg = cfg or OptimizerConfig()
    dims = problem.dims
    if init is None:
        init = InitialIterate(np.zeros(dims.n_u), np.zeros(dims.n_z))
    if init.z_init.shape != (dims.n_z,) or init.u_init.shape != (dims.n_u,):
        raise OptimizerError("initial iterate dimensions do not match the problem")
    m_z = problem.spaces.m_z

    z = init.z_init.copy()
    u = solve_forward(
        problem, z, theta0, init.u_init, tol=cfg.forward_tol, max_iter=cfg.forward_max_iter
    )

    def grad_m_norm(g):
        return float(np.sqrt(max(g @ m_z.solve(g), 0.0)))

    it = 0
    f = problem.objective(u, z, theta0)
    while True:
        lam = solve_adjoint(problem, u, z, theta0)
        g = reduced_gradient(problem, u, z, theta0, lam)
        gnorm = grad_m_norm(g)
        if gnorm <= cfg.stationarity_tol or it >= cfg.max_iter:
            break
        p = EvalPoint(u, z, lam, theta0)
        d = _newton_cg_direction(problem, p, g, cfg.cg_tol)
        if float(d @ g) >= 0.0:
            d = -g
        step = 1.0
        accepted = False
        while step >= cfg.min_step:
            z_trial = z + step * d
            try:
                u_trial = solve_forward(
                    problem, z_trial, theta0, u,
                    tol=cfg.forward_tol, max_iter=cfg.forward_max_iter,
                )
            except (OptimizerError, Exception):
                step *= 0.5
                continue
            f_trial = problem.objective(u_trial, z_trial, theta0)
            if f_trial <= f + cfg.armijo_c1 * step * float(d @ g) + 1e-14:
                z, u, f = z_trial, u_trial, f_trial
                accepted = True
                break
            step *= 0.5
        if not accepted:
            raise OptimizerError(
                f"Armijo line search failed at iteration {it} (|g|_M = {gnorm:.3e})"
            )
        it += 1

    if gnorm > cfg.stationarity_tol:
        raise OptimizerError(
            f"optimizer did not reach stationarity: |g|_M = {gnorm:.3e} "
            f"after {it} iterations"
        )
    lam = solve_adjoint(problem, u, z, theta0)
    point = EvalPoint(u, z, lam, theta0)
    sosc = np.nan
    if cfg.check_sosc:
        sosc = check_sosc(problem, point)
        if sosc <= 0.0:
            raise OptimizerError(
                f"not a verified local minimizer: reduced Hessian min eig {sosc:.3e}"
            )
    return OptimalPoint(
        u0=u,
        z0=z,
        lambda0=lam,
        theta0=np.asarray(theta0, dtype=float).copy(),
        grad_norm=gnorm,
        sosc_min_eig=sosc,
        iterations=it,
        objective=f,
    )
