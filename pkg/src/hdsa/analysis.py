"""Sampled global sensitivity analysis and the first-order diagnostics.

Runs the full pipeline per parameter sample (optimize, randomized weighted
SVD, indices), aggregates Monte Carlo statistics across samples, and provides
the perturbation-ratio and fixed-z comparison diagnostics.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field

import numpy as np

from .indices import local_indices, set_indices
from .operators import KktConfig, SensitivityOperator
from .optimizer import OptimalPoint, OptimizerConfig, solve_forward, solve_optimization
from .problems.base import ProblemDefinition
from .randeig import GenEigDiagnostics, RandEigConfig, SingularTriple, randomized_geneig
from .sampling import SamplingPlan


@dataclass
class SampleResult:
    sample_index: int
    theta: np.ndarray
    optimal: OptimalPoint
    triples: list[SingularTriple]
    local: np.ndarray
    sets: dict[str, float]
    diagnostics: GenEigDiagnostics

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([t.sigma for t in self.triples])

    @property
    def spectral_decay(self) -> float:
        s = self.sigmas
        return float(s[-1] / s[0]) if s.size and s[0] > 0 else 0.0


@dataclass
class SampleFailure:
    sample_index: int
    theta: np.ndarray
    message: str


@dataclass
class HdsaReport:
    samples: list[SampleResult]
    failures: list[SampleFailure]
    cfg: RandEigConfig

    @property
    def n_requested(self) -> int:
        return self.cfg.n_samples

    def local_mean(self) -> np.ndarray:
        return np.mean([s.local for s in self.samples], axis=0)

    def local_std(self) -> np.ndarray:
        if len(self.samples) < 2:
            return np.zeros_like(self.samples[0].local)
        return np.std([s.local for s in self.samples], axis=0, ddof=0)

    def set_mean(self) -> dict[str, float]:
        names = self.samples[0].sets.keys()
        return {
            n: float(np.mean([s.sets[n] for s in self.samples])) for n in names
        }

    def set_std(self) -> dict[str, float]:
        names = self.samples[0].sets.keys()
        if len(self.samples) < 2:
            return {n: 0.0 for n in names}
        return {
            n: float(np.std([s.sets[n] for s in self.samples], ddof=0))
            for n in names
        }


def analyze_sample(
    problem: ProblemDefinition,
    plan: SamplingPlan,
    cfg: RandEigConfig,
    j: int,
    opt_cfg: OptimizerConfig | None = None,
    kkt_cfg: KktConfig | None = None,
) -> SampleResult:
    """Single outer-loop iteration: sample, optimize, decompose, index."""
    theta, init = plan.sample(j)
    optimal = solve_optimization(problem, theta, init, opt_cfg)
    sens = SensitivityOperator(problem, optimal.as_eval_point(), kkt_cfg)
    triples, diag = randomized_geneig(sens, problem.spaces, cfg, sample_index=j)
    local = local_indices(triples, problem.spaces)
    sets: dict[str, float] = {}
    partition = problem.spaces.partition
    if partition is not None:
        sets = set_indices(
            triples,
            problem.spaces,
            partition,
            mode=cfg.set_index_mode,
            sens_op=sens,
            cfg=cfg,
            sample_index=j,
        )
    return SampleResult(j, theta, optimal, triples, local, sets, diag)


def global_analysis(
    problem: ProblemDefinition,
    plan: SamplingPlan,
    cfg: RandEigConfig,
    opt_cfg: OptimizerConfig | None = None,
    kkt_cfg: KktConfig | None = None,
    workers: int = 1,
) -> HdsaReport:
    """Monte Carlo sweep over N parameter samples.

    Per-sample failures (optimizer divergence, rejected SOSC) are recorded and
    excluded from the aggregates. Results are gathered by sample index and are
    identical for any worker count.
    """
    results: dict[int, SampleResult] = {}
    failures: dict[int, SampleFailure] = {}

    def task(j: int):
        return analyze_sample(problem, plan, cfg, j, opt_cfg, kkt_cfg)

    indices = list(range(cfg.n_samples))
    if workers <= 1:
        for j in indices:
            try:
                results[j] = task(j)
            except Exception as exc:
                failures[j] = SampleFailure(j, plan.sample(j)[0], str(exc))
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(task, j): j for j in indices}
            for fut in concurrent.futures.as_completed(futures):
                j = futures[fut]
                try:
                    results[j] = fut.result()
                except Exception as exc:
                    failures[j] = SampleFailure(j, plan.sample(j)[0], str(exc))

    if not results:
        raise RuntimeError(
            "every sample failed; first failure: "
            + (failures[min(failures)].message if failures else "unknown")
        )
    return HdsaReport(
        samples=[results[j] for j in sorted(results)],
        failures=[failures[j] for j in sorted(failures)],
        cfg=cfg,
    )


@dataclass
class PerturbationCheck:
    delta: float
    lhs: float  # ||z_opt(theta0 + delta phi) - z_opt(theta0)||_Z
    linear_prediction: float  # delta * ||D phi||_Z
    ratio: float


def perturbation_check(
    problem: ProblemDefinition,
    point: OptimalPoint,
    phi: np.ndarray,
    delta: float,
    opt_cfg: OptimizerConfig | None = None,
    kkt_cfg: KktConfig | None = None,
    sens: SensitivityOperator | None = None,
) -> PerturbationCheck:
    """Empirical first-order check: re-solve at theta0 + delta*phi (warm start)
    and compare the true optimal-solution change against the linear prediction."""
    spaces = problem.spaces
    nrm = spaces.m_theta.norm(phi)
    if nrm == 0.0:
        raise ValueError("perturbation direction must be nonzero")
    phi = phi / nrm
    if sens is None:
        sens = SensitivityOperator(problem, point.as_eval_point(), kkt_cfg)
    prediction = delta * spaces.m_z.norm(sens.apply(phi))
    if delta == 0.0:
        return PerturbationCheck(0.0, 0.0, 0.0, 1.0)
    from .sampling import InitialIterate

    warm = InitialIterate(point.u0.copy(), point.z0.copy(), provenance="fixed-zero")
    moved = solve_optimization(problem, point.theta0 + delta * phi, warm, opt_cfg)
    lhs = spaces.m_z.norm(moved.z0 - point.z0)
    ratio = lhs / prediction if prediction > 0 else np.inf
    return PerturbationCheck(delta, lhs, prediction, ratio)


def traditional_comparison(
    problem: ProblemDefinition, point: OptimalPoint
) -> np.ndarray:
    """|d/dtheta_i| of the reduced objective at FIXED z0 (forward + adjoint).

    This is the sensitivity a fixed-design analysis would report; contrasted
    with the indices of the optimal-solution map.
    """
    u = solve_forward(problem, point.z0, point.theta0, point.u0)
    lam = problem.state_jacobian_adjoint_solve(
        point.as_eval_point(), -problem.obj_grad_u(u, point.z0, point.theta0)
    )
    from .problems.base import EvalPoint

    p = EvalPoint(u, point.z0, lam, point.theta0)
    g = problem.obj_grad_theta(u, point.z0, point.theta0) + problem.c_theta_adj(p, lam)
    return np.abs(g)
