"""Deterministic seeded sampling for parameters, initial iterates, and probes.

Every random draw is keyed by (master seed, structured key) through a
counter-based Philox generator, so results are independent of worker
scheduling and reduction order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SamplingError(Exception):
    pass


def rng_for(master_seed: int, *key: int) -> np.random.Generator:
    """Generator deterministically keyed by (master_seed, *key)."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class Distribution:
    """Per-coordinate scalar distribution: uniform[a, b] or normal(mu, sigma)."""

    kind: str
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "normal"):
            raise SamplingError(f"unknown distribution {self.kind!r}")
        if self.kind == "uniform" and self.b < self.a:
            raise SamplingError("uniform distribution needs b >= a")
        if self.kind == "normal" and self.b < 0:
            raise SamplingError("normal distribution needs sigma >= 0")

    def draw(self, rng: np.random.Generator) -> float:
        if self.kind == "uniform":
            if self.a == self.b:
                return self.a
            return float(rng.uniform(self.a, self.b))
        return float(self.a + self.b * rng.standard_normal())

    @property
    def mean(self) -> float:
        return 0.5 * (self.a + self.b) if self.kind == "uniform" else self.a

    @property
    def std(self) -> float:
        if self.kind == "uniform":
            return (self.b - self.a) / np.sqrt(12.0)
        return self.b


@dataclass
class SamplingPlan:
    """Distributions for theta coordinates plus the initial-iterate mode."""

    theta_dists: list[Distribution]
    init_mode: str = "zero"  # "zero" | "seeded-random"
    master_seed: int = 0
    n_u: int = 0
    n_z: int = 0

    def __post_init__(self):
        if self.init_mode not in ("zero", "seeded-random"):
            raise SamplingError(f"unknown initial-iterate mode {self.init_mode!r}")

    def sample(self, j: int) -> tuple[np.ndarray, "InitialIterate"]:
        """Deterministic function of (master_seed, j); independent across j."""
        rng = rng_for(self.master_seed, 0, j)
        theta = np.array([d.draw(rng) for d in self.theta_dists])
        if self.init_mode == "zero":
            init = InitialIterate(
                u_init=np.zeros(self.n_u),
                z_init=np.zeros(self.n_z),
                provenance="fixed-zero",
            )
        else:
            init_rng = rng_for(self.master_seed, 1, j)
            init = InitialIterate(
                u_init=init_rng.standard_normal(self.n_u),
                z_init=init_rng.standard_normal(self.n_z),
                provenance="seeded-random",
            )
        return theta, init


@dataclass
class InitialIterate:
    u_init: np.ndarray
    z_init: np.ndarray
    provenance: str = "fixed-zero"


def probe_vector(master_seed: int, sample_j: int, probe_i: int, dim: int) -> np.ndarray:
    """Standard-normal probe keyed by (seed, sample, probe index)."""
    return rng_for(master_seed, 2, sample_j, probe_i).standard_normal(dim)
