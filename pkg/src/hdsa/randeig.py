"""Randomized generalized eigensolver for the weighted SVD of the sensitivity map.

The singular triples of the sensitivity operator (in the mass-weighted inner
products) are the positive eigenpairs of the symmetric pencil

    A = [[0, M_Z D], [D^T M_Z, 0]],   B = blockdiag(M_Z, M_Theta),

solved by randomized range finding plus Rayleigh-Ritz. A dense Cholesky-based
oracle and the n x n squared formulation D^T M_Z D theta = alpha M_Theta theta
are provided for cross-validation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .linalg import (
    DENSE_THRESHOLD,
    LinalgError,
    SpdOperator,
    b_orthonormalize,
    dense_cholesky,
    dense_svd,
    dense_sym_eig,
)
from .operators import SensitivityOperator
from .problems.base import WeightedSpaces
from .sampling import probe_vector

# Eigenvalues at or below this fraction of the largest are treated as zero rank.
RANK_TOL = 1e-12


@dataclass
class RandEigConfig:
    k_pairs: int = 4
    oversampling: int = 8
    seed: int = 0
    n_samples: int = 1
    # extra pencil applications to sharpen the captured subspace; each pass
    # costs one more application of B^{-1}A per probe vector
    power_iterations: int = 2
    set_index_mode: str = "truncated"  # "truncated" | "direct"

    def __post_init__(self):
        if self.k_pairs < 1:
            raise LinalgError("k_pairs must be at least 1")
        if self.oversampling < 0:
            raise LinalgError("oversampling must be nonnegative")
        if self.n_samples < 1:
            raise LinalgError("n_samples must be at least 1")
        if self.set_index_mode not in ("truncated", "direct"):
            raise LinalgError(f"unknown set_index_mode {self.set_index_mode!r}")

    @property
    def n_probes(self) -> int:
        return 2 * self.k_pairs + self.oversampling


@dataclass
class SingularTriple:
    sigma: float
    theta_vec: np.ndarray  # right vector, unit M_Theta norm
    z_vec: np.ndarray  # left vector, unit M_Z norm


@dataclass
class GenEigDiagnostics:
    ritz_values: np.ndarray
    n_probes: int
    n_dropped: int
    rank_deficient: bool
    kkt_solves: int


class _BlockMass:
    """B = blockdiag(M_Z, M_Theta) on stacked (z, theta) coordinates."""

    def __init__(self, spaces: WeightedSpaces, n_z: int, n_theta: int):
        self.m_z = spaces.m_z
        self.m_theta = spaces.m_theta
        self.n_z = n_z
        self.dim = n_z + n_theta

    def apply(self, v):
        return np.concatenate(
            [self.m_z.apply(v[: self.n_z]), self.m_theta.apply(v[self.n_z :])]
        )

    def solve(self, v):
        return np.concatenate(
            [self.m_z.solve(v[: self.n_z]), self.m_theta.solve(v[self.n_z :])]
        )

    def inner(self, v, w):
        return float(v @ self.apply(w))

    def norm(self, v):
        return float(np.sqrt(max(self.inner(v, v), 0.0)))


def apply_pencil_a(d: SensitivityOperator, spaces: WeightedSpaces, v: np.ndarray) -> np.ndarray:
    """A (z~, theta~) = (M_Z D theta~, D^T M_Z z~); exactly two KKT solves."""
    n_z = d.n_z
    if v.shape != (n_z + d.n_theta,):
        raise LinalgError("pencil vector has the wrong stacked dimension")
    z_part, th_part = v[:n_z], v[n_z:]
    top = spaces.m_z.apply(d.apply(th_part))
    bottom = d.apply_transpose(spaces.m_z.apply(z_part))
    return np.concatenate([top, bottom])


def _normalize_triples(
    sigmas: np.ndarray,
    z_vecs: np.ndarray,
    theta_vecs: np.ndarray,
    spaces: WeightedSpaces,
) -> list[SingularTriple]:
    triples = []
    for k in range(sigmas.shape[0]):
        th = theta_vecs[:, k]
        zv = z_vecs[:, k]
        th_n = spaces.m_theta.norm(th)
        z_n = spaces.m_z.norm(zv)
        if th_n == 0.0 or z_n == 0.0:
            continue
        triples.append(
            SingularTriple(float(sigmas[k]), th / th_n, zv / z_n)
        )
    return triples


def randomized_geneig(
    d: SensitivityOperator,
    spaces: WeightedSpaces,
    cfg: RandEigConfig,
    sample_index: int = 0,
) -> tuple[list[SingularTriple], GenEigDiagnostics]:
    """Randomized solve of the pencil; returns up to K singular triples.

    Probes are standard-normal vectors keyed by (seed, sample, probe index),
    so results do not depend on scheduling. Fewer than K positive eigenvalues
    above the rank tolerance yields a truncated list with a rank flag.
    """
    n_z, n_theta = d.n_z, d.n_theta
    dim = n_z + n_theta
    # never draw more probes than the pencil has dimensions; small problems
    # then get the exact subspace and a possibly rank-deficient triple list
    r = min(cfg.n_probes, dim)
    b = _BlockMass(spaces, n_z, n_theta)
    solves_before = len(d.kkt.solve_stats)

    def apply_binv_a(mat):
        out = np.empty_like(mat)
        for i in range(mat.shape[1]):
            out[:, i] = b.solve(apply_pencil_a(d, spaces, mat[:, i]))
        return out

    y = np.column_stack(
        [probe_vector(cfg.seed, sample_index, i, dim) for i in range(r)]
    )
    y = apply_binv_a(y)
    dropped = 0
    for _ in range(cfg.power_iterations):
        y, ndrop = b_orthonormalize(y, _AsSpd(b))
        dropped += ndrop
        y = apply_binv_a(y)
    q, ndrop = b_orthonormalize(y, _AsSpd(b))
    dropped += ndrop

    aq = np.column_stack(
        [apply_pencil_a(d, spaces, q[:, i]) for i in range(q.shape[1])]
    )
    t = q.T @ aq
    evals, evecs = dense_sym_eig(0.5 * (t + t.T))

    max_eval = float(evals[0]) if evals.size else 0.0
    keep = [
        k for k in range(evals.shape[0])
        if evals[k] > 0.0 and evals[k] > RANK_TOL * max_eval
    ][: cfg.k_pairs]
    vectors = q @ evecs[:, keep]
    triples = _normalize_triples(
        evals[keep], vectors[:n_z, :], vectors[n_z:, :], spaces
    )
    diag = GenEigDiagnostics(
        ritz_values=evals,
        n_probes=r,
        n_dropped=dropped,
        rank_deficient=len(triples) < cfg.k_pairs,
        kkt_solves=len(d.kkt.solve_stats) - solves_before,
    )
    return triples, diag


class _AsSpd:
    """Adapter presenting the block mass as the SpdOperator surface."""

    def __init__(self, b: _BlockMass):
        self._b = b
        self.dim = b.dim

    def apply(self, v):
        return self._b.apply(v)

    def norm(self, v):
        return self._b.norm(v)

    def inner(self, v, w):
        return self._b.inner(v, w)


def dense_oracle(d: SensitivityOperator, spaces: WeightedSpaces) -> list[SingularTriple]:
    """Weighted SVD via explicit Cholesky factors: SVD of R_Z D R_Theta^{-1}.

    Builds D column by column (one KKT solve per parameter) and returns the
    full set of singular triples in the weighted inner products.
    """
    if d.n_z + d.n_theta > DENSE_THRESHOLD:
        raise LinalgError(
            "problem too large for the dense oracle; use the randomized path"
        )
    dmat = d.dense()
    r_z = dense_cholesky(spaces.m_z.dense())
    r_theta = dense_cholesky(spaces.m_theta.dense())
    # R_Z D R_Theta^{-1} without forming the inverse
    core = r_z @ scipy.linalg.solve_triangular(
        r_theta, dmat.T, lower=False, trans="T"
    ).T
    sig, u, v = dense_svd(core)
    theta_vecs = scipy.linalg.solve_triangular(r_theta, v, lower=False)
    z_vecs = scipy.linalg.solve_triangular(r_z, u, lower=False)
    return _normalize_triples(sig, z_vecs, theta_vecs, spaces)


def alternative_formulation(
    d: SensitivityOperator,
    spaces: WeightedSpaces,
    cfg: RandEigConfig,
    sample_index: int = 0,
) -> tuple[list[SingularTriple], GenEigDiagnostics]:
    """Randomized solve of D^T M_Z D theta = alpha M_Theta theta.

    The returned eigenvalues are the squares of the primary formulation's
    singular values; sigma = sqrt(alpha). Left vectors are recovered with K
    extra applications of the sensitivity operator: z_k = D theta_k / sigma_k.
    """
    n_theta = d.n_theta
    r = min(cfg.k_pairs + cfg.oversampling, n_theta)
    m_theta = spaces.m_theta
    solves_before = len(d.kkt.solve_stats)

    def apply_a2(phi):
        return d.apply_transpose(spaces.m_z.apply(d.apply(phi)))

    def apply_binv_a2(mat):
        out = np.empty_like(mat)
        for i in range(mat.shape[1]):
            out[:, i] = m_theta.solve(apply_a2(mat[:, i]))
        return out

    y = np.column_stack(
        [probe_vector(cfg.seed, sample_index, 10_000 + i, n_theta) for i in range(r)]
    )
    y = apply_binv_a2(y)
    dropped = 0
    for _ in range(cfg.power_iterations):
        y, ndrop = b_orthonormalize(y, m_theta)
        dropped += ndrop
        y = apply_binv_a2(y)
    q, ndrop = b_orthonormalize(y, m_theta)
    dropped += ndrop

    aq = np.column_stack([apply_a2(q[:, i]) for i in range(q.shape[1])])
    t = q.T @ aq
    evals, evecs = dense_sym_eig(0.5 * (t + t.T))
    max_eval = float(evals[0]) if evals.size else 0.0
    keep = [
        k for k in range(evals.shape[0])
        if evals[k] > 0.0 and evals[k] > RANK_TOL * max_eval
    ][: cfg.k_pairs]

    triples = []
    for k in keep:
        th = q @ evecs[:, k]
        th = th / m_theta.norm(th)
        sigma = float(np.sqrt(evals[k]))
        zv = d.apply(th) / sigma
        z_n = spaces.m_z.norm(zv)
        if z_n == 0.0:
            continue
        triples.append(SingularTriple(sigma, th, zv / z_n))
    diag = GenEigDiagnostics(
        ritz_values=evals,
        n_probes=r,
        n_dropped=dropped,
        rank_deficient=len(triples) < cfg.k_pairs,
        kkt_solves=len(d.kkt.solve_stats) - solves_before,
    )
    return triples, diag
