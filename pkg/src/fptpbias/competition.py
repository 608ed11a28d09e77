"""Competition structure on the simplex.

Effective number of competitors, the diversity statistics compared in the
Monte Carlo study, and the closed-form seat threshold for three-candidate
races.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import rankdata

from .election import District

STUDY_VARIABLES = ("alpha", "max", "min", "median", "entropy", "hhi", "gini", "bhattacharyya")
STUDY_LABELS = ("alpha", "V1_max", "V1_min", "V_med", "H(V)", "sum V_i^2", "Gini", "Bhatt.")
STUDY_CHUNK = 4096


@dataclass(frozen=True)
class CompetitorProfile:
    z: np.ndarray
    n: int
    phi: float


@dataclass(frozen=True)
class DiversityStats:
    max: float
    min: float
    median: float
    entropy: float
    hhi: float
    gini: float
    bhattacharyya: float


@dataclass
class CorrelationStudyResult:
    n: int
    matrix: np.ndarray
    sample_count: int
    seed: int

    def cell(self, a: str, b: str) -> float:
        return float(self.matrix[STUDY_VARIABLES.index(a), STUDY_VARIABLES.index(b)])

    def to_tsv(self) -> str:
        lines = ["\t".join(("",) + STUDY_LABELS)]
        for label, row in zip(STUDY_LABELS, self.matrix):
            lines.append("\t".join([label] + [f"{x:.3f}" for x in row]))
        return "\n".join(lines) + "\n"


def effective_competitors(z) -> float:
    z = np.asarray(z, dtype=float)
    return 1.0 / float(np.sum(z * z))


def renormalize_competitors(district: District, party_id: str) -> CompetitorProfile:
    """Competitor shares of ``party_id`` rescaled to sum to one."""
    if party_id not in district.party_ids:
        raise ValueError(f"party {party_id} does not contest district {district.district_id}")
    if district.n_candidates < 2:
        raise ValueError(f"district {district.district_id} has no competitors")
    others = np.array([c.votes for c in district.candidates if c.party_id != party_id], dtype=float)
    rest = others.sum()
    if rest <= 0:
        raise ValueError(f"party {party_id} holds the whole vote in {district.district_id}")
    z = others / rest
    return CompetitorProfile(z=z, n=district.n_candidates, phi=effective_competitors(z))


def competitor_phi(shares: np.ndarray) -> np.ndarray:
    """Effective competitors for every candidate of every row of ``shares``.

    ``shares`` is (districts, candidates) with rows on the simplex.
    """
    shares = np.asarray(shares, dtype=float)
    rest = 1.0 - shares
    sq = np.sum(shares ** 2, axis=-1, keepdims=True) - shares ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        return rest ** 2 / sq


def _stats_rows(V: np.ndarray) -> np.ndarray:
    """(samples, 7) array of max, min, median, entropy, HHI, Gini, Bhattacharyya."""
    n = V.shape[1]
    srt = np.sort(V, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(V > 0, V * np.log(V), 0.0)
    entropy = -plogp.sum(axis=1)
    hhi = np.sum(V * V, axis=1)
    # sum_{i,j} |x_i - x_j| = 2 * sum_i (2i - n + 1) x_(i) over sorted coordinates
    ranks = 2.0 * np.arange(n) - n + 1
    pair_abs = 2.0 * srt @ ranks
    mean = V.sum(axis=1) / n
    gini = pair_abs / (2.0 * n * n * mean)
    bc = np.sqrt(V / n).sum(axis=1)
    bhatt = np.arccos(np.clip(bc, -1.0, 1.0))
    return np.column_stack([srt[:, -1], srt[:, 0], np.median(V, axis=1),
                            entropy, hhi, gini, bhatt])


def diversity_stats(x) -> DiversityStats:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need a simplex vector with at least two coordinates")
    if np.any(x < 0) or abs(x.sum() - 1.0) > 1e-9:
        raise ValueError("vector is not on the unit simplex")
    return DiversityStats(*(float(v) for v in _stats_rows(x[None, :])[0]))


def spearman_rho(a, b) -> float:
    """Spearman correlation: Pearson correlation of mid-ranks."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("need two equal-length vectors of length >= 2")
    ra = rankdata(a) - (a.size + 1) / 2.0
    rb = rankdata(b) - (b.size + 1) / 2.0
    den = math.sqrt(float(ra @ ra) * float(rb @ rb))
    if den == 0.0:
        raise ValueError("Spearman correlation undefined for a constant vector")
    return float(np.clip((ra @ rb) / den, -1.0, 1.0))


def spearman_matrix(X: np.ndarray) -> np.ndarray:
    R = np.apply_along_axis(rankdata, 0, X)
    R = R - R.mean(axis=0)
    norms = np.sqrt(np.sum(R * R, axis=0))
    if np.any(norms == 0):
        raise ValueError("Spearman correlation undefined for a constant column")
    M = (R.T @ R) / np.outer(norms, norms)
    M = np.clip((M + M.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(M, 1.0)
    return M


def sample_symmetric_dirichlet(alpha: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Rows V ~ Dir(alpha_r, ..., alpha_r), one per entry of ``alpha``.

    Gamma variates are drawn in log space (Gamma(a) = Gamma(a+1) U^{1/a}) so
    tiny concentrations do not underflow to an all-zero row.
    """
    alpha = np.asarray(alpha, dtype=float)[:, None]
    g = rng.standard_gamma(alpha + 1.0, size=(alpha.shape[0], n))
    u = rng.random(size=(alpha.shape[0], n))
    logg = np.log(g) + np.log1p(-u) / alpha
    logg -= logg.max(axis=1, keepdims=True)
    w = np.exp(logg)
    return w / w.sum(axis=1, keepdims=True)


def _study_chunk(args) -> np.ndarray:
    seed, n, chunk, size, shape, scale = args
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n, chunk)))
    alpha = rng.gamma(shape, scale, size=size)
    V = sample_symmetric_dirichlet(alpha, n, rng)
    return np.column_stack([alpha, _stats_rows(V)])


def study_samples(n: int, samples: int, seed: int, workers: int = 1,
                  alpha_shape: float = 2.0, alpha_scale: float = 1.0) -> np.ndarray:
    """(samples, 8) draws of the study variables for candidate count ``n``.

    Each draw takes a concentration alpha ~ Gamma(alpha_shape, alpha_scale)
    and V ~ Dir(alpha, ..., alpha).  Draws are pre-assigned to fixed-size
    chunks, each with its own seed stream, so the output does not depend on
    ``workers``.
    """
    jobs = []
    for chunk, start in enumerate(range(0, samples, STUDY_CHUNK)):
        jobs.append((seed, n, chunk, min(STUDY_CHUNK, samples - start), alpha_shape, alpha_scale))
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_study_chunk, jobs))
    else:
        parts = [_study_chunk(j) for j in jobs]
    return np.vstack(parts)


def run_diversity_study(n_range: Sequence[int] = range(3, 13), samples: int = 2 ** 16,
                        seed: int = 0, workers: int = 1, alpha_shape: float = 2.0,
                        alpha_scale: float = 1.0) -> list[CorrelationStudyResult]:
    """Spearman matrices of the eight study variables, one per ``n``.

    The default concentration prior Gamma(2, 1) is the one under which the
    reference correlation tables are reproduced; Gamma(1, 1) is available
    through ``alpha_shape=1``.
    """
    if samples < 1000:
        raise ValueError("the study needs at least 1000 samples")
    out = []
    for n in n_range:
        X = study_samples(int(n), samples, seed, workers, alpha_shape, alpha_scale)
        out.append(CorrelationStudyResult(int(n), spearman_matrix(X), samples, seed))
    return out


def largest_of_two(phi: float) -> float:
    """Larger of two competitor shares given their effective number."""
    if not 1.0 <= phi <= 2.0:
        raise ValueError(f"phi={phi} outside [1, 2]")
    return 0.5 * (1.0 + math.sqrt(max(2.0 / phi - 1.0, 0.0)))


def analytic_boundary_n3(phi: float) -> float:
    """Exact seat threshold with two competitors: t = m / (1 + m)."""
    m = largest_of_two(phi)
    return m / (1.0 + m)


def analytic_boundary_n3_array(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if np.any((phi < 1.0) | (phi > 2.0)):
        raise ValueError("phi outside [1, 2]")
    m = 0.5 * (1.0 + np.sqrt(np.maximum(2.0 / phi - 1.0, 0.0)))
    return m / (1.0 + m)


def boundary_quadratic_phi(v):
    """The n = 3 boundary written as phi(v) = (1 - 2v + v^2) / (1 - 4v + 5v^2)."""
    v = np.asarray(v, dtype=float)
    return (1 - 2 * v + v * v) / (1 - 4 * v + 5 * v * v)


def win_probability(v: float, F: Callable[[float], float]) -> float:
    """Pr(win | v) = F(v / (1 - v)) for F the CDF of the largest competitor share.

    A candidate wins iff v exceeds (1 - v) times the largest renormalized
    competitor share, so the probability is non-decreasing in v.
    """
    if v < 0 or v > 1:
        raise ValueError("vote share outside [0, 1]")
    if v >= 1.0:
        return 1.0
    arg = min(max(v / (1.0 - v), 0.0), 1.0)
    return float(F(arg)) if arg < 1.0 else 1.0
