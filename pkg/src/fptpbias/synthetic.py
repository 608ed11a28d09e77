"""Simulated districts and elections used for training and self-checks."""
from __future__ import annotations

import numpy as np

from .competition import sample_symmetric_dirichlet
from .election import CandidateResult, Election, build_election


def district_shares(count: int, n: int, rng: np.random.Generator,
                    alpha_shape: float = 2.0, alpha_scale: float = 1.0) -> np.ndarray:
    """(count, n) candidate vote shares, V ~ Dir(alpha) with alpha ~ Gamma."""
    alpha = rng.gamma(alpha_shape, alpha_scale, size=count)
    return sample_symmetric_dirichlet(alpha, n, rng)


def district_votes(count: int, n: int, rng: np.random.Generator,
                   size_range=(500, 5000), **kw) -> np.ndarray:
    """Integer vote counts for ``count`` districts with ``n`` candidates each."""
    sh = district_shares(count, n, rng, **kw)
    w = rng.integers(size_range[0], size_range[1] + 1, size=count)
    return np.rint(sh * w[:, None]).astype(np.int64)


def simulate_election(election_id: str, rng: np.random.Generator,
                      districts=(10, 25), parties=(2, 7), concentration=(4.0, 30.0),
                      size_range=(1000, 6000)) -> Election:
    """One partially-contested plurality election.

    Two major parties contest every district; minor parties contest a random
    subset.  District shares are Dirichlet around party strengths with a
    per-election local concentration, so seats follow votes with realistic
    noise.  Every district keeps at least two candidates.
    """
    c = int(rng.integers(districts[0], districts[1] + 1))
    n_parties = int(rng.integers(parties[0], parties[1] + 1))
    strength = rng.gamma(2.0, 1.0, size=n_parties)
    strength[:2] += 1.0
    contest = np.concatenate([[1.0, 1.0], rng.uniform(0.25, 1.0, size=n_parties - 2)])
    kappa = rng.uniform(*concentration)
    rows = []
    for k in range(c):
        present = rng.random(n_parties) < contest
        if present.sum() < 2:
            present[:2] = True
        idx = np.flatnonzero(present)
        local = strength[idx] * rng.lognormal(0.0, 0.35, size=idx.size)
        sh = rng.dirichlet(kappa * local / local.sum())
        w = int(rng.integers(size_range[0], size_range[1] + 1))
        votes = np.rint(sh * w).astype(int)
        for p, x in zip(idx, votes):
            rows.append(CandidateResult(election_id, f"d{k:03d}", f"p{p}", int(x)))
    return build_election(election_id, rows, tie_policy="flag", drop_unopposed=True)


def simulate_elections(count: int, seed: int, prefix: str = "e", **kw) -> list[Election]:
    out = []
    for i in range(count):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        e = simulate_election(f"{prefix}{i:05d}", rng, **kw)
        if e.districts:
            out.append(e)
    return out
