"""Seats-votes models stratified by district count, party and election p-values."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, asdict
from typing import Iterable, Sequence

import numpy as np

from .election import Election
from .kernel import BandwidthSpec, KernelModel, cdf_levels, select_bandwidth
from .thresholds import ThresholdModel

P_FLOOR = 1e-6
MIN_STRATUM = 10
TAILS = ("plain", "mid")
BUNDLE_VERSION = 1


@dataclass(frozen=True)
class PartyRow:
    election_id: str
    party_id: str
    v: float
    s: float
    t: float
    c: int
    w: float


@dataclass(frozen=True)
class PartyScore:
    election_id: str
    party_id: str
    v: float
    s: float
    t: float
    c: int
    w: float
    p_value: float


@dataclass
class ElectionScore:
    election_id: str
    party_scores: list
    pi: float
    flagged: bool


@dataclass
class BandwidthConfig:
    scheme: str = "sample-point-nn"
    h0_grid: tuple = (0.125, 0.25, 0.5, 1.0, 2.0, 4.0)
    k_grid: tuple = (5, 10, 20, 40, 80)
    criterion: str = "kl"
    select_rows: int = 1000


def party_rows(elections: Iterable[Election], thresholds: ThresholdModel) -> list[PartyRow]:
    rows = []
    for e in elections:
        ts = thresholds.party_thresholds(e)
        for p in e.parties:
            rows.append(PartyRow(e.election_id, p.party_id, p.vote_share, p.seat_share,
                                 ts[p.party_id], p.c, p.weight))
    return rows


def default_k0(counts: Sequence[int], share: float = 0.2, floor: int = 5) -> int:
    """Largest c with at least ``share`` of parties contesting >= c districts, at least ``floor``."""
    counts = np.sort(np.asarray(counts, dtype=int))
    if counts.size == 0:
        return floor
    best = 1
    for c in np.unique(counts):
        if np.mean(counts >= c) >= share:
            best = int(c)
    return max(best, floor)


def _fit_stratum(X, s, cfg: BandwidthConfig, seed: int) -> tuple[KernelModel, dict]:
    n = s.size
    if n < 10:
        spec = BandwidthSpec(cfg.scheme, float(cfg.h0_grid[len(cfg.h0_grid) // 2]),
                             max(1, min(min(cfg.k_grid), n - 1)))
        return KernelModel(X, s, spec), {"rows": int(n), "selected_on": int(n), "score": None}
    sub = np.arange(n)
    if cfg.select_rows and n > cfg.select_rows:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n,)))
        sub = np.sort(rng.choice(n, cfg.select_rows, replace=False))
    m = sub.size
    k_grid = [k for k in cfg.k_grid if k < m] or [max(1, m // 4)]
    levels = cdf_levels(s[sub]) if cfg.criterion == "kl" else None
    if levels is not None and levels.size == 0:
        levels = np.array([float(np.min(s))])
    res = select_bandwidth(X[sub], s[sub], cfg.scheme, cfg.h0_grid, k_grid, cfg.criterion, levels=levels)
    k = res.spec.k
    if m < n and cfg.scheme != "fixed":
        # keep the neighbour fraction when moving from the subsample to all rows
        k = int(min(n - 1, max(1, round(k * n / m))))
    spec = BandwidthSpec(res.spec.scheme, res.spec.h0, k)
    return KernelModel(X, s, spec), {"rows": int(n), "selected_on": int(m),
                                     "score": res.score, "selected_k": int(res.spec.k)}


class SeatsVotesModel:
    """Kernel models of s_i given (v_i, t_i), one per district-count stratum.

    Stratum ``c < k0`` is trained on parties contesting at least ``c``
    districts; the pooled stratum ``k0`` on all parties with ``c_j >= k0``.
    """

    def __init__(self, rows: Sequence[PartyRow], k0: int | None = None,
                 bandwidth: BandwidthConfig | None = None, seed: int = 0, tail: str = "plain",
                 specs: dict | None = None):
        if tail not in TAILS:
            raise ValueError(f"unknown tail convention {tail!r}")
        self.rows = list(rows)
        if len(self.rows) < 2:
            raise ValueError("need training parties")
        self.bandwidth = bandwidth or BandwidthConfig()
        self.seed = seed
        self.tail = tail
        c = np.array([r.c for r in self.rows])
        self.k0 = default_k0(c) if k0 is None else int(k0)
        if self.k0 < 1:
            raise ValueError("k0 must be >= 1")
        X = np.array([[r.v, r.t] for r in self.rows])
        S = np.array([r.s for r in self.rows])
        self.models: dict[int, KernelModel] = {}
        self.meta: dict[int, dict] = {}
        levels = sorted({int(x) for x in c if x < self.k0}) + [self.k0]
        if len(self.rows) < 50:
            warnings.warn(f"only {len(self.rows)} training parties", stacklevel=2)
        for lv in levels:
            mask = c >= lv
            if lv < self.k0 and mask.sum() < MIN_STRATUM:
                warnings.warn(f"stratum c={lv} has {mask.sum()} rows; using the pooled stratum", stacklevel=2)
                continue
            if mask.sum() == 0:
                continue
            if specs and lv in specs:
                self.models[lv] = KernelModel(X[mask], S[mask], specs[lv])
                self.meta[lv] = {"rows": int(mask.sum()), "selected_on": 0, "score": None}
            else:
                self.models[lv], self.meta[lv] = _fit_stratum(X[mask], S[mask], self.bandwidth, seed)
        if not self.models:
            raise ValueError("no stratum could be trained")

    def stratum_for(self, c: int) -> int:
        if c >= self.k0 and self.k0 in self.models:
            return self.k0
        present = sorted(self.models)
        above = [k for k in present if k >= c]
        return above[0] if above else present[-1]

    def cdf(self, v: float, t: float, s: float, c: int) -> tuple[float, float]:
        """(F(s), F(s-)) under the stratum model for ``c``."""
        m = self.models[self.stratum_for(c)]
        W = m.weights([v, t])[0]
        F = float(np.clip(np.sum(W * (m.s <= s)), 0.0, 1.0))
        F_left = float(np.clip(np.sum(W * (m.s < s)), 0.0, 1.0))
        return F, F_left

    def party_p_value(self, row) -> float:
        F, F_left = self.cdf(row.v, row.t, row.s, row.c)
        return tail_p_value(F, F_left, self.tail)

    def specs(self) -> dict:
        return {lv: m.spec for lv, m in self.models.items()}

    def to_dict(self) -> dict:
        return {
            "version": BUNDLE_VERSION,
            "k0": self.k0,
            "seed": self.seed,
            "tail": self.tail,
            "bandwidth": {**asdict(self.bandwidth), "h0_grid": list(self.bandwidth.h0_grid),
                          "k_grid": list(self.bandwidth.k_grid)},
            "strata": {str(lv): {"spec": m.spec.to_dict(), **self.meta[lv]}
                       for lv, m in sorted(self.models.items())},
            "rows": [asdict(r) for r in self.rows],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SeatsVotesModel":
        if d.get("version") != BUNDLE_VERSION:
            raise ValueError(f"unsupported seats-votes model version {d.get('version')}")
        bw = d["bandwidth"]
        cfg = BandwidthConfig(bw["scheme"], tuple(bw["h0_grid"]), tuple(bw["k_grid"]),
                              bw["criterion"], bw["select_rows"])
        specs = {int(k): BandwidthSpec.from_dict(v["spec"]) for k, v in d["strata"].items()}
        rows = [PartyRow(**r) for r in d["rows"]]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            m = cls(rows, d["k0"], cfg, d["seed"], d["tail"], specs=specs)
        for k, v in d["strata"].items():
            m.meta[int(k)] = {kk: vv for kk, vv in v.items() if kk != "spec"}
        return m


def tail_p_value(F: float, F_left: float | None = None, tail: str = "plain") -> float:
    """min{F, 1 - F} clamped to [1e-6, 0.5].

    With ``tail="mid"`` F is the mid-distribution value (F(s) + F(s-)) / 2,
    which keeps discrete seat shares from producing p = 0 for outcomes that
    are the most likely ones.
    """
    if tail == "mid":
        if F_left is None:
            raise ValueError("mid tail needs F(s-)")
        F = 0.5 * (F + F_left)
    elif tail != "plain":
        raise ValueError(f"unknown tail convention {tail!r}")
    return float(min(max(min(F, 1.0 - F), P_FLOOR), 0.5))


def train_seats_votes(rows: Sequence[PartyRow], k0: int | None = None,
                      bandwidth: BandwidthConfig | None = None, seed: int = 0,
                      tail: str = "plain") -> SeatsVotesModel:
    return SeatsVotesModel(rows, k0, bandwidth, seed, tail)


def election_p_value(p_values: Sequence[float], weights: Sequence[float], clamp: bool = True) -> float:
    """Weighted geometric mean exp(sum w_i log pi_i)."""
    p = np.asarray(p_values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if p.shape != w.shape or p.size == 0:
        raise ValueError("need one weight per p-value")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights sum to {w.sum()}, not 1")
    if np.any(p <= 0):
        raise ValueError("p-values must be positive")
    pi = math.exp(float(np.sum(w * np.log(p))))
    return min(max(pi, P_FLOOR), 0.5) if clamp else pi


def score_election(model: SeatsVotesModel, thresholds: ThresholdModel, e: Election,
                   alpha: float = 0.05) -> ElectionScore:
    rows = party_rows([e], thresholds)
    scores = [PartyScore(**asdict(r), p_value=model.party_p_value(r)) for r in rows]
    scores.sort(key=lambda x: x.party_id)
    w = np.array([x.w for x in scores])
    pi = election_p_value([x.p_value for x in scores], w / w.sum())
    return ElectionScore(e.election_id, scores, pi, pi < alpha)


@dataclass
class DatasetScore:
    elections: list
    alpha: float
    summary: dict = field(default_factory=dict)


def score_dataset(model: SeatsVotesModel, thresholds: ThresholdModel,
                  elections: Iterable[Election], alpha: float = 0.05) -> DatasetScore:
    out = [score_election(model, thresholds, e, alpha) for e in elections]
    out.sort(key=lambda x: x.election_id)
    if out:
        pis = np.array([x.pi for x in out])
        summary = {"elections": len(out), "mean_pi": float(pis.mean()),
                   "fraction_flagged": float(np.mean([x.flagged for x in out])), "alpha": alpha}
    else:
        summary = {"elections": 0, "mean_pi": None, "fraction_flagged": None, "alpha": alpha}
    return DatasetScore(out, alpha, summary)


def party_scores_csv(ds: DatasetScore) -> str:
    lines = ["election_id,party_id,v,s,t,c,w,p_value"]
    for e in ds.elections:
        for p in e.party_scores:
            lines.append(f"{p.election_id},{p.party_id},{p.v:.6f},{p.s:.6f},{p.t:.6f},{p.c},{p.w:.6f},{p.p_value:.6g}")
    return "\n".join(lines) + "\n"


def election_scores_csv(ds: DatasetScore) -> str:
    lines = ["election_id,pi,flagged"]
    for e in ds.elections:
        lines.append(f"{e.election_id},{e.pi:.6g},{int(e.flagged)}")
    return "\n".join(lines) + "\n"


def summary_json(ds: DatasetScore) -> str:
    return json.dumps(ds.summary, sort_keys=True, indent=1) + "\n"


def null_density(x: float, n: int) -> float:
    """(-2 log x)^(n-1) / (2 x (n-1)!) on (0, 1), evaluated as written.

    This is a reference diagnostic only; it does not integrate to one.
    """
    if not 0.0 < x < 1.0:
        raise ValueError("x must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    return (-2.0 * math.log(x)) ** (n - 1) / (2.0 * x * math.factorial(n - 1))


def null_mc_oracle(n: int, weights=None, samples: int = 10 ** 5, seed: int = 0) -> np.ndarray:
    """Sorted draws of exp(sum w_i log P_i) with P_i ~ Uniform(0, 1/2) i.i.d."""
    if samples < 10 ** 4:
        raise ValueError("use at least 10^4 samples")
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    if w.size != n:
        raise ValueError("one weight per party")
    rng = np.random.default_rng(seed)
    P = 0.5 * (1.0 - rng.random((samples, n)))  # (0, 1/2]
    return np.sort(np.exp(np.log(P) @ w))


def empirical_cdf(sorted_draws: np.ndarray, x) -> np.ndarray:
    return np.searchsorted(sorted_draws, np.asarray(x, dtype=float), side="right") / sorted_draws.size
