"""Fair-versus-gerrymandered detection experiment on synthetic precinct grids."""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.metrics import roc_auc_score

from ..scoring import BandwidthConfig, SeatsVotesModel, party_rows, score_election
from ..thresholds import ThresholdModel
from .graph import PrecinctGraph, evaluate_plan, plan_to_election, synthetic_grid
from .mcmc import ChainParams, sample_fair_plans
from .optimize import optimize_unfair_plan


@dataclass
class ExperimentConfig:
    rows: int = 8
    cols: int = 8
    districts: int = 16
    delta: float = 0.25
    fair_count: int = 64
    margins: tuple = (0.0, 0.01, 0.02, 0.03, 0.04, 0.06, 0.08, 0.10)
    alpha: float = 0.05
    # one plan per auxiliary grid keeps leave-one-out selection honest
    train_graphs: int = 512
    train_plans_per_graph: int = 1
    train_burn_in: int = 1000
    train_lead_range: tuple = (-0.12, 0.12)
    # auxiliary geographies vary in polarization and clustering and are not
    # symmetrized, so the corpus spans many seat-vote curves
    train_spread_range: tuple = (0.05, 0.25)
    train_blur_range: tuple = (0.5, 2.5)
    burn_in: int = 2000
    thinning: int = 100
    coarse_target: int = 40
    bandwidth: BandwidthConfig = field(default_factory=BandwidthConfig)
    tail: str = "plain"


@dataclass
class PlanRecord:
    plan_id: str
    label: str  # "fair" or "unfair"
    party: str | None
    margin: float | None
    seats: dict
    pi: float
    flagged: bool


@dataclass
class ExperimentReport:
    records: list
    precision: float | None
    recall: float | None
    auc: float | None
    meta: dict

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "auc": self.auc,
                "plans": [asdict(r) for r in self.records], "meta": self.meta}


def build_training_corpus(cfg: ExperimentConfig, seed: int) -> list:
    """Elections from fair plans on auxiliary grids with varied leads and geographies."""
    elections = []
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0x7A1,)))
    leads = rng.uniform(*cfg.train_lead_range, size=cfg.train_graphs)
    spreads = rng.uniform(*cfg.train_spread_range, size=cfg.train_graphs)
    blurs = rng.uniform(*cfg.train_blur_range, size=cfg.train_graphs)
    params = ChainParams(delta=cfg.delta, burn_in=cfg.train_burn_in, thinning=cfg.thinning)
    for i, lead in enumerate(leads):
        g = synthetic_grid(cfg.rows, cfg.cols, seed=seed * 1000 + 101 + i, lead=float(lead),
                           spread=float(spreads[i]), blur=float(blurs[i]), symmetric=False)
        batch = sample_fair_plans(g, cfg.train_plans_per_graph, cfg.districts, params,
                                  seed=seed * 1000 + 101 + i)
        for j, p in enumerate(batch.plans):
            elections.append(plan_to_election(g, p, f"aux{i:02d}-{j:03d}"))
    return elections


def roc_auc_lower_is_positive(pi_pos, pi_neg) -> float:
    y = np.concatenate([np.ones(len(pi_pos)), np.zeros(len(pi_neg))])
    score = -np.concatenate([pi_pos, pi_neg])
    return float(roc_auc_score(y, score))


def run_experiment(cfg: ExperimentConfig | None = None, seed: int = 0,
                   graph: PrecinctGraph | None = None) -> ExperimentReport:
    cfg = cfg or ExperimentConfig()
    g = graph or synthetic_grid(cfg.rows, cfg.cols, seed=seed)
    thresholds = ThresholdModel()
    with warnings.catch_warnings():
        # two-party plans make the threshold feature constant; it is dropped
        warnings.simplefilter("ignore")
        corpus = build_training_corpus(cfg, seed)
        model = SeatsVotesModel(party_rows(corpus, thresholds), bandwidth=cfg.bandwidth, seed=seed,
                                tail=cfg.tail)
    params = ChainParams(delta=cfg.delta, burn_in=cfg.burn_in, thinning=cfg.thinning)
    fair = sample_fair_plans(g, cfg.fair_count, cfg.districts, params, seed=seed)
    records = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i, p in enumerate(fair.plans):
            es = score_election(model, thresholds, plan_to_election(g, p, f"fair{i:03d}"), cfg.alpha)
            records.append(PlanRecord(f"fair{i:03d}", "fair", None, None, evaluate_plan(g, p).seats,
                                      es.pi, es.flagged))
        for party in g.parties:
            starts = sorted(fair.plans, key=lambda p: -evaluate_plan(g, p).seats[party])[:1]
            for m in cfg.margins:
                res = optimize_unfair_plan(g, party, cfg.districts, cfg.delta, margin=m,
                                           seed=seed, coarse_target=cfg.coarse_target, starts=starts)
                pid = f"unfair-{party}-{m:.2f}"
                es = score_election(model, thresholds, plan_to_election(g, res.plan, pid), cfg.alpha)
                records.append(PlanRecord(pid, "unfair", party, m, evaluate_plan(g, res.plan).seats,
                                          es.pi, es.flagged))
    fair_pi = [r.pi for r in records if r.label == "fair"]
    unfair_pi = [r.pi for r in records if r.label == "unfair"]
    flagged = [r for r in records if r.flagged]
    precision = (sum(r.label == "unfair" for r in flagged) / len(flagged)) if flagged else None
    recall = (sum(r.flagged for r in records if r.label == "unfair") / len(unfair_pi)) if unfair_pi else None
    auc = roc_auc_lower_is_positive(unfair_pi, fair_pi) if fair_pi and unfair_pi else None
    meta = {"seed": int(seed), "config": {k: (list(v) if isinstance(v, tuple) else v)
                                          for k, v in asdict(cfg).items() if k != "bandwidth"},
            "bandwidth": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg.bandwidth).items()},
            "training_elections": len(corpus), "k0": model.k0,
            "strata": {str(k): v.spec.to_dict() for k, v in model.models.items()},
            "chain": fair.meta, "vote_share": {p: float(g.votes[:, i].sum() / g.votes.sum())
                                               for i, p in enumerate(g.parties)}}
    return ExperimentReport(records, precision, recall, auc, meta)
