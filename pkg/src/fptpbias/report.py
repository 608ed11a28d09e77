"""Plot-ready tables: seats-votes curves and empirical/expected seat-share surfaces."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .scoring import PartyRow, SeatsVotesModel


@dataclass
class CurveTable:
    stratum: np.ndarray
    t_quantile: np.ndarray
    t: np.ndarray
    v: np.ndarray
    expected: np.ndarray

    def to_tsv(self) -> str:
        lines = ["stratum\tt_quantile\tt\tv\texpected_s"]
        for row in zip(self.stratum, self.t_quantile, self.t, self.v, self.expected):
            lines.append(f"{int(row[0])}\t{row[1]:.4f}\t{row[2]:.6f}\t{row[3]:.6f}\t{row[4]:.6f}")
        return "\n".join(lines) + "\n"


def seats_votes_curves(model: SeatsVotesModel, v_points: int = 101,
                       t_quantiles: Sequence[float] = (0.1, 0.5, 0.9)) -> CurveTable:
    """E[S | v, t] on a vote-share grid, per stratum, at quantiles of the stratum's t."""
    v = np.linspace(0.0, 1.0, v_points)
    cols = {k: [] for k in ("stratum", "t_quantile", "t", "v", "expected")}
    for lv in sorted(model.models):
        km = model.models[lv]
        t_train = np.array([r.t for r in model.rows if r.c >= lv])
        for q in t_quantiles:
            t = float(np.quantile(t_train, q))
            e = km.predict(np.column_stack([v, np.full_like(v, t)]))
            cols["stratum"].append(np.full(v_points, lv))
            cols["t_quantile"].append(np.full(v_points, q))
            cols["t"].append(np.full(v_points, t))
            cols["v"].append(v)
            cols["expected"].append(e)
    return CurveTable(**{k: np.concatenate(x) for k, x in cols.items()})


@dataclass
class SurfaceTable:
    v_edges: np.ndarray
    t_edges: np.ndarray
    count: np.ndarray  # (bins_v, bins_t)
    empirical: np.ndarray
    expected: np.ndarray

    @property
    def difference(self) -> np.ndarray:
        return self.empirical - self.expected

    def to_tsv(self) -> str:
        lines = ["v_lo\tv_hi\tt_lo\tt_hi\tparties\tempirical_s\texpected_s\tdifference"]
        diff = self.difference
        for i in range(self.count.shape[0]):
            for j in range(self.count.shape[1]):
                if self.count[i, j] == 0:
                    continue
                lines.append(f"{self.v_edges[i]:.6f}\t{self.v_edges[i + 1]:.6f}\t{self.t_edges[j]:.6f}\t"
                             f"{self.t_edges[j + 1]:.6f}\t{int(self.count[i, j])}\t{self.empirical[i, j]:.6f}\t"
                             f"{self.expected[i, j]:.6f}\t{diff[i, j]:.6f}")
        return "\n".join(lines) + "\n"


def expected_seat_shares(model: SeatsVotesModel, rows: Sequence[PartyRow]) -> np.ndarray:
    out = np.empty(len(rows))
    by_stratum: dict[int, list[int]] = {}
    for i, r in enumerate(rows):
        by_stratum.setdefault(model.stratum_for(r.c), []).append(i)
    for lv, idx in sorted(by_stratum.items()):
        X = np.array([[rows[i].v, rows[i].t] for i in idx])
        out[idx] = model.models[lv].predict(X)
    return out


def seat_share_surfaces(model: SeatsVotesModel, rows: Sequence[PartyRow], bins: int = 10) -> SurfaceTable:
    """Mean observed and model-expected seat share over a (v, t) grid of bins."""
    if not rows:
        raise ValueError("no parties to tabulate")
    v = np.array([r.v for r in rows])
    t = np.array([r.t for r in rows])
    s = np.array([r.s for r in rows])
    e = expected_seat_shares(model, rows)
    v_edges = np.linspace(0.0, 1.0, bins + 1)
    t_lo, t_hi = float(t.min()), float(t.max())
    if t_hi - t_lo < 1e-12:
        t_lo, t_hi = t_lo - 0.005, t_hi + 0.005
    t_edges = np.linspace(t_lo, t_hi, bins + 1)
    iv = np.clip(np.searchsorted(v_edges, v, side="right") - 1, 0, bins - 1)
    it = np.clip(np.searchsorted(t_edges, t, side="right") - 1, 0, bins - 1)
    count = np.zeros((bins, bins))
    emp = np.zeros((bins, bins))
    exp_ = np.zeros((bins, bins))
    np.add.at(count, (iv, it), 1)
    np.add.at(emp, (iv, it), s)
    np.add.at(exp_, (iv, it), e)
    with np.errstate(invalid="ignore", divide="ignore"):
        emp = np.where(count > 0, emp / count, np.nan)
        exp_ = np.where(count > 0, exp_ / count, np.nan)
    return SurfaceTable(v_edges, t_edges, count, emp, exp_)
