"""Effective seat thresholds.

For every candidate count ``n`` a decision boundary ``t(phi)`` separates
winning from losing candidates in the (vote share, effective competitors)
plane.  Two-candidate races have ``t = 1/2``; three-candidate races use the
closed form; larger ``n`` are learned from data with a cubic polynomial
kernel SVM whose boundary is smoothed by a non-increasing cubic B-spline.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.interpolate import BSpline
from scipy.optimize import lsq_linear
from sklearn.model_selection import StratifiedKFold, KFold
from sklearn.svm import LinearSVC

from .competition import analytic_boundary_n3, analytic_boundary_n3_array, competitor_phi
from .election import Election

MODEL_VERSION = 1
MIN_GROUP = 200


@dataclass
class TrainingPoints:
    v: np.ndarray
    phi: np.ndarray
    won: np.ndarray

    def __len__(self):
        return self.v.size

    @classmethod
    def concat(cls, parts: Sequence["TrainingPoints"]) -> "TrainingPoints":
        return cls(np.concatenate([p.v for p in parts]),
                   np.concatenate([p.phi for p in parts]),
                   np.concatenate([p.won for p in parts]))


def points_from_shares(shares: np.ndarray) -> TrainingPoints:
    """One point per candidate of each row of a (districts, n) share array.

    Rows with a tie for first place are skipped.
    """
    shares = np.asarray(shares, dtype=float)
    srt = np.sort(shares, axis=1)
    keep = srt[:, -1] > srt[:, -2]
    shares = shares[keep]
    phi = competitor_phi(shares)
    won = shares == shares.max(axis=1, keepdims=True)
    ok = np.isfinite(phi) & (shares < 1.0)
    return TrainingPoints(shares[ok], phi[ok], won[ok])


def extract_training_points(elections: Iterable[Election]) -> dict[int, TrainingPoints]:
    """Group candidate points by candidate count; tied districts contribute nothing."""
    buckets: dict[int, list] = {}
    for e in elections:
        for d in e.districts:
            if d.is_tie or d.n_candidates < 2:
                continue
            sh = np.array(d.shares())
            buckets.setdefault(d.n_candidates, []).append(sh)
    out = {}
    for n, rows in sorted(buckets.items()):
        out[n] = points_from_shares(np.vstack(rows))
    return out


class CubicKernelMap:
    """Explicit feature map of k(x, y) = (gamma <x, y> + coef0)^3.

    A linear soft-margin SVM on these features is the cubic polynomial kernel
    SVM; the explicit form keeps training linear in the number of points.
    """

    def __init__(self, dim: int, gamma: float | None = None, coef0: float = 1.0, degree: int = 3):
        self.dim = dim
        self.gamma = 1.0 / dim if gamma is None else gamma
        self.coef0 = coef0
        self.degree = degree
        terms = []
        for total in range(degree + 1):
            for combo in combinations_with_replacement(range(dim), total):
                powers = np.bincount(np.array(combo, dtype=int), minlength=dim) if combo else np.zeros(dim, int)
                a0 = degree - total
                multinom = math.factorial(degree) / (
                    math.factorial(a0) * np.prod([math.factorial(int(p)) for p in powers]))
                coef = math.sqrt(multinom * self.gamma ** total * coef0 ** a0)
                terms.append((powers, coef))
        self.powers = np.array([t[0] for t in terms])
        self.coefs = np.array([t[1] for t in terms])

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.ones((X.shape[0], len(self.coefs)))
        for j, p in enumerate(self.powers):
            for d in range(self.dim):
                if p[d]:
                    out[:, j] *= X[:, d] ** p[d]
        return out * self.coefs

    def kernel(self, X, Y):
        return (self.gamma * np.asarray(X) @ np.asarray(Y).T + self.coef0) ** self.degree


@dataclass
class SvmBoundary:
    mean: np.ndarray
    scale: np.ndarray
    weights: np.ndarray
    intercept: float
    C: float
    kmap: CubicKernelMap = field(repr=False)

    def decision(self, v, phi) -> np.ndarray:
        X = (np.column_stack([np.ravel(v), np.ravel(phi)]) - self.mean) / self.scale
        return self.kmap.transform(X) @ self.weights + self.intercept


def fit_svm(points: TrainingPoints, c_grid=(0.1, 1.0, 10.0), folds: int = 3,
            seed: int = 0, max_iter: int = 20000) -> SvmBoundary:
    """Soft-margin cubic-kernel SVM on standardized (v, phi); C by K-fold accuracy."""
    y = points.won.astype(int)
    if y.min() == y.max():
        raise ValueError("training points carry a single label")
    X = np.column_stack([points.v, points.phi])
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    kmap = CubicKernelMap(2)
    Z = kmap.transform((X - mean) / scale)

    def make(C):
        return LinearSVC(C=C, loss="hinge", dual=True, max_iter=max_iter,
                         intercept_scaling=10.0, random_state=seed)

    best_C, best_acc = c_grid[0], -1.0
    if len(c_grid) > 1:
        skf = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
        for C in c_grid:
            accs = []
            for tr, te in skf.split(Z, y):
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    m = make(C).fit(Z[tr], y[tr])
                accs.append(np.mean(m.predict(Z[te]) == y[te]))
            acc = float(np.mean(accs))
            if acc > best_acc + 1e-12:
                best_C, best_acc = C, acc
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = make(best_C).fit(Z, y)
    return SvmBoundary(mean, scale, m.coef_.ravel().copy(), float(m.intercept_[0]), best_C, kmap)


def trace_boundary(decision, n: int, grid_size: int = 200, v_grid: int = 256,
                   tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Boundary points (phi_g, v*) of a decision function f(v, phi) > 0 == won.

    For each phi on an even grid over [1, n-1], v* is the smallest v in
    [1/n, 1/2] above which f stays positive on the scan grid, refined by
    bisection.  Returns phi grid and v* (clamped to [1/n, 1/2]).
    """
    lo, hi = 1.0 / n, 0.5
    phis = np.linspace(1.0, n - 1.0, grid_size)
    vs = np.linspace(lo, hi, v_grid)
    P, V = np.meshgrid(phis, vs, indexing="ij")
    F = decision(V.ravel(), P.ravel()).reshape(P.shape) > 0
    out = np.empty(grid_size)
    for g, row in enumerate(F):
        if not row[-1]:
            out[g] = hi
            continue
        neg = np.flatnonzero(~row)
        if neg.size == 0:
            out[g] = lo
            continue
        a, b = vs[neg[-1]], vs[neg[-1] + 1]
        while b - a > tol:
            mid = 0.5 * (a + b)
            if decision(np.array([mid]), np.array([phis[g]]))[0] > 0:
                b = mid
            else:
                a = mid
        out[g] = 0.5 * (a + b)
    return phis, out


@dataclass
class MonotoneSpline:
    """Cubic B-spline with non-increasing coefficients clipped to [lo, hi]."""
    knots: np.ndarray
    coefs: np.ndarray
    lo: float
    hi: float

    def __call__(self, x) -> np.ndarray:
        x = np.clip(np.asarray(x, dtype=float), self.knots[0], self.knots[-1])
        y = BSpline(self.knots, self.coefs, 3, extrapolate=False)(x)
        return np.clip(y, self.lo, self.hi)


def _knot_vector(a: float, b: float, interior: np.ndarray) -> np.ndarray:
    return np.concatenate([[a] * 4, np.sort(interior), [b] * 4])


def interior_knots(x: np.ndarray, y: np.ndarray, count: int, placement: str) -> np.ndarray:
    a, b = x[0], x[-1]
    if count == 0:
        return np.empty(0)
    q = np.arange(1, count + 1) / (count + 1)
    if placement == "uniform":
        return a + (b - a) * q
    if placement == "arclength":
        # denser knots where the curve moves fast; x and y scaled to unit range
        dx = np.diff(x) / (b - a)
        dy = np.diff(y) / max(np.ptp(y), 1e-12)
        s = np.concatenate([[0.0], np.cumsum(np.hypot(dx, dy))])
        knots = np.interp(q * s[-1], s, x)
        return np.unique(np.clip(knots, a + 1e-9, b - 1e-9))
    raise ValueError(f"unknown knot placement {placement!r}")


def fit_monotone_spline(x, y, knots: np.ndarray, lo: float, hi: float) -> MonotoneSpline:
    """Least-squares cubic B-spline with non-increasing coefficients.

    Coefficients are written as c_j = base + sum_{l > j} d_l with d_l >= 0,
    which makes the spline non-increasing; they are then clipped to
    [lo, hi] so every value of the spline stays in range.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    B = BSpline.design_matrix(np.clip(x, knots[0], knots[-1]), knots, 3).toarray()
    m = B.shape[1]
    # columns: base, d_1..d_{m-1}; c_j = base + sum_{l >= j+1} d_l
    T = np.zeros((m, m))
    T[:, 0] = 1.0
    for j in range(m):
        T[j, j + 1:] = 1.0
    A = B @ T
    lb = np.concatenate([[-np.inf], np.zeros(m - 1)])
    res = lsq_linear(A, y, bounds=(lb, np.full(m, np.inf)), method="bvls")
    coefs = np.clip(T @ res.x, lo, hi)
    return MonotoneSpline(knots, coefs, lo, hi)


def select_spline(x, y, lo, hi, max_interior: int = 20, folds: int = 5, seed: int = 0,
                  placements=("uniform", "arclength")) -> tuple[MonotoneSpline, dict]:
    """Choose interior knot count and placement by K-fold CV squared error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a, b = x[0], x[-1]
    kf = KFold(n_splits=folds, shuffle=True, random_state=seed)
    splits = list(kf.split(x))
    best = None
    for placement in placements:
        for count in range(0, max_interior + 1):
            inner = interior_knots(x, y, count, placement)
            if inner.size + 4 > x.size * (folds - 1) / folds:
                break
            knots = _knot_vector(a, b, inner)
            err = 0.0
            for tr, te in splits:
                sp = fit_monotone_spline(x[tr], y[tr], knots, lo, hi)
                err += float(np.sum((sp(x[te]) - y[te]) ** 2))
            key = (err / x.size, count, placement)
            if best is None or key[0] < best[0] - 1e-15:
                best = key
    if best is None:
        best = (float("nan"), 0, "uniform")
    _, count, placement = best
    knots = _knot_vector(a, b, interior_knots(x, y, count, placement))
    return fit_monotone_spline(x, y, knots, lo, hi), {
        "interior_knots": int(count), "placement": placement, "cv_mse": best[0]}


@dataclass
class BoundaryEntry:
    n: int
    kind: str  # "half", "analytic" or "spline"
    spline: MonotoneSpline | None = None
    meta: dict = field(default_factory=dict)

    def threshold(self, n: int, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        lo = 1.0 / n
        if self.kind == "half":
            return np.full(phi.shape, 0.5)
        if self.kind == "analytic":
            return analytic_boundary_n3_array(np.clip(phi, 1.0, 2.0))
        x = np.clip(phi, 1.0, self.spline.knots[-1])
        return np.clip(self.spline(x), lo, 0.5)


def classification_error(entry: BoundaryEntry, n: int, points: TrainingPoints) -> float:
    if len(points) == 0:
        return float("nan")
    pred = points.v > entry.threshold(n, points.phi)
    return float(np.mean(pred != points.won))


def train_boundary(points: TrainingPoints, n: int, c_grid=(0.1, 1.0, 10.0),
                   spline_folds: int = 5, seed: int = 0, grid_size: int = 200,
                   max_interior: int = 20, holdout: float = 0.2,
                   max_svm_points: int = 40000) -> BoundaryEntry:
    """SVM + monotone spline boundary for one candidate count.

    A random ``holdout`` fraction is kept out of training and used for the
    reported held-out classification error.
    """
    if len(points) == 0 or points.won.all() or not points.won.any():
        raise ValueError(f"n={n}: both winners and losers are needed")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n,)))
    perm = rng.permutation(len(points))
    n_test = int(round(holdout * len(points))) if len(points) >= 20 else 0
    test, train = perm[:n_test], perm[n_test:]
    if max_svm_points and train.size > max_svm_points:
        train = np.sort(train[:max_svm_points])
    tr = TrainingPoints(points.v[train], points.phi[train], points.won[train])
    te = TrainingPoints(points.v[test], points.phi[test], points.won[test])
    svm = fit_svm(tr, c_grid=c_grid, seed=seed)
    phis, vstar = trace_boundary(svm.decision, n, grid_size=grid_size)
    spline, sel = select_spline(phis, vstar, 1.0 / n, 0.5, max_interior=max_interior,
                                folds=spline_folds, seed=seed)
    entry = BoundaryEntry(n, "spline", spline)
    entry.meta = {
        "points": int(len(points)), "train_points": int(len(tr)), "test_points": int(len(te)),
        "svm_C": svm.C, "seed": int(seed), **sel,
        "error_in_sample": classification_error(entry, n, tr),
        "error_held_out": classification_error(entry, n, te),
    }
    return entry


class ThresholdModel:
    """Per-candidate-count decision boundaries t(phi)."""

    def __init__(self, entries: Mapping[int, BoundaryEntry] | None = None, meta: dict | None = None):
        self.entries: dict[int, BoundaryEntry] = dict(entries or {})
        self.meta = dict(meta or {})

    def entry_for(self, n: int) -> BoundaryEntry:
        if n <= 2:
            return BoundaryEntry(n, "half")
        if n == 3 and 3 not in self.entries:
            return BoundaryEntry(3, "analytic")
        if n in self.entries:
            return self.entries[n]
        learned = sorted(k for k, e in self.entries.items() if e.kind == "spline")
        if not learned:
            raise KeyError(f"no boundary available for n={n}")
        larger = [k for k in learned if k > n]
        return self.entries[larger[0] if larger else learned[-1]]

    def effective_seat_threshold(self, n: int, phi) -> np.ndarray | float:
        """Threshold for a candidate facing ``n - 1`` competitors with ``phi`` effective ones."""
        if n < 2:
            raise ValueError("a seat threshold needs at least two candidates")
        scalar = np.ndim(phi) == 0
        phi = np.asarray(phi, dtype=float)
        if np.any(phi < 1.0 - 1e-6) or np.any(phi > n - 1 + 1e-6):
            warnings.warn(f"phi outside [1, {n - 1}] clamped", stacklevel=2)
        phi = np.clip(phi, 1.0, max(n - 1.0, 1.0))
        t = self.entry_for(n).threshold(n, phi)
        t = np.clip(t, 1.0 / n, 0.5)
        return float(t) if scalar else t

    def classify(self, v, n: int, phi):
        """1 iff the vote share exceeds the effective seat threshold."""
        t = self.effective_seat_threshold(n, phi)
        out = (np.asarray(v) > t).astype(int)
        return int(out) if np.ndim(out) == 0 else out

    def district_thresholds(self, shares: Sequence[float]) -> np.ndarray:
        sh = np.asarray(shares, dtype=float)[None, :]
        n = sh.shape[1]
        if n == 1:
            return np.array([0.5])
        phi = competitor_phi(sh)[0]
        phi = np.where(np.isfinite(phi), phi, 1.0)
        return np.asarray(self.effective_seat_threshold(n, phi), dtype=float).reshape(-1)

    def mean_effective_seat_threshold(self, election: Election, party_id: str) -> float:
        """Unweighted mean of the party's district thresholds."""
        ts = []
        for d in election.districts:
            if party_id in d.party_ids:
                j = d.party_ids.index(party_id)
                ts.append(self.district_thresholds(d.shares())[j])
        if not ts:
            raise ValueError(f"party {party_id} contests no scored district")
        return float(np.mean(ts))

    def party_thresholds(self, election: Election) -> dict[str, float]:
        acc: dict[str, list] = {}
        for d in election.districts:
            t = self.district_thresholds(d.shares())
            for pid, x in zip(d.party_ids, t):
                acc.setdefault(pid, []).append(x)
        return {pid: float(np.mean(v)) for pid, v in acc.items()}

    def to_dict(self) -> dict:
        ents = {}
        for n, e in sorted(self.entries.items()):
            d = {"kind": e.kind, "meta": e.meta}
            if e.spline is not None:
                d["knots"] = [float(x) for x in e.spline.knots]
                d["coefficients"] = [float(x) for x in e.spline.coefs]
            ents[str(n)] = d
        return {"version": MODEL_VERSION, "entries": ents, "meta": self.meta}

    @classmethod
    def from_dict(cls, d: dict) -> "ThresholdModel":
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported threshold model version {d.get('version')}")
        entries = {}
        for key, e in d["entries"].items():
            n = int(key)
            spline = None
            if e["kind"] == "spline":
                spline = MonotoneSpline(np.array(e["knots"]), np.array(e["coefficients"]), 1.0 / n, 0.5)
            entries[n] = BoundaryEntry(n, e["kind"], spline, dict(e.get("meta", {})))
        return cls(entries, d.get("meta", {}))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ThresholdModel":
        return cls.from_dict(json.loads(text))


def merge_small_groups(groups: Mapping[int, TrainingPoints], min_group: int = MIN_GROUP) -> dict[int, TrainingPoints]:
    """Fold groups with fewer than ``min_group`` points into the next larger n.

    Only groups with n > 3 take part; a too-small largest group is folded
    downwards instead.
    """
    keys = sorted(k for k in groups if k > 3)
    out: dict[int, TrainingPoints] = {}
    carry: list[TrainingPoints] = []
    for k in keys:
        carry.append(groups[k])
        merged = TrainingPoints.concat(carry)
        if len(merged) >= min_group:
            out[k] = merged
            carry = []
    if carry:
        rest = TrainingPoints.concat(carry)
        if out:
            last = max(out)
            out[last] = TrainingPoints.concat([out[last], rest])
        elif len(rest):
            out[keys[-1]] = rest
    return out


def train_threshold_model(elections_or_groups, c_grid=(0.1, 1.0, 10.0), spline_folds: int = 5,
                          seed: int = 0, min_group: int = MIN_GROUP, grid_size: int = 200,
                          max_interior: int = 20, holdout: float = 0.2) -> ThresholdModel:
    if isinstance(elections_or_groups, Mapping):
        groups = dict(elections_or_groups)
    else:
        groups = extract_training_points(elections_or_groups)
    entries = {}
    for n, pts in merge_small_groups(groups, min_group).items():
        if pts.won.all() or not pts.won.any():
            continue
        entries[n] = train_boundary(pts, n, c_grid=c_grid, spline_folds=spline_folds, seed=seed,
                                    grid_size=grid_size, max_interior=max_interior, holdout=holdout)
    model = ThresholdModel(entries, {"seed": int(seed), "groups": {str(k): int(len(v)) for k, v in groups.items()}})
    if 3 in groups and len(groups[3]):
        entry3 = BoundaryEntry(3, "analytic")
        model.entries[3] = entry3
        entry3.meta = {"points": int(len(groups[3])),
                       "error_in_sample": classification_error(entry3, 3, groups[3])}
    return model
