"""Locally-constant (Nadaraya-Watson) kernel regression with a Gaussian kernel.

Bandwidths act as divisors of the coordinate differences.  Five bandwidth
schemes are supported:

``fixed``
    the same ``h0`` for every pair;
``generalized-nn``
    ``h0 * d(x0, k-th NN of x0)``;
``adaptive-nn``
    ``h0 * d(x0, k-th NN of x_j)``;
``sample-point-nn``
    ``h0 * d(x_j, k-th NN of x_j)``, the classical variable-bandwidth form;
``multivariate-adaptive-nn``
    per coordinate ``h0_i * |x0_i - y_i|`` where ``y_i`` is the ``i``-th
    coordinate of the ``k``-th nearest neighbour of ``x_j`` along dimension ``i``.

A point is never its own neighbour.  Training rows are stored in a canonical
(lexicographic) order so results do not depend on the input row order.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

SCHEMES = ("fixed", "generalized-nn", "adaptive-nn", "multivariate-adaptive-nn", "sample-point-nn")
CRITERIA = ("mse", "kl", "aicc")
EPS_FRACTION = 1e-8
KL_CLAMP = 1e-6
_CHUNK = 256


def gaussian_kernel(u) -> float:
    """Standard D-variate normal density at ``u``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return float((2 * math.pi) ** (-u.size / 2) * math.exp(-0.5 * float(u @ u)))


@dataclass(frozen=True)
class BandwidthSpec:
    scheme: str = "fixed"
    h0: float | tuple = 1.0
    k: int = 1

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown bandwidth scheme {self.scheme!r}")
        if np.any(np.asarray(self.h0, dtype=float) <= 0):
            raise ValueError("h0 must be positive")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    def to_dict(self) -> dict:
        h0 = list(self.h0) if isinstance(self.h0, tuple) else float(self.h0)
        return {"scheme": self.scheme, "h0": h0, "k": int(self.k)}

    @classmethod
    def from_dict(cls, d: dict) -> "BandwidthSpec":
        h0 = d["h0"]
        return cls(d["scheme"], tuple(h0) if isinstance(h0, list) else float(h0), int(d["k"]))


def _kth_neighbour_coordinate(col: np.ndarray, k: int) -> np.ndarray:
    """For each entry, the value of its k-th nearest other entry in 1-D.

    Distance ties prefer the smaller value.
    """
    n = col.size
    order = np.argsort(col, kind="stable")
    vals = col[order]
    offsets = np.concatenate([np.arange(-k, 0), np.arange(1, k + 1)])
    pos = np.arange(n)[:, None] + offsets[None, :]
    valid = (pos >= 0) & (pos < n)
    pos_c = np.clip(pos, 0, n - 1)
    dist = np.where(valid, np.abs(vals[pos_c] - vals[:, None]), np.inf)
    pick = np.argsort(dist, axis=1, kind="stable")[:, k - 1]
    nb_sorted = vals[pos_c[np.arange(n), pick]]
    out = np.empty(n)
    out[order] = nb_sorted
    return out


class KernelModel:
    """Kernel regression model over training rows ``x`` (N x D) and responses ``s``."""

    def __init__(self, x, s, spec: BandwidthSpec = BandwidthSpec(), weights=None):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        s = np.asarray(s, dtype=float)
        if x.shape[0] != s.shape[0] or x.shape[0] < 1:
            raise ValueError("x and s must have the same positive number of rows")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(s))):
            raise ValueError("non-finite training data")
        w = np.ones(s.size) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != s.shape or np.any(w < 0):
            raise ValueError("row weights must be non-negative, one per row")
        self.spec = spec
        self.dim_in = x.shape[1]
        rng_ = np.ptp(x, axis=0) if x.shape[0] else np.zeros(x.shape[1])
        self.active = np.flatnonzero(rng_ > 0)
        if self.active.size < self.dim_in:
            dropped = sorted(set(range(self.dim_in)) - set(self.active.tolist()))
            warnings.warn(f"constant feature dimension(s) {dropped} dropped", stacklevel=2)
        # canonical row order: lexicographic in (x..., s, weight)
        keys = [w, s] + [x[:, i] for i in reversed(range(x.shape[1]))]
        self.order = np.lexsort(keys)
        self.x = x[self.order][:, self.active]
        self.s = s[self.order]
        self.w = w[self.order]
        self.n = s.size
        self.eps = EPS_FRACTION * rng_[self.active]
        h0 = np.asarray(spec.h0, dtype=float)
        if h0.ndim == 0:
            h0 = np.full(self.dim_in, float(h0))
        if h0.size != self.dim_in:
            raise ValueError(f"h0 has {h0.size} entries for {self.dim_in} dimensions")
        self.h0 = h0[self.active]
        if spec.scheme != "fixed" and spec.k >= self.n:
            raise ValueError(f"k={spec.k} must be smaller than N={self.n}")
        self._tree = None
        self._row_knn = None
        self._row_nb = None
        if self.x.shape[1] and spec.scheme in ("generalized-nn", "adaptive-nn", "sample-point-nn"):
            self._tree = cKDTree(self.x)
            d, idx = self._tree.query(self.x, k=spec.k + 1)
            d = d.reshape(self.n, -1)
            idx = idx.reshape(self.n, -1)
            self._row_knn = d[:, -1]
            # drop the row itself (or one coincident copy) from its neighbour list
            rows = np.arange(self.n)
            own = idx == rows[:, None]
            skip = np.where(own.any(axis=1), own.argmax(axis=1), np.where(d[:, 0] == 0, 0, spec.k))
            keep = np.ones_like(own)
            keep[rows, skip] = False
            self._row_nb_idx = idx[keep].reshape(self.n, spec.k)[:, -1]
        if self.x.shape[1] and spec.scheme == "multivariate-adaptive-nn":
            self._row_nb = np.column_stack(
                [_kth_neighbour_coordinate(self.x[:, i], spec.k) for i in range(self.x.shape[1])])

    # -- bandwidths ---------------------------------------------------------

    def _query_knn(self, X0: np.ndarray) -> np.ndarray:
        k = self.spec.k
        d, _ = self._tree.query(X0, k=k + 1)
        d = d.reshape(X0.shape[0], -1)
        return np.where(d[:, 0] == 0.0, d[:, k], d[:, k - 1])

    def _bandwidths(self, X0: np.ndarray, q_knn=None) -> np.ndarray:
        """Bandwidths broadcastable to (Q, N, D)."""
        sch = self.spec.scheme
        if sch == "fixed":
            h = np.broadcast_to(self.h0, (1, 1, self.h0.size))
        elif sch == "generalized-nn":
            if q_knn is None:
                q_knn = self._query_knn(X0)
            h = (q_knn[:, None] * self.h0[None, :])[:, None, :]
        elif sch == "sample-point-nn":
            h = (self._row_knn[:, None] * self.h0[None, :])[None, :, :]
        elif sch == "adaptive-nn":
            nb = self.x[self._row_nb_idx]
            dist = np.sqrt(np.sum((X0[:, None, :] - nb[None, :, :]) ** 2, axis=2))
            h = dist[:, :, None] * self.h0[None, None, :]
        else:
            h = self.h0 * np.abs(X0[:, None, :] - self._row_nb[None, :, :])
        return np.maximum(h, self.eps)

    def bandwidth_for_pair(self, x0, j: int) -> np.ndarray:
        """Bandwidth vector for query ``x0`` and training row ``j`` (input order).

        Dropped constant dimensions are reported as NaN.
        """
        x0 = self._prep(x0)
        jj = int(np.flatnonzero(self.order == j)[0])
        out = np.full(self.dim_in, np.nan)
        if self.active.size:
            h = np.broadcast_to(self._bandwidths(x0), (1, self.n, self.active.size))
            out[self.active] = h[0, jj]
        return out

    # -- prediction ---------------------------------------------------------

    def _prep(self, X0) -> np.ndarray:
        X0 = np.asarray(X0, dtype=float)
        if X0.ndim == 0:
            X0 = X0[None]
        if X0.ndim == 1:
            X0 = X0[None, :] if self.dim_in > 1 or X0.size == 1 else X0[:, None]
        if X0.shape[1] != self.dim_in:
            raise ValueError(f"query has {X0.shape[1]} dims, model has {self.dim_in}")
        return X0[:, self.active]

    def _log_weights(self, X0: np.ndarray, q_knn=None) -> np.ndarray:
        if X0.shape[1] == 0:
            return np.zeros((X0.shape[0], self.n))
        h = self._bandwidths(X0, q_knn)
        u = (self.x[None, :, :] - X0[:, None, :]) / h
        return -0.5 * np.sum(u * u, axis=2)

    def _normalized(self, logw: np.ndarray, exclude=None) -> np.ndarray:
        if exclude is not None:
            logw = logw.copy()
            logw[np.arange(logw.shape[0]), exclude] = -np.inf
        m = logw.max(axis=1, keepdims=True)
        W = np.exp(logw - m) * self.w[None, :]
        tot = W.sum(axis=1, keepdims=True)
        bad = ~(tot[:, 0] > 0) | ~np.isfinite(tot[:, 0])
        if np.any(bad):
            warnings.warn("all kernel weights vanished; using the nearest row", stacklevel=3)
            for r in np.flatnonzero(bad):
                row = np.where(np.isfinite(logw[r]), logw[r], -np.inf)
                W[r] = 0.0
                W[r, int(np.argmax(row))] = 1.0
            tot = W.sum(axis=1, keepdims=True)
        return W / tot

    def weights(self, X0) -> np.ndarray:
        """Normalized kernel weights (Q x N) in canonical row order."""
        X0 = self._prep(X0)
        return self._normalized(self._log_weights(X0))

    def predict(self, X0, responses=None) -> np.ndarray:
        """E[S | x0] for each query row; ``responses`` (N,) or (N, L) in input order."""
        X0 = self._prep(X0)
        Y = self.s if responses is None else np.asarray(responses, dtype=float)[self.order]
        out = []
        for a in range(0, X0.shape[0], _CHUNK):
            W = self._normalized(self._log_weights(X0[a:a + _CHUNK]))
            out.append(_wsum(W, Y))
        res = np.concatenate(out, axis=0)
        lo, hi = Y.min(axis=0), Y.max(axis=0)
        return np.clip(res, lo, hi)

    def predict_expectation(self, x0) -> float:
        return float(self.predict(x0)[0])

    def predict_conditional_cdf(self, x0, s) -> float | np.ndarray:
        """F(s | x0) as the kernel average of 1{s_j <= s}; ``s`` may be a vector of levels."""
        levels = np.atleast_1d(np.asarray(s, dtype=float))
        ind = (self.s[:, None] <= levels[None, :]).astype(float)
        W = self._normalized(self._log_weights(self._prep(x0)))
        F = np.clip(_wsum(W, ind)[0], 0.0, 1.0)
        return float(F[0]) if np.ndim(s) == 0 else F

    def cdf_at(self, X0, levels) -> np.ndarray:
        """F(levels[q] | X0[q]) for paired queries and levels."""
        X0 = self._prep(X0)
        levels = np.asarray(levels, dtype=float)
        out = np.empty(X0.shape[0])
        for a in range(0, X0.shape[0], _CHUNK):
            W = self._normalized(self._log_weights(X0[a:a + _CHUNK]))
            ind = (self.s[None, :] <= levels[a:a + _CHUNK, None]).astype(float)
            out[a:a + _CHUNK] = np.sum(W * ind, axis=1)
        return np.clip(out, 0.0, 1.0)

    def loo_fit(self, Y=None):
        """Leave-one-out predictions, in-sample fit and smoother diagonal.

        ``Y`` is (N,) or (N, L) in canonical order.  Returns
        (loo, fitted, diag(H)).
        """
        Y = self.s if Y is None else Y
        Y2 = Y[:, None] if Y.ndim == 1 else Y
        loo = np.empty(Y2.shape)
        fit = np.empty(Y2.shape)
        diag = np.empty(self.n)
        knn = self._row_knn
        for a in range(0, self.n, _CHUNK):
            b = min(a + _CHUNK, self.n)
            idx = np.arange(a, b)
            logw = self._log_weights(self.x[a:b], None if knn is None else knn[a:b])
            Wf = self._normalized(logw)
            fit[a:b] = _wsum(Wf, Y2)
            diag[a:b] = Wf[np.arange(b - a), idx]
            if self.n > 1:
                Wl = self._normalized(logw, exclude=idx)
                loo[a:b] = _wsum(Wl, Y2)
            else:
                loo[a:b] = Y2[a:b]
        if Y.ndim == 1:
            loo, fit = loo[:, 0], fit[:, 0]
        return loo, fit, diag


def _wsum(W: np.ndarray, Y: np.ndarray) -> np.ndarray:
    # elementwise product then a row reduction: fixed summation order per row
    if Y.ndim == 1:
        return np.sum(W * Y[None, :], axis=1)
    return np.stack([np.sum(W * Y[None, :, l], axis=1) for l in range(Y.shape[1])], axis=1)


def cdf_levels(s: np.ndarray, count: int = 9) -> np.ndarray:
    """Distinct response quantiles (below the maximum) used as CDF indicator levels."""
    s = np.asarray(s, dtype=float)
    q = np.quantile(s, np.linspace(0.1, 0.9, count), method="lower")
    lv = np.unique(q)
    return lv[lv < s.max()]


@dataclass
class SelectionResult:
    spec: BandwidthSpec
    criterion: str
    score: float
    table: list = field(default_factory=list)


def _criterion_value(model: KernelModel, criterion: str, levels) -> tuple[float, str]:
    n = model.n
    if criterion == "mse":
        loo, _, _ = model.loo_fit()
        return float(np.mean((loo - model.s) ** 2)), ""
    if criterion == "kl":
        Y = (model.s[:, None] <= np.asarray(levels)[None, :]).astype(float)
        loo, _, _ = model.loo_fit(Y)
        p = np.clip(loo, KL_CLAMP, 1 - KL_CLAMP)
        ce = -(Y * np.log(p) + (1 - Y) * np.log(1 - p))
        return float(np.sum(ce) / n), ""
    _, fit, diag = model.loo_fit()
    tr = float(np.sum(diag))
    if tr + 2 >= n:
        return math.inf, f"tr(H)+2={tr + 2:.3f} >= N={n}"
    sigma2 = float(np.mean((model.s - fit) ** 2))
    if sigma2 <= 0:
        return -math.inf, ""
    return math.log(sigma2) + (1 + tr / n) / (1 - (tr + 2) / n), ""


def select_bandwidth(x, s, scheme: str = "generalized-nn", h0_grid: Sequence = (1.0,),
                     k_grid: Sequence[int] = (1,), criterion: str = "aicc", levels=None,
                     weights=None, rel_tol: float = 1e-12) -> SelectionResult:
    """Pick (h0, k) minimizing a leave-one-out criterion.

    ``mse``: LOO squared error.  ``kl``: LOO cross-entropy of indicator
    targets 1{s <= level} over several levels.  ``aicc``: corrected
    criterion using the smoother trace (own point included).  Ties go to
    the smallest (h0, k).
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    if s.size < 10:
        raise ValueError("bandwidth selection needs at least 10 rows")
    ks = sorted({int(k) for k in k_grid}) if scheme != "fixed" else [1]
    cands = sorted((float(h), k) for h in h0_grid for k in ks)
    if not cands:
        raise ValueError("empty bandwidth search space")
    if criterion == "kl" and levels is None:
        levels = cdf_levels(s)
    best = None
    table = []
    reasons = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for h0, k in cands:
            if scheme != "fixed" and k >= s.size:
                reasons.append(f"k={k} >= N")
                continue
            m = KernelModel(x, s, BandwidthSpec(scheme, h0, k), weights)
            val, why = _criterion_value(m, criterion, levels)
            table.append({"h0": h0, "k": k, "score": val})
            if not math.isfinite(val) and val > 0:
                reasons.append(f"h0={h0}, k={k}: {why}")
                continue
            if best is None or val < best[0] - rel_tol * max(1.0, abs(best[0])):
                best = (val, h0, k)
    if best is None:
        raise ValueError("all bandwidth candidates rejected: " + "; ".join(reasons))
    return SelectionResult(BandwidthSpec(scheme, best[1], best[2]), criterion, best[0], table)
