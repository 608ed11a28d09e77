"""Independent reference computations used by the tests.

Each oracle is written from the definition, shares no code with the
package, and favours obviousness over speed.
"""
import itertools
import math

import numpy as np
from scipy import integrate


def partition_oracle(g, c, lo, hi, won):
    """Max of sum(won(mask)) over partitions into c connected districts with population in [lo, hi].

    Enumerates all 2^n node subsets, keeps the feasible ones, then
    exact-covers without any bound-based pruning.
    """
    n = g.n
    full = (1 << n) - 1
    nbr = [0] * n
    for a, b in g.edges:
        nbr[a] |= 1 << b
        nbr[b] |= 1 << a
    pops = [int(x) for x in g.population]
    feas = {}
    for m in range(1, full + 1):
        p = sum(pops[i] for i in range(n) if m >> i & 1)
        if p < lo - 1e-9 or p > hi + 1e-9:
            continue
        low = m & -m
        seen = frontier = low
        while frontier:
            nxt = 0
            for i in range(n):
                if frontier >> i & 1:
                    nxt |= nbr[i]
            nxt &= m & ~seen
            seen |= nxt
            frontier = nxt
        if seen == m:
            feas[m] = won(m)
    bylow = {}
    for m in feas:
        bylow.setdefault((m & -m).bit_length() - 1, []).append(m)
    best = -1

    def rec(cov, k, s):
        nonlocal best
        if cov == full:
            if k == 0:
                best = max(best, s)
            return
        if k == 0:
            return
        rest = ~cov & full
        low = (rest & -rest).bit_length() - 1
        for m in bylow.get(low, []):
            if m & cov == 0:
                rec(cov | m, k - 1, s + feas[m])

    rec(0, c, 0)
    return best


def _connected(nodes, edges):
    nodes = set(nodes)
    start = next(iter(nodes))
    seen, stack = {start}, [start]
    while stack:
        v = stack.pop()
        for a, b in edges:
            for x, y in ((a, b), (b, a)):
                if x == v and y in nodes and y not in seen:
                    seen.add(y)
                    stack.append(y)
    return seen == nodes


def enumerate_valid_plans(g, c, delta):
    """Every valid plan as a canonical tuple of frozensets, by scanning all labelings."""
    pop = [int(x) for x in g.population]
    mean = sum(pop) / c
    lo, hi = (1 - delta) * mean, (1 + delta) * mean
    out = set()
    for a in itertools.product(range(c), repeat=g.n):
        if a[0] != 0 or len(set(a)) != c:
            continue
        parts = [[v for v in range(g.n) if a[v] == d] for d in range(c)]
        if any(not lo - 1e-9 <= sum(pop[v] for v in p) <= hi + 1e-9 for p in parts):
            continue
        if all(_connected(p, g.edges) for p in parts):
            out.add(frozenset(frozenset(p) for p in parts))
    return out


def plan_key(assignment, c):
    return frozenset(frozenset(v for v, d in enumerate(assignment) if d == k) for k in range(c))


def recount(g, assignment, c):
    """Seats per party by summing precinct votes district by district."""
    seats = {p: 0 for p in g.parties}
    for d in range(c):
        totals = [0] * len(g.parties)
        for v, dd in enumerate(assignment):
            if dd == d:
                for i in range(len(g.parties)):
                    totals[i] += int(g.votes[v][i])
        top = max(totals)
        if totals.count(top) == 1:
            seats[g.parties[totals.index(top)]] += 1
    return seats


def kth_nn_distance(points, i, k):
    """Distance from points[i] to its k-th nearest other point (brute force)."""
    d = sorted(math.dist(points[i], points[j]) for j in range(len(points)) if j != i)
    return d[k - 1]


def nadaraya_watson(x, s, x0, h):
    """Weighted mean of s with Gaussian weights of (x_j - x0) / h_j, one row at a time.

    Weights are the kernel value only; there is no 1/prod(h_j) volume factor.
    """
    num = den = 0.0
    for xj, sj, hj in zip(x, s, h):
        u = [(a - b) / c for a, b, c in zip(xj, x0, hj)]
        w = math.exp(-0.5 * sum(t * t for t in u))
        num += w * sj
        den += w
    return num / den


def geomean_uniform_half_cdf(x):
    """P(sqrt(P1 P2) <= x) for P_i ~ U(0, 1/2) i.i.d., by numerical quadrature over P1."""
    if x <= 0:
        return 0.0
    if x >= 0.5:
        return 1.0
    # P(P2 <= x^2 / p1) = min(1, 2 x^2 / p1), integrated against the density 2 dp1
    val, _ = integrate.quad(lambda p1: 2.0 * min(1.0, 2.0 * x * x / p1), 0.0, 0.5,
                            points=[2 * x * x], limit=200)
    return val


def bayes_error_binned(v, phi, won, bins=40):
    """Plug-in Bayes error of predicting won from (v, phi) on a fine 2-D histogram."""
    v = np.asarray(v)
    phi = np.asarray(phi)
    won = np.asarray(won, dtype=bool)
    iv = np.minimum((v * bins).astype(int), bins - 1)
    lo, hi = phi.min(), phi.max()
    ip = np.minimum(((phi - lo) / (hi - lo + 1e-12) * bins).astype(int), bins - 1)
    cell = iv * bins + ip
    n = np.bincount(cell, minlength=bins * bins)
    w = np.bincount(cell, weights=won, minlength=bins * bins)
    return float(np.minimum(w, n - w).sum() / len(v))


def winners_brute_force(shares):
    """Winner index of each district row, -1 for a tie at the top."""
    out = []
    for row in shares:
        top = max(row)
        idx = [i for i, x in enumerate(row) if x == top]
        out.append(idx[0] if len(idx) == 1 else -1)
    return out
