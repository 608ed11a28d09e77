"""Fair districting plans by a Swendsen-Wang style Markov chain.

Each step switches off within-district edges independently, takes the
connected components of what is left, picks ``R`` mutually non-adjacent
components on district boundaries and moves each to a neighbouring
district.  The Metropolis-Hastings ratio corrects for the proposal so the
chain targets the uniform distribution over valid plans.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .graph import Plan, PrecinctGraph, is_valid, population_bounds

# Pr(R = 0) = 0.2, the remaining mass geometric with ratio 1/2 over R = 1, 2, 3
DEFAULT_R_PROBS = (0.2, 0.8 * 4 / 7, 0.8 * 2 / 7, 0.8 * 1 / 7)


@dataclass
class ChainParams:
    delta: float = 0.25
    edge_disable_prob: float = 0.95
    r_probs: tuple = DEFAULT_R_PROBS
    burn_in: int = 2000
    thinning: int = 100
    anneal_start: float = 1.0  # temperature at the start of burn-in; 1 disables annealing

    def __post_init__(self):
        p = np.asarray(self.r_probs, dtype=float)
        if p.ndim != 1 or p.size < 1 or np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
            raise ValueError("r_probs must be a probability vector over R = 0, 1, ...")
        if p[0] <= 0:
            raise ValueError("Pr(R = 0) must be positive")
        if not 0.0 <= self.edge_disable_prob <= 1.0:
            raise ValueError("edge_disable_prob must lie in [0, 1]")
        if self.anneal_start < 1.0:
            raise ValueError("anneal_start must be >= 1")


@dataclass
class StepInfo:
    r: int = 0
    proposed: bool = False
    accepted: bool = False
    ratio: float = 1.0


def _boundary(edges, comp, assign) -> dict:
    """Boundary component -> sorted list of other districts it touches."""
    adj: dict = {}
    for a, b in edges:
        da, db = assign[a], assign[b]
        if da != db:
            adj.setdefault(comp[a], set()).add(db)
            adj.setdefault(comp[b], set()).add(da)
    return {k: sorted(v) for k, v in adj.items()}


def _contiguous(adjacency, nodes) -> bool:
    nodes = list(nodes)
    if not nodes:
        return False
    allowed = set(nodes)
    start = nodes[0]
    seen = {start}
    todo = deque([start])
    while todo:
        u = todo.popleft()
        for w in adjacency[u]:
            if w in allowed and w not in seen:
                seen.add(w)
                todo.append(w)
    return len(seen) == len(allowed)


def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


class FairChain:
    def __init__(self, g: PrecinctGraph, c: int, params: ChainParams):
        self.g = g
        self.c = c
        self.params = params
        self.edges = [tuple(e) for e in g.edges]
        self.pop = [int(x) for x in g.population]
        self.lo, self.hi = population_bounds(g, c, params.delta)
        self.r_cum = np.cumsum(np.asarray(params.r_probs, dtype=float)).tolist()

    def _valid_after(self, new, touched) -> bool:
        pops = [0] * self.c
        for v, d in enumerate(new):
            pops[d] += self.pop[v]
        if any(p < self.lo - 1e-9 or p > self.hi + 1e-9 for p in pops):
            return False
        for d in touched:
            if not _contiguous(self.g.adjacency, [v for v, x in enumerate(new) if x == d]):
                return False
        return True

    def step(self, assign: list, rng: np.random.Generator, temperature: float = 1.0):
        """One transition on a list assignment; returns (assignment, StepInfo)."""
        p_off = self.params.edge_disable_prob
        n = self.g.n
        u_edges = rng.random(len(self.edges)).tolist()
        u_r = rng.random()
        r = next((i for i, q in enumerate(self.r_cum) if u_r < q), len(self.r_cum) - 1)
        info = StepInfo(r=r)
        if r == 0:
            return assign, info
        parent = list(range(n))
        within = 0
        for (a, b), u in zip(self.edges, u_edges):
            if assign[a] == assign[b]:
                within += 1
                if u >= p_off:
                    ra, rb = _find(parent, a), _find(parent, b)
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
        comp = [_find(parent, v) for v in range(n)]
        fwd = _boundary(self.edges, comp, assign)
        pool = sorted(fwd)
        if r > len(pool):
            return assign, info
        chosen = []
        for _ in range(r):
            chosen.append(pool.pop(int(rng.random() * len(pool))))
        chosen.sort()
        targets = [fwd[k][int(rng.random() * len(fwd[k]))] for k in chosen]
        u_accept = rng.random()
        cs = set(chosen)
        # selected components must not touch one another
        for a, b in self.edges:
            if comp[a] != comp[b] and comp[a] in cs and comp[b] in cs:
                return assign, info
        move = dict(zip(chosen, targets))
        new = list(assign)
        touched = set(targets)
        for v in range(n):
            d = move.get(comp[v])
            if d is not None:
                touched.add(assign[v])
                new[v] = d
        info.proposed = True
        if not self._valid_after(new, touched):
            return assign, info
        bwd = _boundary(self.edges, comp, new)
        within_new = sum(1 for a, b in self.edges if new[a] == new[b])
        dk = within_new - within
        ratio = p_off ** dk if p_off > 0 else float(dk == 0)
        ratio *= math.comb(len(fwd), r) / math.comb(len(bwd), r)
        for k in chosen:
            ratio *= len(fwd[k]) / len(bwd[k])
        info.ratio = ratio
        acc = min(1.0, ratio ** (1.0 / temperature)) if ratio > 0 else 0.0
        if u_accept < acc:
            info.accepted = True
            return new, info
        return assign, info


def initial_plan(g: PrecinctGraph, c: int, delta: float, rng: np.random.Generator,
                 attempts: int = 500, repair_iters: int = 2000) -> Plan:
    """Seeded region growing followed by a population repair pass."""
    if c < 1 or c > g.n:
        raise ValueError(f"cannot split {g.n} precincts into {c} districts")
    lo, hi = population_bounds(g, c, delta)
    for _ in range(attempts):
        assign = -np.ones(g.n, dtype=np.int64)
        seeds = rng.choice(g.n, c, replace=False)
        assign[seeds] = np.arange(c)
        pops = g.population[seeds].astype(float)
        left = g.n - c
        while left:
            order = np.argsort(pops, kind="stable")
            grown = False
            for d in order:
                frontier = sorted({w for v in np.flatnonzero(assign == d) for w in g.adjacency[v] if assign[w] < 0})
                if frontier:
                    w = frontier[int(rng.integers(len(frontier)))]
                    assign[w] = d
                    pops[d] += g.population[w]
                    left -= 1
                    grown = True
                    break
            if not grown:
                break
        if left:
            continue
        assign = _repair(g, assign, c, lo, hi, repair_iters)
        plan = Plan.of(assign, c)
        if is_valid(g, plan, delta):
            return plan
    raise RuntimeError(f"no valid initial plan found in {attempts} attempts")


def _excess(pops, lo, hi) -> float:
    return float(np.sum(np.maximum(pops - hi, 0) + np.maximum(lo - pops, 0)))


def _repair(g, assign, c, lo, hi, iters):
    """Greedy boundary moves that shrink total population excess."""
    assign = assign.copy()
    pops = np.bincount(assign, weights=g.population, minlength=c)
    for _ in range(iters):
        cur = _excess(pops, lo, hi)
        if cur == 0:
            break
        best = None
        for v in range(g.n):
            src = assign[v]
            for dst in sorted({assign[w] for w in g.adjacency[v]} - {src}):
                p2 = pops.copy()
                p2[src] -= g.population[v]
                p2[dst] += g.population[v]
                gain = cur - _excess(p2, lo, hi)
                if gain > 0 and (best is None or gain > best[0]):
                    rest = np.flatnonzero(assign == src)
                    rest = rest[rest != v]
                    if _contiguous(g.adjacency, rest):
                        best = (gain, v, dst)
        if best is None:
            break
        _, v, dst = best
        pops[assign[v]] -= g.population[v]
        pops[dst] += g.population[v]
        assign[v] = dst
    return assign


def run_chain(g: PrecinctGraph, c: int, params: ChainParams, rng: np.random.Generator,
              steps: int, start: Plan, temperatures=None):
    """Yield (assignment, StepInfo) for ``steps`` transitions from ``start``."""
    chain = FairChain(g, c, params)
    assign = list(start.assignment)
    for t in range(steps):
        temp = 1.0 if temperatures is None else temperatures(t)
        assign, info = chain.step(assign, rng, temp)
        yield assign, info


@dataclass
class PlanBatch:
    plans: list
    labels: list
    meta: dict = field(default_factory=dict)
    seats: list = field(default_factory=list)


def sample_fair_plans(g: PrecinctGraph, count: int, c: int, params: ChainParams | None = None,
                      seed: int = 0, start: Plan | None = None) -> PlanBatch:
    """``count`` plans taken every ``thinning`` steps after an annealed burn-in."""
    params = params or ChainParams()
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xFA1,)))
    if start is None:
        start = initial_plan(g, c, params.delta, rng)
    plans = []
    accepted = proposed = 0
    burn = params.burn_in
    t0 = params.anneal_start

    def temps(t):
        if t < burn:
            return t0 ** (1.0 - t / burn)
        return 1.0

    record = {burn + i * params.thinning for i in range(count)}
    total = burn + max(count - 1, 0) * params.thinning if count else 0
    if 0 in record:
        plans.append(start)
    for t, (assign, info) in enumerate(run_chain(g, c, params, rng, total, start, temps), start=1):
        accepted += info.accepted
        proposed += info.proposed
        if t in record:
            plans.append(Plan.of(assign, c))
    for p in plans:
        if not is_valid(g, p, params.delta):
            raise AssertionError("sampler produced an invalid plan")
    meta = {"seed": int(seed), "burn_in": burn, "thinning": params.thinning,
            "edge_disable_prob": params.edge_disable_prob, "r_probs": list(params.r_probs),
            "anneal_start": t0, "delta": params.delta, "steps": total,
            "acceptance_rate": accepted / max(proposed, 1)}
    return PlanBatch(plans, ["fair"] * len(plans), meta)
