"""Seat-maximizing ("unfair") districting plans.

Exact mode enumerates every connected, population-feasible node subset and
solves the set-partition problem by depth-first branch and bound.  Larger
graphs are coarsened first, solved exactly, expanded, then improved by
local search.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .graph import Plan, PrecinctGraph, component_of, is_valid, population_bounds

ENUM_CAP = 10 ** 6
SAFE = 0.02
CONCEDE = 0.08
MODES = ("exact-enumeration", "coarsen+exact", "local-search")


class EnumerationCapExceeded(RuntimeError):
    pass


class InfeasibleError(RuntimeError):
    pass


@dataclass
class Objective:
    """Districts won by ``party`` with lead >= ``margin`` of the district vote."""
    party: int
    margin: float = 0.0

    def district_won(self, votes: np.ndarray) -> bool:
        x = votes[self.party]
        others = np.delete(votes, self.party)
        best_other = others.max() if others.size else 0
        total = votes.sum()
        if x <= best_other:
            return False
        return (x - best_other) >= self.margin * total

    def district_slack(self, votes: np.ndarray) -> float:
        x = votes[self.party]
        others = np.delete(votes, self.party)
        best_other = others.max() if others.size else 0
        total = max(votes.sum(), 1)
        return (x - best_other) / total - self.margin

    def soft(self, votes: np.ndarray) -> float:
        # credit progress towards a win; safe seats gain nothing from padding and
        # conceded districts cost nothing however heavily they are packed
        return min(max(self.district_slack(votes), -CONCEDE), SAFE)

    def value(self, g: PrecinctGraph, plan: Plan) -> tuple[int, float]:
        """(seats, soft score) compared lexicographically."""
        dv = np.zeros((plan.c, len(g.parties)), dtype=np.int64)
        np.add.at(dv, np.asarray(plan.assignment), g.votes)
        seats = sum(self.district_won(row) for row in dv)
        return int(seats), float(sum(self.soft(row) for row in dv))


def enumerate_districts(g: PrecinctGraph, lo: float, hi: float, cap: int = ENUM_CAP) -> list[int]:
    """Bitmasks of all connected node subsets with population in [lo, hi].

    Each connected subset is generated once, rooted at its smallest node;
    branches whose population already exceeds ``hi`` are cut.
    """
    pop = [int(x) for x in g.population]
    adj = g.adjacency
    out = []
    visited = 0

    def extend(sub_mask, sub_pop, ext, nbhd_mask, root):
        nonlocal visited
        visited += 1
        if visited > cap:
            raise EnumerationCapExceeded(
                f"more than {cap} connected subsets; coarsen the graph or use local search")
        if sub_pop >= lo - 1e-9:
            out.append(sub_mask)
        ext = list(ext)
        while ext:
            w = ext.pop()
            p2 = sub_pop + pop[w]
            if p2 > hi + 1e-9:
                continue
            new_ext = list(ext)
            new_nbhd = nbhd_mask
            for u in adj[w]:
                bit = 1 << u
                if u > root and not (nbhd_mask & bit) and not (sub_mask & bit):
                    new_ext.append(u)
                new_nbhd |= bit
            extend(sub_mask | (1 << w), p2, new_ext, new_nbhd | (1 << w), root)

    for v in range(g.n):
        if pop[v] > hi + 1e-9:
            continue
        nb = 1 << v
        ext = []
        for u in adj[v]:
            nb |= 1 << u
            if u > v:
                ext.append(u)
        extend(1 << v, pop[v], ext, nb, v)
    return sorted(out)


def _mask_nodes(mask: int) -> list[int]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


@dataclass
class ExactResult:
    plan: Plan
    seats: int
    candidates: int
    nodes_explored: int
    meta: dict = field(default_factory=dict)


class _NodeLimit(Exception):
    pass


def solve_exact(g: PrecinctGraph, c: int, delta: float, objective: Objective,
                cap: int = ENUM_CAP, node_limit: int | None = None) -> ExactResult:
    """Maximum-seat partition into ``c`` feasible districts.

    Depth-first search always covers the smallest uncovered node; candidate
    districts are tried winners first, then by ascending bitmask.  The first
    optimum found in this order is returned, so results are deterministic.
    With ``node_limit`` the search stops early and returns the incumbent
    with ``meta["proved_optimal"] = False``.
    """
    lo, hi = population_bounds(g, c, delta)
    cands = enumerate_districts(g, lo, hi, cap)
    pop = [int(x) for x in g.population]
    won = {}
    by_low: dict[int, list[int]] = {}
    for m in cands:
        nodes = _mask_nodes(m)
        won[m] = objective.district_won(g.votes[nodes].sum(axis=0))
        by_low.setdefault(nodes[0], []).append(m)
    for v in by_low:
        by_low[v].sort(key=lambda m: (not won[m], m))
    full = (1 << g.n) - 1
    total_pop = sum(pop)
    adj = g.adjacency
    best = {"seats": -1, "choice": None}
    explored = 0

    def remainder_ok(covered: int, k_rem: int) -> bool:
        # every uncovered component must hold a whole number of feasible districts
        left = [v for v in range(g.n) if not (covered >> v) & 1]
        allowed = set(left)
        seen = set()
        parts = 0
        for v in left:
            if v in seen:
                continue
            comp = component_of(adj, v, allowed)
            seen |= comp
            p = sum(pop[u] for u in comp)
            kmin = int(np.ceil(p / hi - 1e-9))
            kmax = int(np.floor(p / lo + 1e-9)) if lo > 0 else len(comp)
            kmax = min(kmax, len(comp))
            if kmin > kmax:
                return False
            parts += kmin
        return parts <= k_rem

    def dfs(covered, k_rem, rem_pop, seats, chosen):
        nonlocal explored
        explored += 1
        if node_limit is not None and explored > node_limit:
            raise _NodeLimit
        if covered == full:
            if k_rem == 0 and seats > best["seats"]:
                best["seats"] = seats
                best["choice"] = list(chosen)
            return
        if k_rem == 0:
            return
        if seats + k_rem <= best["seats"]:
            return
        if rem_pop < k_rem * lo - 1e-9 or rem_pop > k_rem * hi + 1e-9:
            return
        if not remainder_ok(covered, k_rem):
            return
        low = (~covered & full & -(~covered & full)).bit_length() - 1
        for m in by_low.get(low, ()):
            if m & covered:
                continue
            w = int(won[m])
            if seats + w + (k_rem - 1) <= best["seats"]:
                continue
            chosen.append(m)
            dfs(covered | m, k_rem - 1, rem_pop - sum(pop[u] for u in _mask_nodes(m)), seats + w, chosen)
            chosen.pop()
            if best["seats"] == seats + k_rem:
                return

    proved = True
    try:
        dfs(0, c, total_pop, 0, [])
    except _NodeLimit:
        proved = False
    if best["choice"] is None:
        if not proved:
            raise InfeasibleError(f"node limit {node_limit} reached before any partition was found")
        raise InfeasibleError(f"no partition into {c} feasible districts")
    assign = [0] * g.n
    for d, m in enumerate(sorted(best["choice"])):
        for v in _mask_nodes(m):
            assign[v] = d
    return ExactResult(Plan.of(assign, c), best["seats"], len(cands), explored,
                       {"proved_optimal": proved})


# -- coarsening ---------------------------------------------------------------

@dataclass
class Coarsening:
    graph: PrecinctGraph
    groups: list  # coarse node -> list of original nodes

    def expand(self, plan: Plan) -> Plan:
        n = sum(len(x) for x in self.groups)
        assign = [0] * n
        for cnode, d in enumerate(plan.assignment):
            for v in self.groups[cnode]:
                assign[v] = d
        return Plan.of(assign, plan.c)


def _share(votes: np.ndarray) -> np.ndarray:
    return votes / max(votes.sum(), 1)


def coarsen_graph(g: PrecinctGraph, target: int, c: int, cap_factor: float = 1.25,
                  small_quantile: float = 0.10) -> Coarsening:
    """Merge precincts until at most ``target`` remain.

    Order: leaves, then nodes below the ``small_quantile`` population
    quantile, then the most similar adjacent pair by vote-share distance.
    A merge is allowed while the merged population stays within
    ``cap_factor`` times the mean coarse-node population (total/target);
    if no pair satisfies the cap, the lightest admissible merge is taken.
    """
    if target < c:
        raise ValueError(f"target {target} below the district count {c}")
    groups = [[v] for v in range(g.n)]
    pop = [int(x) for x in g.population]
    votes = [g.votes[v].copy() for v in range(g.n)]
    adj = [set(a) for a in g.adjacency]
    alive = set(range(g.n))
    cap = cap_factor * g.total_population / target
    small = float(np.quantile(g.population, small_quantile))

    def merge(a, b):
        # keep the smaller id as the surviving node
        a, b = min(a, b), max(a, b)
        groups[a].extend(groups[b])
        pop[a] += pop[b]
        votes[a] = votes[a] + votes[b]
        for w in adj[b]:
            if w != a:
                adj[w].discard(b)
                adj[w].add(a)
                adj[a].add(w)
        adj[a].discard(b)
        adj[b] = set()
        alive.discard(b)

    def dist(a, b):
        return float(np.abs(_share(votes[a]) - _share(votes[b])).sum())

    def best_partner(v, capped=True):
        opts = [(dist(v, w), pop[w], w) for w in sorted(adj[v]) if not capped or pop[v] + pop[w] <= cap]
        return min(opts)[2] if opts else None

    while len(alive) > target:
        done = False
        for v in sorted(alive):
            if len(adj[v]) == 1:
                w = next(iter(adj[v]))
                if pop[v] + pop[w] <= cap:
                    merge(v, w)
                    done = True
                    break
        if done:
            continue
        for v in sorted(alive, key=lambda x: (pop[x], x)):
            if pop[v] < small:
                w = best_partner(v)
                if w is not None:
                    merge(v, w)
                    done = True
                    break
            else:
                break
        if done:
            continue
        pairs = [(dist(a, b), pop[a] + pop[b], a, b) for a in sorted(alive) for b in sorted(adj[a])
                 if a < b and pop[a] + pop[b] <= cap]
        if not pairs:
            pairs = [(pop[a] + pop[b], dist(a, b), a, b) for a in sorted(alive) for b in sorted(adj[a]) if a < b]
        _, _, a, b = min(pairs)
        merge(a, b)
    order = sorted(alive)
    index = {v: i for i, v in enumerate(order)}
    edges = sorted({(min(index[a], index[b]), max(index[a], index[b])) for a in order for b in adj[a]})
    cg = PrecinctGraph([f"m{i}" for i in range(len(order))], [pop[v] for v in order],
                       np.array([votes[v] for v in order]), list(g.parties), edges)
    return Coarsening(cg, [sorted(groups[v]) for v in order])


# -- local search -------------------------------------------------------------

def local_search_improve(g: PrecinctGraph, plan: Plan, objective: Objective, delta: float,
                         rng: np.random.Generator, max_iters: int = 2000,
                         swaps: bool = True) -> tuple[Plan, list]:
    """First-improvement hill climbing over boundary flips and pairwise swaps.

    Returns the final plan and the objective trace (non-decreasing).
    """
    if not is_valid(g, plan, delta):
        raise ValueError("local search needs a valid starting plan")
    lo, hi = population_bounds(g, plan.c, delta)
    assign = list(plan.assignment)
    pop = [int(x) for x in g.population]
    dpop = [0] * plan.c
    dv = np.zeros((plan.c, len(g.parties)), dtype=np.int64)
    for v, d in enumerate(assign):
        dpop[d] += pop[v]
        dv[d] += g.votes[v]

    def score(dv_):
        seats = sum(objective.district_won(r) for r in dv_)
        return (int(seats), float(sum(objective.soft(r) for r in dv_)))

    def members(d):
        return [v for v, x in enumerate(assign) if x == d]

    def connected_without(d, drop, add=()):
        nodes = set(members(d)) - set(drop) | set(add)
        if not nodes:
            return False
        return len(component_of(g.adjacency, next(iter(nodes)), nodes)) == len(nodes)

    current = score(dv)
    trace = [current]
    for _ in range(max_iters):
        improved = False
        nodes = rng.permutation(g.n).tolist()
        for v in nodes:
            src = assign[v]
            for dst in sorted({assign[w] for w in g.adjacency[v]} - {src}):
                if not (lo - 1e-9 <= dpop[src] - pop[v] and dpop[dst] + pop[v] <= hi + 1e-9):
                    continue
                trial = dv.copy()
                trial[src] -= g.votes[v]
                trial[dst] += g.votes[v]
                sc = score(trial)
                if sc > current and connected_without(src, [v]):
                    assign[v] = dst
                    dpop[src] -= pop[v]
                    dpop[dst] += pop[v]
                    dv, current = trial, sc
                    improved = True
                    break
            if improved:
                break
        if not improved and swaps:
            for v in nodes:
                a = assign[v]
                for w in g.adjacency[v]:
                    b = assign[w]
                    if b == a:
                        continue
                    # v goes to b; some boundary node u of b goes to a
                    for u in sorted(members(b)):
                        if u == w and len(members(b)) == 1:
                            continue
                        if a not in {assign[x] for x in g.adjacency[u]} and u != w:
                            continue
                        na = dpop[a] - pop[v] + pop[u]
                        nb = dpop[b] + pop[v] - pop[u]
                        if not (lo - 1e-9 <= na <= hi + 1e-9 and lo - 1e-9 <= nb <= hi + 1e-9):
                            continue
                        trial = dv.copy()
                        trial[a] += g.votes[u] - g.votes[v]
                        trial[b] += g.votes[v] - g.votes[u]
                        sc = score(trial)
                        if sc <= current:
                            continue
                        if connected_without(a, [v], [u]) and connected_without(b, [u], [v]):
                            assign[v], assign[u] = b, a
                            dpop[a], dpop[b] = na, nb
                            dv, current = trial, sc
                            improved = True
                            break
                    if improved:
                        break
                if improved:
                    break
        if not improved:
            break
        trace.append(current)
    out = Plan.of(assign, plan.c)
    if not is_valid(g, out, delta):
        raise AssertionError("local search produced an invalid plan")
    return out, trace


def _kick(g: PrecinctGraph, plan: Plan, delta: float, rng: np.random.Generator, moves: int) -> Plan:
    """Apply up to ``moves`` random valid boundary flips."""
    lo, hi = population_bounds(g, plan.c, delta)
    assign = list(plan.assignment)
    dpop = [0] * plan.c
    for v, d in enumerate(assign):
        dpop[d] += int(g.population[v])
    done = 0
    for _ in range(moves * 20):
        if done >= moves:
            break
        v = int(rng.integers(g.n))
        src = assign[v]
        opts = sorted({assign[w] for w in g.adjacency[v]} - {src})
        if not opts:
            continue
        dst = opts[int(rng.integers(len(opts)))]
        pv = int(g.population[v])
        if dpop[src] - pv < lo - 1e-9 or dpop[dst] + pv > hi + 1e-9:
            continue
        rest = {u for u, d in enumerate(assign) if d == src and u != v}
        if not rest or len(component_of(g.adjacency, next(iter(rest)), rest)) != len(rest):
            continue
        assign[v] = dst
        dpop[src] -= pv
        dpop[dst] += pv
        done += 1
    return Plan.of(assign, plan.c)


# -- driver -------------------------------------------------------------------

@dataclass
class UnfairResult:
    plan: Plan
    seats: int
    mode: str
    meta: dict = field(default_factory=dict)


def optimize_unfair_plan(g: PrecinctGraph, party: str, c: int, delta: float, margin: float = 0.0,
                         mode: str = "coarsen+exact", seed: int = 0, coarse_target: int = 32,
                         cap: int = ENUM_CAP, starts=(), restarts: int = 4,
                         max_iters: int = 2000, node_limit: int | None = 200_000,
                         kicks: int = 24, kick_moves: int = 6) -> UnfairResult:
    """Plan maximizing the number of districts ``party`` wins by ``margin``.

    ``starts`` are extra valid plans (e.g. fair samples) to local-search from;
    the best result over all routes is returned.  ``node_limit`` bounds the
    coarse branch-and-bound only; exact-enumeration mode always runs to proof.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if margin < 0:
        raise ValueError("margin must be non-negative")
    obj = Objective(g.parties.index(party), margin)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0x0F7,)))
    meta = {"party": party, "margin": margin, "mode": mode, "seed": int(seed), "delta": delta}
    if mode == "exact-enumeration":
        res = solve_exact(g, c, delta, obj, cap)
        meta.update(candidates=res.candidates, nodes_explored=res.nodes_explored)
        return UnfairResult(res.plan, res.seats, mode, meta)
    pool = [p for p in starts if is_valid(g, p, delta)]
    if mode == "coarsen+exact":
        target = coarse_target
        while True:
            co = coarsen_graph(g, min(target, g.n), c)
            try:
                res = solve_exact(co.graph, c, delta, obj, cap, node_limit)
                break
            except InfeasibleError:
                if target >= g.n:
                    raise
                target = int(target * 1.25) + 1
        pool.insert(0, co.expand(res.plan))
        meta.update(coarse_nodes=co.graph.n, coarse_seats=res.seats, candidates=res.candidates,
                    coarse_proved_optimal=res.meta["proved_optimal"])
    if not pool:
        from .mcmc import initial_plan
        for _ in range(restarts):
            pool.append(initial_plan(g, c, delta, rng))
    best = None
    for p in pool:
        out, _ = local_search_improve(g, p, obj, delta, rng, max_iters=max_iters)
        val = obj.value(g, out)
        # iterated local search: perturb, re-climb, keep if not worse
        for _ in range(kicks):
            trial, _ = local_search_improve(g, _kick(g, out, delta, rng, kick_moves), obj, delta, rng,
                                            max_iters=max_iters)
            tv = obj.value(g, trial)
            if tv >= val:
                out, val = trial, tv
        if best is None or val > best[0]:
            best = (val, out)
    meta["soft_score"] = best[0][1]
    return UnfairResult(best[1], best[0][0], mode, meta)
