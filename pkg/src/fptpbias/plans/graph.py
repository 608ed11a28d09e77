"""Precinct graphs, districting plans and their evaluation as elections."""
from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.ndimage import gaussian_filter

from ..election import CandidateResult, Election, ParseError, ValidationError, atomic_write, build_election


@dataclass
class PrecinctGraph:
    ids: list
    population: np.ndarray
    votes: np.ndarray  # (nodes, parties) integer counts
    parties: list
    edges: list
    adjacency: list = field(init=False, repr=False)

    def __post_init__(self):
        self.population = np.asarray(self.population, dtype=np.int64)
        self.votes = np.asarray(self.votes, dtype=np.int64).reshape(len(self.ids), -1)
        if np.any(self.population <= 0):
            raise ValidationError("precinct populations must be positive")
        if np.any(self.votes < 0):
            raise ValidationError("negative precinct vote count")
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError("duplicate precinct id")
        adj = [set() for _ in self.ids]
        clean = set()
        for a, b in self.edges:
            if a == b:
                raise ValidationError(f"self-loop at precinct {self.ids[a]}")
            adj[a].add(b)
            adj[b].add(a)
            clean.add((min(a, b), max(a, b)))
        self.edges = sorted(clean)
        self.adjacency = [sorted(x) for x in adj]

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def total_population(self) -> int:
        return int(self.population.sum())

    def is_connected(self) -> bool:
        return self.n > 0 and len(component_of(self.adjacency, 0, set(range(self.n)))) == self.n

    def subgraph_connected(self, nodes) -> bool:
        nodes = set(nodes)
        if not nodes:
            return False
        return len(component_of(self.adjacency, next(iter(nodes)), nodes)) == len(nodes)


def component_of(adjacency, start, allowed: set) -> set:
    seen = {start}
    todo = deque([start])
    while todo:
        u = todo.popleft()
        for w in adjacency[u]:
            if w in allowed and w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


@dataclass(frozen=True)
class Plan:
    """Node -> district index in 0..c-1 (written 1-based in files)."""
    assignment: tuple
    c: int

    @classmethod
    def of(cls, assignment, c: int | None = None) -> "Plan":
        a = tuple(int(x) for x in assignment)
        return cls(a, (max(a) + 1) if c is None else c)

    def districts(self) -> list[list[int]]:
        out = [[] for _ in range(self.c)]
        for node, d in enumerate(self.assignment):
            out[d].append(node)
        return out

    def canonical(self) -> tuple:
        """Label-free form: districts renumbered by first appearance."""
        relabel = {}
        return tuple(relabel.setdefault(d, len(relabel)) for d in self.assignment)


def population_bounds(g: PrecinctGraph, c: int, delta: float) -> tuple[float, float]:
    mean = g.total_population / c
    return (1 - delta) * mean, (1 + delta) * mean


def validate_plan(g: PrecinctGraph, plan: Plan, delta: float) -> list[str]:
    """Contiguity and population violations, one message per problem."""
    problems = []
    if len(plan.assignment) != g.n:
        return [f"plan covers {len(plan.assignment)} nodes, graph has {g.n}"]
    lo, hi = population_bounds(g, plan.c, delta)
    for d, nodes in enumerate(plan.districts()):
        if not nodes:
            problems.append(f"district {d + 1} is empty")
            continue
        if not g.subgraph_connected(nodes):
            problems.append(f"district {d + 1} is not contiguous")
        pop = int(g.population[nodes].sum())
        if pop < lo - 1e-9 or pop > hi + 1e-9:
            problems.append(f"district {d + 1} population {pop} outside [{lo:.1f}, {hi:.1f}]")
    return problems


def is_valid(g: PrecinctGraph, plan: Plan, delta: float) -> bool:
    return not validate_plan(g, plan, delta)


@dataclass
class PlanOutcome:
    district_votes: np.ndarray  # (c, parties)
    winners: list  # party index or None for a tie
    seats: dict


def evaluate_plan(g: PrecinctGraph, plan: Plan) -> PlanOutcome:
    """Strict-plurality winner of each district from summed precinct votes."""
    dv = np.zeros((plan.c, len(g.parties)), dtype=np.int64)
    np.add.at(dv, np.asarray(plan.assignment), g.votes)
    winners = []
    for row in dv:
        top = row.max()
        lead = np.flatnonzero(row == top)
        winners.append(int(lead[0]) if lead.size == 1 else None)
    seats = {p: sum(1 for w in winners if w == i) for i, p in enumerate(g.parties)}
    return PlanOutcome(dv, winners, seats)


def plan_to_election(g: PrecinctGraph, plan: Plan, election_id: str) -> Election:
    out = evaluate_plan(g, plan)
    rows = []
    for d, row in enumerate(out.district_votes):
        for p, x in zip(g.parties, row):
            if x > 0:
                rows.append(CandidateResult(election_id, f"d{d + 1:03d}", p, int(x)))
    return build_election(election_id, rows, tie_policy="flag", drop_unopposed=True)


def grid_graph(rows: int, cols: int, population, votes, parties) -> PrecinctGraph:
    ids = [f"r{r}c{c}" for r in range(rows) for c in range(cols)]
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                edges.append((i, i + 1))
            if r + 1 < rows:
                edges.append((i, i + cols))
    return PrecinctGraph(ids, population, votes, list(parties), edges)


def synthetic_grid(rows: int = 8, cols: int = 8, seed: int = 0, pop_range=(800, 2400),
                   spread: float = 0.15, blur: float = 1.0, lead: float = 0.004,
                   parties=("p", "q"), symmetric: bool = True) -> PrecinctGraph:
    """Two-party grid with spatially autocorrelated vote shares.

    Populations are uniform on ``pop_range``; party shares are a Gaussian
    blur of i.i.d. noise rescaled to standard deviation ``spread`` and
    shifted so the first party leads the aggregate by about ``lead``.

    With ``symmetric`` the share deviation field is made antisymmetric under
    a half-turn of the grid and populations are mirrored, so the geography
    itself favours neither party.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rows, cols)))
    pop = rng.integers(pop_range[0], pop_range[1] + 1, size=(rows, cols))
    field_ = gaussian_filter(rng.standard_normal((rows, cols)), blur, mode="reflect")
    if symmetric:
        first_half = np.arange(rows * cols).reshape(rows, cols) < (rows * cols) // 2
        pop = np.where(first_half, pop, pop[::-1, ::-1])
        field_ = field_ - field_[::-1, ::-1]
    pop = pop.ravel()
    field_ = field_.ravel()
    field_ = (field_ - field_.mean()) / max(field_.std(), 1e-12) * spread
    # shift so the population-weighted share is 1/2 + lead/2
    share = field_ + 0.5 + lead / 2 - np.sum(field_ * pop) / pop.sum()
    share = np.clip(share, 0.05, 0.95)
    vp = np.rint(share * pop).astype(np.int64)
    votes = np.column_stack([vp, pop - vp])
    return grid_graph(rows, cols, pop, votes, parties)


def read_graph(nodes_path, edges_path) -> PrecinctGraph:
    with open(nodes_path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if len(header) < 3 or header[:2] != ["precinct_id", "population"] or \
                not all(h.startswith("votes_") for h in header[2:]):
            raise ParseError("nodes header must be precinct_id,population,votes_<party>...", 1)
        parties = [h[len("votes_"):] for h in header[2:]]
        ids, pop, votes = [], [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(f"expected {len(header)} fields", lineno)
            try:
                ids.append(rec[0].strip())
                pop.append(int(rec[1]))
                votes.append([int(x) for x in rec[2:]])
            except ValueError:
                raise ParseError("non-integer count", lineno) from None
    index = {k: i for i, k in enumerate(ids)}
    edges = []
    with open(edges_path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["precinct_a", "precinct_b"]:
            raise ParseError("edges header must be precinct_a,precinct_b", 1)
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                edges.append((index[rec[0].strip()], index[rec[1].strip()]))
            except (KeyError, IndexError):
                raise ParseError("unknown precinct in edge", lineno) from None
    g = PrecinctGraph(ids, pop, votes, parties, edges)
    if not g.is_connected():
        raise ValidationError("precinct graph is not connected")
    return g


def graph_csvs(g: PrecinctGraph) -> tuple[str, str]:
    nb = io.StringIO()
    w = csv.writer(nb, lineterminator="\n")
    w.writerow(["precinct_id", "population"] + [f"votes_{p}" for p in g.parties])
    for i, pid in enumerate(g.ids):
        w.writerow([pid, int(g.population[i])] + [int(x) for x in g.votes[i]])
    eb = io.StringIO()
    w = csv.writer(eb, lineterminator="\n")
    w.writerow(["precinct_a", "precinct_b"])
    for a, b in g.edges:
        w.writerow([g.ids[a], g.ids[b]])
    return nb.getvalue(), eb.getvalue()


def write_graph(g: PrecinctGraph, nodes_path, edges_path) -> None:
    n, e = graph_csvs(g)
    atomic_write(nodes_path, n)
    atomic_write(edges_path, e)


def plans_csv(g: PrecinctGraph, plans: Sequence[tuple[str, Plan]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["plan_id", "precinct_id", "district"])
    for pid, plan in plans:
        for node, d in enumerate(plan.assignment):
            w.writerow([pid, g.ids[node], d + 1])
    return buf.getvalue()
