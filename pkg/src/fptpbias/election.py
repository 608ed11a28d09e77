"""Election data model, candidate-CSV ingestion and aggregate quantities.

A dataset is a flat CSV of candidate results (``election_id, district_id,
party_id, votes``).  Parties field at most one candidate per district;
independents are expected to arrive as singleton parties.
"""
from __future__ import annotations

import csv
import io
import os
import tempfile
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

TIE = "<TIE>"
TIE_POLICIES = ("flag", "first-listed")
CSV_HEADER = ("election_id", "district_id", "party_id", "votes")


class DataError(ValueError):
    """Base class for dataset problems."""


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(DataError):
    pass


@dataclass(frozen=True)
class CandidateResult:
    election_id: str
    district_id: str
    party_id: str
    votes: int

    def __post_init__(self):
        if int(self.votes) != self.votes or self.votes < 0:
            raise ValidationError(
                f"negative or non-integer vote count {self.votes!r} for "
                f"({self.election_id}, {self.district_id}, {self.party_id})")


def district_winner(votes: Sequence[int], party_ids: Sequence[str],
                    tie_policy: str = "flag") -> str:
    """Strict plurality winner of one district.

    Under ``flag`` a tie for first place returns :data:`TIE`; under
    ``first-listed`` the earliest listed of the tied candidates wins.
    """
    if tie_policy not in TIE_POLICIES:
        raise ValueError(f"unknown tie policy {tie_policy!r}")
    if not votes:
        raise ValidationError("district without candidates")
    top = max(votes)
    leaders = [i for i, x in enumerate(votes) if x == top]
    if len(leaders) > 1 and tie_policy == "flag":
        return TIE
    return party_ids[leaders[0]]


@dataclass(frozen=True)
class District:
    district_id: str
    candidates: tuple[CandidateResult, ...]
    winner: str
    total_votes: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total_votes",
                           sum(c.votes for c in self.candidates))
        if not self.candidates:
            raise ValidationError(f"district {self.district_id} has no candidates")
        if self.total_votes <= 0:
            raise ValidationError(f"district {self.district_id} has zero votes")

    @classmethod
    def build(cls, district_id, candidates, tie_policy="flag") -> "District":
        candidates = tuple(candidates)
        seen = set()
        for c in candidates:
            if c.party_id in seen:
                raise ValidationError(
                    f"party {c.party_id} has two candidates in district {district_id}")
            seen.add(c.party_id)
        winner = district_winner([c.votes for c in candidates],
                                 [c.party_id for c in candidates], tie_policy)
        return cls(district_id, candidates, winner)

    @property
    def n_candidates(self) -> int:
        return len(self.candidates)

    @property
    def party_ids(self) -> list[str]:
        return [c.party_id for c in self.candidates]

    @property
    def is_tie(self) -> bool:
        return self.winner == TIE

    def shares(self) -> list[float]:
        w = self.total_votes
        return [c.votes / w for c in self.candidates]

    def share_of(self, party_id: str) -> float:
        for c in self.candidates:
            if c.party_id == party_id:
                return c.votes / self.total_votes
        return 0.0


@dataclass(frozen=True)
class PartyAggregate:
    party_id: str
    contested: tuple[str, ...]
    votes: int
    vote_share: float
    seat_share: float
    seat_indicators: dict
    district_vote_shares: dict
    weight: float

    @property
    def c(self) -> int:
        return len(self.contested)

    @property
    def seats(self) -> int:
        return sum(self.seat_indicators.values())


@dataclass(frozen=True)
class Election:
    election_id: str
    districts: tuple[District, ...]
    parties: tuple[PartyAggregate, ...] = ()

    def party(self, party_id: str) -> PartyAggregate:
        for p in self.parties:
            if p.party_id == party_id:
                return p
        raise KeyError(party_id)

    @property
    def total_votes(self) -> int:
        return sum(d.total_votes for d in self.districts)


def compute_aggregates(e: Election) -> Election:
    """Populate per-party aggregates.

    ``v_i`` is the vote share over contested districts weighted by district
    size, ``s_i`` the fraction of contested districts won and ``w_i`` the
    party's share of all valid votes in the election.
    """
    order: "OrderedDict[str, list[District]]" = OrderedDict()
    for d in e.districts:
        for c in d.candidates:
            order.setdefault(c.party_id, []).append(d)
    total = e.total_votes
    parties = []
    for pid, districts in order.items():
        votes = 0
        size = 0
        seats = {}
        shares = {}
        for d in districts:
            x = next(c.votes for c in d.candidates if c.party_id == pid)
            votes += x
            share = x / d.total_votes
            shares[d.district_id] = share
            size += d.total_votes
            seats[d.district_id] = int(d.winner == pid)
        parties.append(PartyAggregate(
            party_id=pid,
            contested=tuple(d.district_id for d in districts),
            votes=votes,
            # sum(v_i^k w_k) / sum(w_k) reduces to an integer ratio
            vote_share=votes / size,
            seat_share=sum(seats.values()) / len(districts),
            seat_indicators=seats,
            district_vote_shares=shares,
            weight=votes / total,
        ))
    return replace(e, parties=tuple(parties))


def build_election(election_id: str, rows: Iterable[CandidateResult],
                   tie_policy: str = "flag", drop_unopposed: bool = True) -> Election:
    by_district: "OrderedDict[str, list[CandidateResult]]" = OrderedDict()
    for r in rows:
        by_district.setdefault(r.district_id, []).append(r)
    districts = []
    for did, cands in by_district.items():
        if drop_unopposed and len(cands) == 1:
            warnings.warn(f"election {election_id}: dropping unopposed district {did}",
                          stacklevel=2)
            continue
        districts.append(District.build(did, cands, tie_policy))
    return compute_aggregates(Election(election_id, tuple(districts)))


def _read_rows(handle) -> list[CandidateResult]:
    reader = csv.reader(handle)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file", 1) from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise ParseError(f"header must be {','.join(CSV_HEADER)}", 1)
    rows = []
    seen = set()
    for lineno, rec in enumerate(reader, start=2):
        if not rec or all(not x.strip() for x in rec):
            continue
        if len(rec) != 4:
            raise ParseError(f"expected 4 fields, got {len(rec)}", lineno)
        eid, did, pid, raw = (x.strip() for x in rec)
        if not (eid and did and pid):
            raise ParseError("empty identifier", lineno)
        try:
            votes = int(raw)
        except ValueError:
            raise ParseError(f"vote count {raw!r} is not an integer", lineno) from None
        if votes < 0:
            raise ValidationError(f"line {lineno}: negative vote count {votes}")
        key = (eid, did, pid)
        if key in seen:
            raise ValidationError(f"line {lineno}: duplicate candidate {key}")
        seen.add(key)
        rows.append(CandidateResult(eid, did, pid, votes))
    return rows


def parse_dataset(path, format: str = "candidate-csv",
                  tie_policy: str = "flag") -> list[Election]:
    """Read a candidate CSV into elections with aggregates computed.

    Unopposed districts are dropped with a warning.  Raises
    :class:`ParseError` (with line number) for malformed rows and
    :class:`ValidationError` for duplicates, negative or zero-vote districts.
    """
    if format != "candidate-csv":
        raise ValueError(f"unsupported format {format!r}")
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = _read_rows(fh)
    if not rows:
        raise ParseError("no candidate rows", 2)
    grouped: "OrderedDict[str, list[CandidateResult]]" = OrderedDict()
    for r in rows:
        grouped.setdefault(r.election_id, []).append(r)
    elections = []
    for eid, erows in grouped.items():
        e = build_election(eid, erows, tie_policy)
        if e.districts:
            elections.append(e)
    return elections


def serialize_dataset(elections: Sequence[Election]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for e in elections:
        for d in e.districts:
            for c in d.candidates:
                w.writerow((c.election_id, c.district_id, c.party_id, c.votes))
    return buf.getvalue()


def atomic_write(path, data: str | bytes) -> None:
    """Write via a temp file in the target directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_dataset(elections: Sequence[Election], path) -> None:
    atomic_write(path, serialize_dataset(elections))


def dataset_summary(elections: Sequence[Election]) -> dict:
    """Dataset characteristics in the shape of the usual descriptive table.

    ``c`` districts per election; ``n`` candidates per district; ``phi`` the
    effective number of candidates per district; ``n_R`` candidates with at
    least 5% of the district vote.
    """
    import numpy as np

    if not elections:
        return {"elections": 0, "parties": 0, "districts": 0, "candidates": 0}
    c = np.array([len(e.districts) for e in elections])
    n_e, phi_e, nr_e = [], [], []
    for e in elections:
        sh = [np.array(d.shares()) for d in e.districts]
        n_e.append(np.mean([len(x) for x in sh]))
        phi_e.append(np.mean([1.0 / np.sum(x ** 2) for x in sh]))
        nr_e.append(np.mean([np.sum(x >= 0.05) for x in sh]))
    n_e, phi_e, nr_e = np.array(n_e), np.array(phi_e), np.array(nr_e)
    return {
        "elections": len(elections),
        "parties": sum(len(e.parties) for e in elections),
        "districts": int(c.sum()),
        "candidates": sum(d.n_candidates for e in elections for d in e.districts),
        "c": {"med": float(np.median(c)), "min": int(c.min()), "max": int(c.max())},
        "n": {"avg": float(n_e.mean()), "max": float(n_e.max())},
        "phi": {"avg": float(phi_e.mean()), "min": float(phi_e.min()), "max": float(phi_e.max())},
        "n_R": {"avg": float(nr_e.mean()), "min": float(nr_e.min()), "max": float(nr_e.max())},
    }
