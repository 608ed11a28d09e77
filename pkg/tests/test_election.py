import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fptpbias.election import (TIE, CandidateResult, DataError, ParseError, ValidationError,
                               build_election, district_winner, parse_dataset, serialize_dataset)


def rows(spec, eid="e1"):
    return [CandidateResult(eid, d, p, v) for d, p, v in spec]


def write_csv(tmp_path, text, name="in.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_two_district_election_winners():
    e = build_election("e1", rows([("d1", "p1", 60), ("d1", "p2", 40), ("d2", "p1", 30), ("d2", "p2", 70)]))
    assert len(e.districts) == 2
    assert [d.winner for d in e.districts] == ["p1", "p2"]


def test_negative_votes_rejected():
    with pytest.raises(ValidationError):
        CandidateResult("e1", "d1", "p1", -5)


def test_negative_votes_in_csv(tmp_path):
    p = write_csv(tmp_path, "election_id,district_id,party_id,votes\ne1,d1,p1,-5\ne1,d1,p2,3\n")
    with pytest.raises(ValidationError, match="line 2"):
        parse_dataset(p)


def test_unopposed_district_dropped_with_warning():
    with pytest.warns(UserWarning, match="unopposed"):
        e = build_election("e1", rows([("d1", "p1", 60), ("d1", "p2", 40), ("d2", "p1", 99)]))
    assert [d.district_id for d in e.districts] == ["d1"]


def test_sweep_gives_full_seat_share():
    e = build_election("e1", rows([("d1", "a", 6), ("d1", "b", 4), ("d2", "a", 7), ("d2", "b", 3)]))
    assert e.party("a").seat_share == 1.0
    assert e.party("b").seat_share == 0.0


def test_vote_share_is_turnout_weighted():
    # 0.6 of 100 votes and 0.3 of 300 votes
    e = build_election("e1", rows([("d1", "a", 60), ("d1", "b", 40), ("d2", "a", 90), ("d2", "b", 210)]))
    assert e.party("a").vote_share == pytest.approx(0.375)


def test_party_weights_sum_to_one():
    e = build_election("e1", rows([("d1", "a", 60), ("d1", "b", 40), ("d2", "a", 90), ("d2", "c", 210)]))
    assert sum(p.weight for p in e.parties) == pytest.approx(1.0)


def test_unknown_party_lookup():
    e = build_election("e1", rows([("d1", "a", 6), ("d1", "b", 4)]))
    with pytest.raises(KeyError):
        e.party("zzz")


@pytest.mark.parametrize("votes,policy,expected", [
    ((60, 40), "flag", "a"),
    ((50, 50), "flag", TIE),
    ((50, 50, 0), "first-listed", "a"),
    ((10, 30, 30), "first-listed", "b"),
])
def test_district_winner(votes, policy, expected):
    assert district_winner(votes, ["a", "b", "c"][:len(votes)], policy) == expected


def test_unknown_tie_policy():
    with pytest.raises(ValueError):
        district_winner((1, 2), ["a", "b"], "coin")


def test_malformed_row_reports_line(tmp_path):
    p = write_csv(tmp_path, "election_id,district_id,party_id,votes\ne1,d1,p1,4\ne1,d1,p2,x\n")
    with pytest.raises(ParseError, match="line 3"):
        parse_dataset(p)


def test_bad_header(tmp_path):
    p = write_csv(tmp_path, "a,b,c,d\n")
    with pytest.raises(ParseError, match="line 1"):
        parse_dataset(p)


def test_empty_file(tmp_path):
    with pytest.raises(DataError):
        parse_dataset(write_csv(tmp_path, ""))


def test_duplicate_candidate(tmp_path):
    p = write_csv(tmp_path, "election_id,district_id,party_id,votes\ne1,d1,p1,4\ne1,d1,p1,5\n")
    with pytest.raises(ValidationError, match="duplicate"):
        parse_dataset(p)


def test_serialize_round_trip(tmp_path):
    text = ("election_id,district_id,party_id,votes\n"
            "e1,d1,p1,60\ne1,d1,p2,40\ne1,d2,p1,30\ne1,d2,p2,70\ne2,d1,p3,5\ne2,d1,p1,6\n")
    first = parse_dataset(write_csv(tmp_path, text))
    again = parse_dataset(write_csv(tmp_path, serialize_dataset(first), "out.csv"))
    assert serialize_dataset(again) == serialize_dataset(first)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.integers(0, 1000), min_size=2, max_size=5), min_size=1, max_size=6))
def test_aggregates_are_consistent(districts):
    spec = []
    for k, vs in enumerate(districts):
        vs = [v + 1 for v in vs]
        for i, v in enumerate(vs):
            spec.append((f"d{k}", f"p{i}", v))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        e = build_election("e", rows(spec))
    for p in e.parties:
        assert 0.0 <= p.vote_share <= 1.0
        assert 0.0 <= p.seat_share <= 1.0
    won = sum(p.seats for p in e.parties)
    assert won == sum(1 for d in e.districts if not d.is_tie)
