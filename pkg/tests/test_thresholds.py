import numpy as np
import pytest

from fptpbias.competition import analytic_boundary_n3_array
from fptpbias.election import CandidateResult, build_election
from fptpbias.synthetic import district_shares, simulate_elections
from fptpbias.thresholds import (ThresholdModel, TrainingPoints, extract_training_points,
                                 fit_monotone_spline, merge_small_groups, points_from_shares,
                                 train_boundary, train_threshold_model)


def election(districts, eid="e"):
    rows = []
    for k, votes in enumerate(districts):
        for i, v in enumerate(votes):
            rows.append(CandidateResult(eid, f"d{k}", f"p{i}", v))
    return build_election(eid, rows)


def test_three_candidate_district_gives_three_points():
    pts = extract_training_points([election([(50, 30, 20)])])
    assert list(pts) == [3]
    assert len(pts[3]) == 3


def test_tied_district_gives_nothing():
    assert extract_training_points([election([(40, 40, 20)])]) == {}


def test_winner_point_renormalized():
    pts = extract_training_points([election([(50, 30, 20)])])[3]
    i = int(np.argmax(pts.v))
    assert pts.v[i] == pytest.approx(0.5)
    assert pts.phi[i] == pytest.approx(1 / 0.52)
    assert pts.won[i]
    assert pts.won.sum() == 1


def test_constant_boundary_recovered():
    rng = np.random.default_rng(0)
    v = rng.uniform(0.2, 0.5, 4000)
    phi = rng.uniform(1.0, 3.0, 4000)
    keep = np.abs(v - 0.4) > 0.01
    pts = TrainingPoints(v[keep], phi[keep], v[keep] > 0.4)
    entry = train_boundary(pts, 4, seed=0, holdout=0.0)
    grid = np.linspace(1.05, 2.95, 50)
    assert np.max(np.abs(entry.threshold(4, grid) - 0.4)) < 0.01
    assert entry.meta["error_in_sample"] == 0.0


def test_spline_is_non_increasing():
    rng = np.random.default_rng(1)
    x = np.linspace(1, 4, 80)
    y = 0.5 - 0.05 * x + rng.normal(0, 0.01, x.size)
    knots = np.concatenate([[1.0] * 4, [2.0, 3.0], [4.0] * 4])
    sp = fit_monotone_spline(x, y, knots, 0.25, 0.5)
    vals = sp(np.linspace(1, 4, 400))
    assert np.all(np.diff(vals) <= 1e-12)


def analytic_model():
    return ThresholdModel()


def test_two_candidates_threshold_half():
    assert analytic_model().effective_seat_threshold(2, 1.0) == 0.5


@pytest.mark.parametrize("phi,t", [(2.0, 1 / 3), (1.5, 0.44093)])
def test_three_candidates_analytic(phi, t):
    assert analytic_model().effective_seat_threshold(3, phi) == pytest.approx(t, abs=1e-5)


def test_classify_examples():
    m = analytic_model()
    assert m.classify(0.2, 3, 2.0) == 0
    assert m.classify(0.45, 3, 1.5) == 1


def test_classify_above_half_always_wins():
    m = train_threshold_model(simulate_elections(150, seed=3), seed=0, min_group=50)
    for n in (3, 4, 5, 6):
        for phi in (1.0, 1.7, float(n - 1)):
            assert m.classify(0.6, n, phi) == 1


def test_mean_threshold_examples():
    m = analytic_model()
    e = election([(60, 40)])
    assert m.mean_effective_seat_threshold(e, "p0") == 0.5
    # districts with thresholds 1/2 (two candidates) and 1/3 (phi = 2)
    e = election([(60, 40), (40, 30, 30)])
    assert m.mean_effective_seat_threshold(e, "p0") == pytest.approx(5 / 12)


def test_all_two_candidate_mean_threshold():
    e = election([(60, 40), (10, 90), (51, 49)])
    assert ThresholdModel().party_thresholds(e) == {"p0": 0.5, "p1": 0.5}


def test_merge_small_groups_folds_upward():
    pts = lambda k: TrainingPoints(np.zeros(k), np.ones(k), np.zeros(k, bool))  # noqa: E731
    out = merge_small_groups({3: pts(500), 4: pts(50), 5: pts(300), 6: pts(10)}, 200)
    assert sorted(out) == [5]
    assert len(out[5]) == 360


def test_model_json_round_trip():
    m = train_threshold_model(simulate_elections(120, seed=4), seed=0, min_group=50)
    again = ThresholdModel.from_json(m.to_json())
    assert again.to_json() == m.to_json()
    phi = np.linspace(1, 3, 11)
    for n in m.entries:
        assert np.allclose(again.effective_seat_threshold(n, np.clip(phi, 1, n - 1)),
                           m.effective_seat_threshold(n, np.clip(phi, 1, n - 1)))


def test_threshold_within_bounds():
    m = train_threshold_model(simulate_elections(120, seed=5), seed=0, min_group=50)
    for n in range(3, 9):
        t = m.effective_seat_threshold(n, np.linspace(1, n - 1, 30))
        assert np.all(t >= 1 / n - 1e-12) and np.all(t <= 0.5)


def test_analytic_boundary_classifies_simulated_districts():
    pts = points_from_shares(district_shares(5000, 3, np.random.default_rng(9)))
    pred = pts.v > analytic_boundary_n3_array(np.clip(pts.phi, 1.0, 2.0))
    assert np.array_equal(pred, pts.won)
