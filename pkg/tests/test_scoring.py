import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.optimize import brentq

from fptpbias.scoring import (BandwidthConfig, PartyRow, SeatsVotesModel, default_k0, election_p_value,
                              empirical_cdf, null_density, null_mc_oracle, party_rows, score_dataset,
                              tail_p_value)
from fptpbias.synthetic import simulate_elections
from fptpbias.thresholds import train_threshold_model

from oracles import geomean_uniform_half_cdf

SMALL_BW = BandwidthConfig(scheme="fixed", h0_grid=(0.05, 0.1, 0.2), k_grid=(1,), criterion="mse")


def synthetic_rows(counts, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for i, c in enumerate(counts):
        v = float(rng.uniform(0.05, 0.6))
        t = float(rng.uniform(0.34, 0.5))
        s = rng.binomial(c, min(1.0, v / (2 * t))) / c
        rows.append(PartyRow(f"e{i}", "p", v, float(s), t, int(c), 0.5))
    return rows


@pytest.mark.parametrize("F,p", [(0.5, 0.5), (0.02, 0.02), (0.98, 0.02), (0.0, 1e-6), (1.0, 1e-6)])
def test_tail_p_value(F, p):
    assert tail_p_value(F) == pytest.approx(p)


def test_mid_tail_uses_left_limit():
    assert tail_p_value(1.0, 0.9, "mid") == pytest.approx(0.05)
    with pytest.raises(ValueError):
        tail_p_value(0.3, None, "mid")


def test_election_p_value_examples():
    assert election_p_value([0.05], [1.0]) == pytest.approx(0.05)
    assert election_p_value([0.2, 0.2, 0.2], [0.2, 0.3, 0.5]) == pytest.approx(0.2)
    assert election_p_value([0.04, 0.25], [0.5, 0.5]) == pytest.approx(0.1)


def test_election_p_value_needs_normalized_weights():
    with pytest.raises(ValueError):
        election_p_value([0.1, 0.2], [0.5, 0.6])


@settings(max_examples=80)
@given(st.lists(st.tuples(st.floats(1e-6, 0.5), st.floats(0.01, 1.0)), min_size=1, max_size=8))
def test_geometric_mean_between_extremes(pairs):
    p, w = map(np.array, zip(*pairs))
    pi = election_p_value(p, w / w.sum())
    assert p.min() * (1 - 1e-9) <= pi <= p.max() * (1 + 1e-9)


def test_null_density_examples():
    assert null_density(0.25, 1) == pytest.approx(2.0)
    assert null_density(math.exp(-1), 2) == pytest.approx(math.e)


@pytest.mark.parametrize("a", [0.01, 0.2, 0.7])
def test_null_density_tail_integral(a):
    val, _ = integrate.quad(lambda x: null_density(x, 1), a, 1.0)
    assert val == pytest.approx(-math.log(a) / 2, rel=1e-8)


def test_null_mc_single_party_median():
    draws = null_mc_oracle(1, samples=10 ** 5, seed=3)
    assert np.median(draws) == pytest.approx(0.25, abs=0.01)


def test_zero_weight_drops_factor():
    one = null_mc_oracle(1, samples=10 ** 5, seed=4)
    two = null_mc_oracle(2, weights=[1.0, 0.0], samples=10 ** 5, seed=5)
    q = np.linspace(0.05, 0.95, 19)
    assert np.allclose(np.quantile(one, q), np.quantile(two, q), atol=0.01)


def test_two_party_median_matches_quadrature():
    draws = null_mc_oracle(2, samples=2 * 10 ** 5, seed=6)
    median_q = brentq(lambda x: geomean_uniform_half_cdf(x) - 0.5, 1e-6, 0.5 - 1e-9)
    assert np.median(draws) == pytest.approx(median_q, abs=0.003)
    # quadrature against the closed form y - y log y with y = 4 x^2
    for x in (0.05, 0.15, 0.3, 0.45):
        y = 4 * x * x
        assert geomean_uniform_half_cdf(x) == pytest.approx(y - y * math.log(y), abs=1e-8)
        assert empirical_cdf(draws, x) == pytest.approx(y - y * math.log(y), abs=0.005)


def test_strata_follow_contest_counts():
    rows = synthetic_rows([1] * 20 + [2] * 20 + [5] * 20)
    m = SeatsVotesModel(rows, k0=5, bandwidth=SMALL_BW)
    assert sorted(m.models) == [1, 2, 5]
    assert m.models[1].n == 60 and m.models[2].n == 40 and m.models[5].n == 20
    assert m.stratum_for(1) == 1 and m.stratum_for(3) == 5 and m.stratum_for(9) == 5


def test_single_pooled_model():
    rows = synthetic_rows([6, 7, 8, 9] * 15)
    assert sorted(SeatsVotesModel(rows, k0=5, bandwidth=SMALL_BW).models) == [5]
    rows = synthetic_rows([1, 2, 3, 9] * 15)
    assert sorted(SeatsVotesModel(rows, k0=1, bandwidth=SMALL_BW).models) == [1]


def test_default_cutoff():
    assert default_k0([1] * 50 + [10] * 50) == 10
    assert default_k0([1] * 90 + [30] * 10) == 5
    assert default_k0([]) == 5


def test_model_round_trip_keeps_p_values():
    rows = synthetic_rows([3, 6, 12, 20] * 15, seed=2)
    m = SeatsVotesModel(rows, k0=6, bandwidth=SMALL_BW)
    again = SeatsVotesModel.from_dict(m.to_dict())
    assert [again.party_p_value(r) for r in rows] == [m.party_p_value(r) for r in rows]


def test_p_values_in_range():
    rows = synthetic_rows([4, 8, 15] * 20, seed=3)
    m = SeatsVotesModel(rows, k0=4, bandwidth=SMALL_BW)
    p = np.array([m.party_p_value(r) for r in rows])
    assert np.all((p >= 1e-6) & (p <= 0.5))


@pytest.fixture(scope="module")
def scored_setup():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        elections = simulate_elections(80, seed=11)
        th = train_threshold_model(elections, seed=0, min_group=50)
        model = SeatsVotesModel(party_rows(elections, th), bandwidth=SMALL_BW)
    return model, th, elections


def test_alpha_one_flags_everything(scored_setup):
    model, th, elections = scored_setup
    ds = score_dataset(model, th, elections[:10], alpha=1.0)
    assert all(e.flagged for e in ds.elections)
    assert ds.summary["fraction_flagged"] == 1.0


def test_empty_dataset(scored_setup):
    model, th, _ = scored_setup
    ds = score_dataset(model, th, [], alpha=0.05)
    assert ds.elections == []
    assert ds.summary["mean_pi"] is None and ds.summary["fraction_flagged"] is None


def test_training_set_rarely_flagged(scored_setup):
    model, th, elections = scored_setup
    ds = score_dataset(model, th, elections, alpha=0.05)
    assert ds.summary["fraction_flagged"] <= 0.1
