import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from mnbgrid.attacks import (GammaBelief, NodeSet, TruncatedPoissonModel, draw_counts,
                             mean_attacks, pmf, pmf_vector, sample_attacks, sample_rate,
                             truncated_mean, update_belief)


def oracle_pmf(lam, m):
    # scipy Poisson with the tail folded onto m
    head = stats.poisson.pmf(np.arange(m), lam)
    return np.append(head, stats.poisson.sf(m - 1, lam))


def test_pmf_hand_values():
    model = TruncatedPoissonModel(1.0, 2)
    assert pmf(model, 0) == pytest.approx(math.exp(-1), abs=1e-15)
    assert pmf(model, 1) == pytest.approx(math.exp(-1), abs=1e-15)
    assert pmf(model, 2) == pytest.approx(1 - 2 * math.exp(-1), abs=1e-15)
    assert pmf(model, 3) == 0.0


def test_zero_rate_is_point_mass():
    model = TruncatedPoissonModel(0.0, 3)
    assert np.array_equal(pmf_vector(model), [1.0, 0.0, 0.0, 0.0])
    assert mean_attacks(model) == 0.0


@pytest.mark.parametrize("lam", [0.05, 0.5, 1.0, 2.5, 7.0, 30.0])
@pytest.mark.parametrize("m", [1, 2, 3, 5, 10])
def test_pmf_matches_scipy(lam, m):
    np.testing.assert_allclose(pmf_vector(TruncatedPoissonModel(lam, m)), oracle_pmf(lam, m),
                               rtol=1e-10, atol=1e-14)


@given(lam=st.floats(0, 50), m=st.integers(1, 12))
def test_pmf_normalized(lam, m):
    p = pmf_vector(TruncatedPoissonModel(lam, m))
    assert abs(p.sum() - 1.0) <= 1e-12
    assert np.all(p >= 0)


@given(lam=st.floats(0, 40), m=st.integers(1, 10))
def test_mean_within_range_and_matches_pmf(lam, m):
    p = oracle_pmf(lam, m)
    mu = mean_attacks(TruncatedPoissonModel(lam, m))
    assert 0 <= mu <= m
    assert mu == pytest.approx(p @ np.arange(m + 1), abs=1e-10)


@given(m=st.integers(1, 8), a=st.floats(0, 10), b=st.floats(0, 10))
def test_mean_monotone_in_rate(m, a, b):
    lo, hi = sorted((a, b))
    assert truncated_mean(lo, m) <= truncated_mean(hi, m) + 1e-12


def test_mean_frozen_value():
    # lam=0.5, m=3: sum_k k p_k with the tail on 3 (scipy oracle, frozen)
    assert truncated_mean(0.5, 3) == pytest.approx(0.49806102868538704, abs=1e-14)


def test_draw_distribution_matches_pmf(rng):
    lam, m = 1.3, 3
    draws = draw_counts(np.full(200_000, lam), m, rng)
    assert draws.min() >= 0 and draws.max() <= m
    freq = np.bincount(draws, minlength=m + 1) / draws.size
    np.testing.assert_allclose(freq, oracle_pmf(lam, m), atol=0.005)


def test_draw_broadcast_and_scalar(rng):
    out = draw_counts(np.array([0.1, 5.0]), 2, rng, size=(1000, 2))
    assert out.shape == (1000, 2)
    assert out[:, 1].mean() > out[:, 0].mean()
    assert isinstance(sample_attacks(TruncatedPoissonModel(0.7, 3), rng), int)


def test_belief_update_and_errors():
    b = update_belief(GammaBelief(2.0, 2.0), 3, m=3)
    assert (b.alpha, b.beta) == (5.0, 3.0)
    with pytest.raises(ValueError):
        update_belief(b, -1)
    with pytest.raises(ValueError):
        update_belief(b, 4, m=3)
    with pytest.raises(ValueError):
        GammaBelief(0.0, 1.0)
    with pytest.raises(ValueError):
        TruncatedPoissonModel(-1.0, 3)
    with pytest.raises(ValueError):
        TruncatedPoissonModel(1.0, 0)
    with pytest.raises(ValueError):
        NodeSet(1)
    assert list(NodeSet(3).indices) == [1, 2, 3]


def test_gamma_sampling_moments(rng):
    belief = GammaBelief(3.0, 2.0)
    x = np.array([sample_rate(belief, rng) for _ in range(40_000)])
    assert x.mean() == pytest.approx(1.5, rel=0.02)
    assert x.var() == pytest.approx(3.0 / 4.0, rel=0.05)


def test_conjugacy_recovers_rate(rng):
    lam_true, m = 0.5, 3
    belief = GammaBelief(2.0, 2.0)
    for k in draw_counts(np.full(5000, lam_true), m, rng):
        belief = update_belief(belief, int(k), m)
    # truncation at 3 barely biases a rate of 0.5
    assert belief.mean == pytest.approx(lam_true, rel=0.05)


@settings(max_examples=30)
@given(a=st.floats(0.1, 20), b=st.floats(0.1, 20), ks=st.lists(st.integers(0, 3), max_size=30))
def test_update_is_order_free(a, b, ks):
    fwd = GammaBelief(a, b)
    for k in ks:
        fwd = update_belief(fwd, k, 3)
    back = GammaBelief(a, b)
    for k in reversed(ks):
        back = update_belief(back, k, 3)
    assert fwd.alpha == pytest.approx(back.alpha) and fwd.beta == back.beta
    assert fwd.beta == b + len(ks)
