import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from mnbgrid import policies as pol
from mnbgrid.attacks import draw_counts, truncated_mean


def test_epsilon_formula():
    assert pol.hedge_epsilon(10, 2000) == pytest.approx(1 / (1 - math.sqrt(math.log(10) / 4000)))
    with pytest.raises(pol.HorizonTooShort):
        pol.hedge_epsilon(10, 1)
    with pytest.raises(ValueError):
        pol.hedge_epsilon(1, 100)


def test_batch_epsilon_falls_back_on_short_batches():
    assert pol.batch_epsilon(10, 22) == pytest.approx(pol.hedge_epsilon(10, 22))
    assert math.isfinite(pol.batch_epsilon(10, 1))
    np.testing.assert_allclose(pol.batch_epsilon(10, np.array([22, 40])),
                               [pol.hedge_epsilon(10, 22), pol.hedge_epsilon(10, 40)])


def test_batch_sizes():
    # ceil((ln 10)^(1/3) (1000/30)^(2/3)) = ceil(13.68)
    assert pol.hedge_batch_size(1000, 3, 10, 10) == 14
    assert pol.hedge_batch_size(10, 1, 1e-9, 10) == 10          # clamped to T
    assert pol.hedge_batch_size(100, 3, 1e6, 10) == 1            # clamped to 1
    assert list(pol.hedge_batch_size(1000, 3, np.array([10.0, 20.0]), 10)) == [14, 9]
    with pytest.raises(ValueError):
        pol.hedge_batch_size(1000, 3, 0.0, 10)
    r = pol.rexp3_batch_size(1000, 3, 10, 10)
    assert r == math.ceil((10 * math.log(10)) ** (1 / 3) * (1000 / 30) ** (2 / 3))
    assert pol.rexp3_gamma(r, 10) == pytest.approx(
        min(1, math.sqrt(10 * math.log(10) / ((math.e - 1) * r))))


def naive_hedge(eps, delta, mu, costs):
    w = [1.0] * len(mu)
    out = []
    for t in range(len(costs)):
        w = [w[i] * eps ** (mu[i] * costs[t][i]) for i in range(len(mu))]
        if (t + 1) % delta == 0:
            w = [1.0] * len(mu)
        out.append(list(w))
    return out


def test_hedge_matches_naive_loop(rng):
    n, T, delta = 4, 25, 7
    mu = rng.uniform(0, 3, n)
    costs = rng.uniform(0, 1 / 3, (T, n))
    state = pol.init_hedge(n, T, delta)
    ref = naive_hedge(state.epsilon, delta, mu, costs)
    for t in range(T):
        state = pol.hedge_update(state, mu, costs[t], m=3)
        np.testing.assert_allclose(state.weights, ref[t], rtol=1e-12)
    assert state.time == T


def test_hedge_chosen_cost_variant(rng):
    state = pol.init_hedge(3, 100, 50)
    mu, c = np.array([1.0, 2.0, 3.0]), np.array([0.1, 0.2, 0.3])
    new = pol.hedge_update(state, mu, c, update_cost="chosen", chosen=1)
    np.testing.assert_allclose(new.weights, state.epsilon ** (mu * 0.2))
    with pytest.raises(ValueError):
        pol.hedge_update(state, mu, c, update_cost="chosen")
    with pytest.raises(ValueError):
        pol.hedge_update(state, mu, np.array([0.1, 0.5, 0.1]), m=3)


def test_hedge_is_immutable():
    s = pol.init_hedge(3, 100, 5)
    pol.hedge_update(s, np.ones(3), np.full(3, 0.1))
    assert np.array_equal(s.weights, np.ones(3))


def test_batched_state_equals_single(rng):
    n, T, trials = 5, 30, 3
    mu = rng.uniform(0, 3, (trials, n))
    costs = rng.uniform(0, 1 / 3, (T, trials, n))
    sizes = np.array([4, 7, 30])
    batched = pol.init_hedge(n, T, sizes, trials=trials, tune="batch")
    singles = [pol.init_hedge(n, T, int(d), tune="batch") for d in sizes]
    for t in range(T):
        batched = pol.hedge_update(batched, mu, costs[t])
        singles = [pol.hedge_update(s, mu[j], costs[t, j]) for j, s in enumerate(singles)]
    for j, s in enumerate(singles):
        np.testing.assert_allclose(batched.weights[j], s.weights, rtol=1e-12)


@settings(max_examples=40)
@given(st.lists(st.floats(0, 1e3), min_size=2, max_size=8).filter(lambda w: sum(w) > 0),
       st.integers(0, 2**31))
def test_draw_from_in_range(w, seed):
    p = np.asarray(w) / sum(w)
    idx = pol.draw_from(p, np.random.default_rng(seed))
    assert 0 <= idx < len(w)
    assert p[idx] > 0


def test_selection_frequencies(rng):
    state = pol.PolicyState(np.array([1.0, 3.0]), 1.1, 10)
    picks = np.array([pol.select_node(state, rng) for _ in range(20_000)])
    assert picks.mean() == pytest.approx(0.75, abs=0.015)


def test_rescaling_keeps_probabilities():
    s = pol.PolicyState(np.array([1e149, 1e140, 1.0]), 1e10, 100)
    new = pol.hedge_update(s, np.array([3.0, 3.0, 0.0]), np.array([1 / 3, 0, 0]), m=3)
    assert np.all(np.isfinite(new.weights))
    assert new.weights.max() <= 1.0 + 1e-12
    assert new.probs[0] == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# Thompson-Hedge

def test_thompson_posterior_update_only_chosen(rng):
    s = pol.init_thompson_hedge(np.full(3, 2.0), np.full(3, 2.0), 3, 100, 10)
    out = pol.StepOutcome(1, 2, np.array([0.1, 0.2, 0.3]))
    assert out.reward == pytest.approx(0.4)
    new = pol.thompson_hedge_update(s, out, rng)
    assert list(new.alpha) == [2.0, 4.0, 2.0]
    assert list(new.beta) == [2.0, 3.0, 2.0]
    assert [b.alpha for b in new.beliefs] == [2.0, 4.0, 2.0]
    with pytest.raises(ValueError):
        pol.thompson_hedge_update(s, pol.StepOutcome(0, 4, np.zeros(3)), rng)


def test_point_mass_prior_reproduces_hedge(rng):
    """A near-degenerate prior at the true rates turns Thompson-Hedge into Hedge."""
    n, T, m, delta, scale = 4, 60, 3, 9, 1e20
    lam = rng.uniform(0.2, 3, n)
    mu = truncated_mean(lam, m)
    costs = rng.uniform(0, 1 / m, (T, n))
    th = pol.init_thompson_hedge(lam * scale, np.full(n, scale), m, T, delta, tune="batch")
    hd = pol.init_hedge(n, T, delta, tune="batch")
    sel_a, sel_b = np.random.default_rng(7), np.random.default_rng(7)
    post = np.random.default_rng(8)
    counts = draw_counts(np.broadcast_to(lam, (T, n)), m, rng)
    for t in range(T):
        i = pol.select_node(th.base, sel_a)
        j = pol.select_node(hd, sel_b)
        assert i == j
        th = pol.thompson_hedge_update(th, pol.StepOutcome(i, counts[t, i], costs[t]), post)
        hd = pol.hedge_update(hd, mu, costs[t], m)
        np.testing.assert_allclose(th.base.weights, hd.weights, rtol=1e-9)


def test_posterior_sampling_exchangeability():
    """Given the history, a posterior draw has the law of the true rate.

    Marginally over prior and history both are Gamma(alpha, beta) distributed,
    so a two-sample KS test must not separate them.
    """
    rng = np.random.default_rng(2024)
    alpha, beta, steps, reps = 2.0, 2.0, 15, 4000
    lam_true = rng.gamma(alpha, 1 / beta, reps)
    # truncated counts have a non-conjugate likelihood, so the history here
    # is untruncated Poisson and the conjugate update is exact
    counts = rng.poisson(np.repeat(lam_true[:, None], steps, 1))
    lam_hat = rng.gamma(alpha + counts.sum(1), 1 / (beta + steps))
    assert stats.ks_2samp(lam_true, lam_hat).pvalue > 0.01
    assert stats.kstest(lam_hat, stats.gamma(alpha, scale=1 / beta).cdf).pvalue > 0.01


# ---------------------------------------------------------------------------
# R.EXP3

def test_rexp3_probabilities_and_update(rng):
    s = pol.init_rexp3(4, 5, gamma=0.2)
    np.testing.assert_allclose(s.probs, 0.25)
    node, s = pol.rexp3_select(s, rng)
    p = s.last_probs[node]
    new = pol.rexp3_update(s, 0.5)
    expect = np.ones(4)
    expect[node] = math.exp(0.2 * (0.5 / p) / 4)
    np.testing.assert_allclose(new.weights, expect)
    assert np.all(new.probs >= 0.2 / 4 - 1e-15)
    assert new.probs.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        pol.rexp3_update(new, 0.5)           # nothing chosen
    _, s2 = pol.rexp3_select(new, rng)
    with pytest.raises(ValueError):
        pol.rexp3_update(s2, 1.5)
    with pytest.raises(ValueError):
        pol.init_rexp3(4, 5, gamma=0.0)


def test_rexp3_restarts(rng):
    s = pol.init_rexp3(3, 2, gamma=0.5)
    node, s = pol.rexp3_step(s, None, rng)
    node, s = pol.rexp3_step(s, 1.0, rng)
    assert not np.allclose(s.weights, 1.0)
    node, s = pol.rexp3_step(s, 1.0, rng)
    np.testing.assert_array_equal(s.weights, 1.0)


def test_rexp3_batched(rng):
    s = pol.init_rexp3(3, np.array([2, 5]), trials=2)
    assert s.probs.shape == (2, 3)
    node, s = pol.rexp3_select(s, rng)
    s = pol.rexp3_update(s, np.array([0.3, 0.0]))
    assert s.weights.shape == (2, 3)
    assert np.count_nonzero(s.weights[0] != 1.0) == 1
