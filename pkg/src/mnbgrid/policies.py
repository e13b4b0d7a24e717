"""Hedge(lambda), Thompson-Hedge and restarted EXP3 with batch restarts.

Every state stores its arrays with the node axis last.  Any leading axes are
treated as independent trials, so one state object can advance a whole block
of Monte-Carlo replications in lockstep.  States are immutable: each update
returns a new state and leaves its input untouched.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
import math

import numpy as np

from .attacks import GammaBelief, truncated_mean

# Weights are rescaled past this to stay finite; selection is scale-invariant.
_RESCALE_AT = 1e150


class HorizonTooShort(ValueError):
    pass


def hedge_epsilon(n_nodes, horizon):
    """Multiplicative base (1 - sqrt(ln N / 2T))^-1 of the Hedge update."""
    if n_nodes < 2:
        raise ValueError("need at least 2 nodes")
    ratio = math.log(n_nodes) / (2.0 * horizon) if horizon > 0 else math.inf
    if ratio >= 1.0:
        raise HorizonTooShort(
            f"horizon {horizon} too short for {n_nodes} nodes (need T > ln N / 2)")
    return 1.0 / (1.0 - math.sqrt(ratio))


def batch_epsilon(n_nodes, batch_size):
    """Hedge base tuned to the batch length; batches too short for the
    formula fall back to the smallest admissible length."""
    d = np.maximum(np.asarray(batch_size, dtype=float), math.log(n_nodes))
    eps = 1.0 / (1.0 - np.sqrt(math.log(n_nodes) / (2.0 * d)))
    return float(eps) if eps.ndim == 0 else eps


def _batch_size(scale, horizon, m, variation):
    variation = np.asarray(variation, dtype=float)
    if np.any(~(variation > 0)):
        raise ValueError("variation budget must be positive")
    if m < 1 or horizon < 1:
        raise ValueError("need m >= 1 and T >= 1")
    raw = np.ceil(scale ** (1 / 3) * (horizon / (m * variation)) ** (2 / 3))
    out = np.clip(raw, 1, horizon).astype(int)
    return int(out) if out.ndim == 0 else out


def hedge_batch_size(horizon, m, variation, n_nodes):
    """ceil((ln N)^(1/3) (T / (m V_T))^(2/3)), clamped to [1, T].

    ``variation`` may be an array (one budget per trial).
    """
    return _batch_size(math.log(n_nodes), horizon, m, variation)


def rexp3_batch_size(horizon, m, variation, n_nodes):
    return _batch_size(n_nodes * math.log(n_nodes), horizon, m, variation)


def rexp3_gamma(batch_size, n_nodes):
    b = np.asarray(batch_size, dtype=float)
    g = np.minimum(1.0, np.sqrt(n_nodes * math.log(n_nodes) / ((math.e - 1) * b)))
    return float(g) if g.ndim == 0 else g


def _advance(weights, step_in_batch, batch_size):
    """Move one step forward in the batch; restart weights where a batch ends."""
    step = step_in_batch + 1
    done = step >= batch_size
    if np.ndim(done) == 0:
        if done:
            return np.ones_like(weights), 0 * step
        return weights, step
    if done.any():
        weights = weights.copy()
        weights[done] = 1.0
        step = np.where(done, 0, step)
    return weights, step


def _rescale(weights):
    top = weights.max(axis=-1, keepdims=True)
    if np.any(top > _RESCALE_AT):
        weights = np.where(top > _RESCALE_AT, weights / top, weights)
    return weights


def selection_probs(weights):
    return weights / weights.sum(axis=-1, keepdims=True)


def draw_from(probs, rng):
    """Inverse-CDF draw of one index per row of ``probs``."""
    u = rng.random(probs.shape[:-1])
    cdf = np.cumsum(probs, axis=-1)
    idx = (cdf <= u[..., None]).sum(axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


# ---------------------------------------------------------------------------
# Hedge(lambda)

@dataclass(frozen=True)
class PolicyState:
    weights: np.ndarray
    epsilon: float
    batch_size: int | np.ndarray
    step_in_batch: int | np.ndarray = 0
    time: int = 0

    @property
    def n_nodes(self):
        return self.weights.shape[-1]

    @property
    def probs(self):
        return selection_probs(self.weights)


def init_hedge(n_nodes, horizon, batch_size, trials=None, tune="horizon"):
    """Fresh Hedge state; ``trials`` adds a leading replication axis.

    ``tune="batch"`` sets epsilon from the batch length instead of T.
    """
    shape = (n_nodes,) if trials is None else (trials, n_nodes)
    step = 0 if trials is None else np.zeros(trials, dtype=int)
    if tune == "horizon":
        eps = hedge_epsilon(n_nodes, horizon)
    elif tune == "batch":
        eps = batch_epsilon(n_nodes, batch_size)
    else:
        raise ValueError(f"unknown epsilon tuning {tune!r}")
    return PolicyState(np.ones(shape), eps, batch_size, step, 0)


def select_node(state: PolicyState, rng):
    idx = draw_from(state.probs, rng)
    return int(idx) if idx.ndim == 0 else idx


def hedge_update(state: PolicyState, mu, costs, m=None, update_cost="own", chosen=None):
    """One full-information Hedge step: w_i <- w_i * eps^(mu_i * c_i).

    With ``update_cost="chosen"`` every node is instead exponentiated by the
    chosen node's cost, and ``chosen`` must be given.
    """
    costs = np.asarray(costs, dtype=float)
    if m is not None and (np.any(costs < 0) or np.any(costs > 1.0 / m + 1e-12)):
        raise ValueError(f"costs must lie in [0, 1/{m}]")
    if update_cost == "chosen":
        if chosen is None:
            raise ValueError("update_cost='chosen' needs the chosen node")
        c = np.take_along_axis(costs, np.asarray(chosen)[..., None], axis=-1)
    elif update_cost == "own":
        c = costs
    else:
        raise ValueError(f"unknown update_cost {update_cost!r}")
    log_eps = np.log(state.epsilon)
    if np.ndim(log_eps):
        log_eps = log_eps[..., None]
    weights = state.weights * np.exp(log_eps * np.asarray(mu) * c)
    weights = _rescale(weights)
    weights, step = _advance(weights, state.step_in_batch, state.batch_size)
    return replace(state, weights=weights, step_in_batch=step, time=state.time + 1)


# ---------------------------------------------------------------------------
# Thompson-Hedge

@dataclass(frozen=True)
class StepOutcome:
    chosen_node: int | np.ndarray
    observed_count: int | np.ndarray
    revealed_costs: np.ndarray

    @property
    def reward(self):
        c = np.asarray(self.revealed_costs)
        picked = np.take_along_axis(c, np.asarray(self.chosen_node)[..., None], axis=-1)[..., 0]
        r = np.asarray(self.observed_count) * picked
        return float(r) if r.ndim == 0 else r


@dataclass(frozen=True)
class ThompsonHedgeState:
    base: PolicyState
    alpha: np.ndarray
    beta: np.ndarray
    m: int

    @property
    def beliefs(self):
        """Per-node beliefs of a single (non-batched) state."""
        if self.alpha.ndim != 1:
            raise ValueError("beliefs are only listed for an unbatched state")
        return [GammaBelief(a, b) for a, b in zip(self.alpha, self.beta)]


def init_thompson_hedge(alpha, beta, m, horizon, batch_size, trials=None, tune="horizon"):
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if np.any(alpha <= 0) or np.any(beta <= 0):
        raise ValueError("prior parameters must be positive")
    n = alpha.shape[-1]
    base = init_hedge(n, horizon, batch_size, trials, tune)
    shape = base.weights.shape
    return ThompsonHedgeState(base, np.broadcast_to(alpha, shape).copy(),
                              np.broadcast_to(beta, shape).copy(), m)


def thompson_hedge_update(state: ThompsonHedgeState, outcome: StepOutcome, rng,
                          update_cost="own"):
    """Posterior update of the probed node, then a Hedge step driven by a
    fresh posterior sample of every node's rate.

    ``rng`` is only used for the posterior draws, so node selection can run
    on its own stream.
    """
    k = np.asarray(outcome.observed_count)
    if np.any(k < 0) or np.any(k > state.m):
        raise ValueError(f"observed count outside [0, {state.m}]")
    chosen = np.asarray(outcome.chosen_node)
    alpha = state.alpha.copy()
    beta = state.beta.copy()
    if alpha.ndim == 1:
        alpha[chosen] += k
        beta[chosen] += 1
    else:
        rows = np.arange(alpha.shape[0])
        alpha[rows, chosen] += k
        beta[rows, chosen] += 1
    lam_hat = rng.gamma(alpha, 1.0 / beta)
    mu_hat = truncated_mean(lam_hat, state.m)
    base = hedge_update(state.base, mu_hat, outcome.revealed_costs, state.m,
                        update_cost=update_cost, chosen=chosen)
    return ThompsonHedgeState(base, alpha, beta, state.m)


# ---------------------------------------------------------------------------
# R.EXP3 (bandit feedback)

@dataclass(frozen=True)
class REXP3State:
    weights: np.ndarray
    gamma: float | np.ndarray
    batch_size: int | np.ndarray
    step_in_batch: int | np.ndarray = 0
    last_node: int | np.ndarray | None = None
    last_probs: np.ndarray | None = None

    @property
    def probs(self):
        n = self.weights.shape[-1]
        g = np.asarray(self.gamma)[..., None] if np.ndim(self.gamma) else self.gamma
        return (1 - g) * selection_probs(self.weights) + g / n


def init_rexp3(n_nodes, batch_size, gamma=None, trials=None):
    if gamma is None:
        gamma = rexp3_gamma(batch_size, n_nodes)
    if np.any(np.asarray(gamma) <= 0) or np.any(np.asarray(gamma) > 1):
        raise ValueError("exploration rate must lie in (0, 1]")
    shape = (n_nodes,) if trials is None else (trials, n_nodes)
    step = 0 if trials is None else np.zeros(trials, dtype=int)
    return REXP3State(np.ones(shape), gamma, batch_size, step)


def rexp3_select(state: REXP3State, rng):
    p = state.probs
    node = draw_from(p, rng)
    node = int(node) if node.ndim == 0 else node
    return node, replace(state, last_node=node, last_probs=p)


def rexp3_update(state: REXP3State, reward):
    """Importance-weighted exponential update for the last chosen node."""
    if state.last_node is None:
        raise ValueError("no node has been chosen yet")
    reward = np.asarray(reward, dtype=float)
    if np.any(reward < 0) or np.any(reward > 1 + 1e-12):
        raise ValueError("bandit reward must lie in [0, 1]")
    n = state.weights.shape[-1]
    node = np.asarray(state.last_node)
    p_chosen = np.take_along_axis(state.last_probs, node[..., None], axis=-1)[..., 0]
    xhat = reward / p_chosen
    weights = state.weights.copy()
    bump = np.exp(np.asarray(state.gamma) * xhat / n)
    if weights.ndim == 1:
        weights[node] *= bump
    else:
        weights[np.arange(weights.shape[0]), node] *= bump
    weights = _rescale(weights)
    weights, step = _advance(weights, state.step_in_batch, state.batch_size)
    return replace(state, weights=weights, step_in_batch=step,
                   last_node=None, last_probs=None)


def rexp3_step(state: REXP3State, bandit_reward, rng):
    """Feed the previous node's reward (``None`` on the first call), then pick
    the next node."""
    if bandit_reward is not None:
        state = rexp3_update(state, bandit_reward)
    return rexp3_select(state, rng)
