"""Regret functionals, theoretical bounds and the Monte-Carlo regret harness.

The harness draws attack rates from the prior ``q_trials`` times; under each
draw it runs ``l_trials`` episodes, each with fresh attack counts and a fresh
cost path.  All policies in the roster see identical counts and costs.  The
sup over cost sequences is estimated per time step as the max over the inner
episodes, and the Bayesian sup regret as the mean of those maxima.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict, replace
import math
import time
import zlib

import numpy as np

from . import policies as pol
from .adversary import draw_cost_paths, variation_path
from .attacks import draw_counts, truncated_mean

POLICIES = ("thompson_hedge", "hedge_lambda", "rexp3")
HEDGE_CONSTANT = 8 + 2 * math.sqrt(2)


class BudgetExceeded(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Regret functionals and bounds

def oracle_node(mu, costs_t):
    """Index maximizing mu_i * c_i; the lowest index wins ties."""
    return int(np.argmax(np.asarray(mu) * np.asarray(costs_t)))


@dataclass(frozen=True)
class TrialRecord:
    chosen: np.ndarray
    rewards: np.ndarray          # mu[i_t] * c[t, i_t]
    oracle_rewards: np.ndarray   # mu[i*_t] * c[t, i*_t]

    @property
    def regret_path(self):
        return np.cumsum(self.oracle_rewards - self.rewards)


def make_trial(mu, costs, chosen):
    """Build a TrialRecord from true means, a (T, N) cost matrix and choices."""
    mu = np.asarray(mu, dtype=float)
    costs = np.asarray(costs, dtype=float)
    chosen = np.asarray(chosen, dtype=int)
    value = costs * mu
    rewards = value[np.arange(len(chosen)), chosen]
    return TrialRecord(chosen, rewards, value.max(axis=1))


def trial_regret(trial: TrialRecord) -> float:
    return float(np.sum(trial.oracle_rewards) - np.sum(trial.rewards))


def hedge_bound(m, variation, n_nodes, horizon):
    """(8 + 2 sqrt 2) (m V_T ln N)^(1/3) T^(2/3); vectorized over V and T."""
    v = np.asarray(variation, dtype=float)
    if np.any(v < 0) or n_nodes < 2:
        raise ValueError("need V_T >= 0 and N >= 2")
    out = HEDGE_CONSTANT * np.cbrt(m * v * math.log(n_nodes)) * np.asarray(horizon, float) ** (2 / 3)
    return float(out) if out.ndim == 0 else out


def per_batch_bound(delta, n_nodes):
    return 2 * math.sqrt(2) * np.sqrt(np.asarray(delta, float) * math.log(n_nodes))


def rexp3_bound_reference(m, variation, n_nodes, horizon):
    """Order-only reference curve (m V_T N ln N)^(1/3) T^(2/3), unit constant.

    Not a guarantee; used for plotting against the Hedge bound.
    """
    v = np.asarray(variation, dtype=float)
    out = np.cbrt(m * v * n_nodes * math.log(n_nodes)) * np.asarray(horizon, float) ** (2 / 3)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Policy runners over a block of trials

class _HedgeRunner:
    def __init__(self, lam, m, horizon, variation, rng, update_cost, tune):
        trials, n = lam.shape
        delta = pol.hedge_batch_size(horizon, m, variation, n)
        self.state = pol.init_hedge(n, horizon, delta, trials, tune)
        self.mu = truncated_mean(lam, m)
        self.m, self.rng, self.update_cost = m, rng, update_cost
        self.batch_size = delta

    def probs(self):
        return self.state.probs

    def choose(self, probs):
        return pol.draw_from(probs, self.rng)

    def observe(self, chosen, counts, costs_t, reward):
        self.state = pol.hedge_update(self.state, self.mu, costs_t, self.m,
                                      self.update_cost, chosen)


class _ThompsonHedgeRunner:
    def __init__(self, alpha, beta, m, horizon, variation, rng, post_rng, update_cost, tune):
        trials, n = alpha.shape
        delta = pol.hedge_batch_size(horizon, m, variation, n)
        self.state = pol.init_thompson_hedge(alpha, beta, m, horizon, delta, trials, tune)
        self.rng, self.post_rng, self.update_cost = rng, post_rng, update_cost
        self.batch_size = delta

    def probs(self):
        return self.state.base.probs

    def choose(self, probs):
        return pol.draw_from(probs, self.rng)

    def observe(self, chosen, counts, costs_t, reward):
        k = np.take_along_axis(counts, chosen[:, None], axis=1)[:, 0]
        outcome = pol.StepOutcome(chosen, k, costs_t)
        self.state = pol.thompson_hedge_update(self.state, outcome, self.post_rng,
                                               self.update_cost)


class _REXP3Runner:
    def __init__(self, n, m, horizon, variation, rng):
        trials = len(variation)
        delta = pol.rexp3_batch_size(horizon, m, variation, n)
        self.state = pol.init_rexp3(n, delta, trials=trials)
        self.rng = rng
        self.batch_size = delta

    def probs(self):
        return self.state.probs

    def choose(self, probs):
        node = pol.draw_from(probs, self.rng)
        self.state = replace(self.state, last_node=node, last_probs=probs)
        return node

    def observe(self, chosen, counts, costs_t, reward):
        self.state = pol.rexp3_update(self.state, reward)


def _stream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def policy_key(name):
    """Stable integer key so each policy's stream ignores the roster."""
    return zlib.crc32(name.encode())


@dataclass
class BlockResult:
    """Per-step regret increments for each policy, shape (T, trials)."""

    increments: dict
    batch_sizes: dict
    batch_excess: dict = field(default_factory=dict)
    chosen: dict = field(default_factory=dict)


def simulate_block(lam, costs, m, roster, seed, block_key=(0,), prior=None,
                   update_cost="own", estimator="expected", batch_check=(),
                   record_choices=False, epsilon_tuning="batch"):
    """Run every policy in ``roster`` on identical attack counts and costs.

    lam : (trials, N) true attack rates.
    costs : (T, trials, N) cost paths.
    prior : (alpha, beta) arrays broadcastable to (trials, N), for Thompson-Hedge.
    estimator : "expected" charges each step the selection-probability-weighted
        mean reward sum_i p_i mu_i c_i; "realized" charges mu[i_t] c[t, i_t].
    batch_check : policies for which per-batch regret against the batch's best
        single node is returned (minus the per-batch bound).
    """
    T, trials, n = costs.shape
    mu = truncated_mean(lam, m)
    variation = variation_path(costs)[-1]
    variation = np.maximum(variation, np.finfo(float).tiny)
    runners = {}
    for name in roster:
        rng = _stream(seed, *block_key, policy_key(name))
        if name == "hedge_lambda":
            runners[name] = _HedgeRunner(lam, m, T, variation, rng, update_cost,
                                             epsilon_tuning)
        elif name == "thompson_hedge":
            alpha, beta = (np.broadcast_to(x, lam.shape) for x in prior)
            post = _stream(seed, *block_key, policy_key(name), 1)
            runners[name] = _ThompsonHedgeRunner(alpha, beta, m, T, variation, rng,
                                                 post, update_cost, epsilon_tuning)
        elif name == "rexp3":
            runners[name] = _REXP3Runner(n, m, T, variation, rng)
        else:
            raise ValueError(f"unknown policy {name!r}")
    count_rng = _stream(seed, *block_key, 7)
    inc = {name: np.empty((T, trials)) for name in roster}
    expected = {name: np.empty((T, trials)) for name in batch_check}
    chosen_log = {name: np.empty((T, trials), dtype=np.int16) for name in roster} if record_choices else {}
    rows = np.arange(trials)
    for t in range(T):
        c_t = costs[t]
        value = mu * c_t
        best = value.max(axis=1)
        counts = draw_counts(lam, m, count_rng)
        for name, runner in runners.items():
            p = runner.probs()
            node = runner.choose(p)
            mean_reward = (p * value).sum(axis=1)
            if estimator == "expected":
                inc[name][t] = best - mean_reward
            else:
                inc[name][t] = best - value[rows, node]
            if name in expected:
                expected[name][t] = mean_reward
            if record_choices:
                chosen_log[name][t] = node
            reward = counts[rows, node] * c_t[rows, node]
            runner.observe(node, counts, c_t, reward)
    result = BlockResult(inc, {k: r.batch_size for k, r in runners.items()}, chosen=chosen_log)
    for name in batch_check:
        result.batch_excess[name] = _batch_excess(mu, costs, expected[name],
                                                  runners[name].batch_size, n)
    return result


def _batch_excess(mu, costs, expected, batch_size, n):
    """Per trial, the largest (batch regret vs best single node - bound)."""
    T, trials, _ = costs.shape
    value = costs * mu[None]
    out = np.empty(trials)
    sizes = np.broadcast_to(batch_size, (trials,))
    for j in range(trials):
        starts = np.arange(0, T, sizes[j])
        best_single = np.add.reduceat(value[:, j, :], starts, axis=0).max(axis=1)
        got = np.add.reduceat(expected[:, j], starts)
        out[j] = np.max(best_single - got - per_batch_bound(sizes[j], n))
    return out


# ---------------------------------------------------------------------------
# Experiment driver

@dataclass
class ExperimentConfig:
    n_nodes: int = 10
    horizon: int = 2000
    m: int = 3
    alpha: float | list = 2.0
    beta: float | list = 2.0
    step_scale: float | None = None     # defaults to 1 / (100 m)
    q_trials: int = 200
    l_trials: int = 50
    policies: tuple = ("thompson_hedge", "rexp3")
    seed: int = 0
    update_cost: str = "own"
    estimator: str = "expected"
    epsilon_tuning: str = "batch"
    chunk_q: int = 10
    max_cells: float = 5e9
    threads: int = 1

    def __post_init__(self):
        if self.step_scale is None:
            self.step_scale = 1.0 / (100 * self.m)
        self.policies = tuple(self.policies)
        self.validate()

    def prior_arrays(self):
        a = np.broadcast_to(np.asarray(self.alpha, float), (self.n_nodes,)).copy()
        b = np.broadcast_to(np.asarray(self.beta, float), (self.n_nodes,)).copy()
        return a, b

    def validate(self):
        if self.n_nodes < 2:
            raise ValueError("n_nodes must be >= 2")
        if self.q_trials < 1 or self.l_trials < 1:
            raise ValueError("q_trials and l_trials must be >= 1")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.horizon < 2:
            raise ValueError("horizon must be >= 2")
        pol.hedge_epsilon(self.n_nodes, self.horizon)
        a, b = self.prior_arrays()
        if np.any(a <= 0) or np.any(b <= 0):
            raise ValueError("prior parameters must be positive")
        for name in self.policies:
            if name not in POLICIES:
                raise ValueError(f"unknown policy {name!r}; choose from {POLICIES}")
        if not self.policies:
            raise ValueError("empty policy roster")
        if self.update_cost not in ("own", "chosen"):
            raise ValueError("update_cost must be 'own' or 'chosen'")
        if self.estimator not in ("expected", "realized"):
            raise ValueError("estimator must be 'expected' or 'realized'")
        if not (0 < self.step_scale <= 1.0 / self.m):
            raise ValueError("step_scale must lie in (0, 1/m]")
        if self.epsilon_tuning not in ("horizon", "batch"):
            raise ValueError("epsilon_tuning must be 'horizon' or 'batch'")
        if self.chunk_q < 1:
            raise ValueError("chunk_q must be >= 1")


@dataclass
class RegretSummary:
    t: np.ndarray
    regret: dict          # policy -> R_hat(t)
    stderr: dict          # policy -> standard error over the outer draws
    bound: dict           # policy -> bound curve (Hedge bound, or order reference)
    variation: np.ndarray  # mean realized V_t across all episodes
    meta: dict

    def bound_violations(self, policy, t_min=None):
        """Times t >= t_min where R_hat(t) exceeds the Hedge bound."""
        if t_min is None:
            t_min = self.meta["t0"]
        bound = hedge_bound(self.meta["config"]["m"], self.variation,
                            self.meta["config"]["n_nodes"], self.t)
        mask = (self.t >= t_min) & (self.regret[policy] > bound)
        return self.t[mask]


def _run_chunk(config: ExperimentConfig, chunk, q_range, batch_check):
    n, T, m, L = config.n_nodes, config.horizon, config.m, config.l_trials
    q0, q1 = q_range
    alpha, beta = config.prior_arrays()
    lam_rng = _stream(config.seed, chunk, 1)
    lam_q = lam_rng.gamma(alpha, 1.0 / beta, size=(q1 - q0, n))
    lam = np.repeat(lam_q, L, axis=0)
    trials = lam.shape[0]
    costs = draw_cost_paths(trials, n, T, m, config.step_scale, _stream(config.seed, chunk, 2))
    block = simulate_block(lam, costs, m, config.policies, config.seed, (chunk, 3),
                           prior=(alpha, beta), update_cost=config.update_cost,
                           estimator=config.estimator, batch_check=batch_check,
                           epsilon_tuning=config.epsilon_tuning)
    vpath = variation_path(costs)                     # (T, trials)
    sup = {}
    for name, inc in block.increments.items():
        paths = np.cumsum(inc, axis=0).reshape(T, q1 - q0, L)
        sup[name] = paths.max(axis=2)                 # (T, q)
    return {
        "sup": sup,
        "v_sum": vpath.sum(axis=1),
        "v_final": vpath[-1],
        "batch_excess": block.batch_excess,
        "batch_sizes": {k: np.broadcast_to(v, (trials,)) for k, v in block.batch_sizes.items()},
    }


def run_experiment(config: ExperimentConfig, batch_check=(), progress=None) -> RegretSummary:
    cells = config.q_trials * config.l_trials * config.horizon * config.n_nodes * len(config.policies)
    if cells > config.max_cells:
        raise BudgetExceeded(f"{cells:.3g} policy-steps exceed the budget of {config.max_cells:.3g}")
    started = time.time()
    T = config.horizon
    chunks = [(c, (q0, min(q0 + config.chunk_q, config.q_trials)))
              for c, q0 in enumerate(range(0, config.q_trials, config.chunk_q))]
    batch_check = tuple(p for p in batch_check if p in config.policies)
    if config.threads > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(config.threads) as ex:
            parts = list(ex.map(_run_chunk, [config] * len(chunks),
                                [c for c, _ in chunks], [r for _, r in chunks],
                                [batch_check] * len(chunks)))
    else:
        parts = []
        for c, r in chunks:
            parts.append(_run_chunk(config, c, r, batch_check))
            if progress:
                progress(len(parts), len(chunks))
    Q = config.q_trials
    t = np.arange(1, T + 1)
    v_mean = sum(p["v_sum"] for p in parts) / (Q * config.l_trials)
    v_final = np.concatenate([p["v_final"] for p in parts])
    regret, stderr, bound = {}, {}, {}
    for name in config.policies:
        sups = np.concatenate([p["sup"][name] for p in parts], axis=1)   # (T, Q)
        regret[name] = sups.mean(axis=1)
        stderr[name] = sups.std(axis=1, ddof=1) / math.sqrt(Q) if Q > 1 else np.zeros(T)
        if name == "rexp3":
            bound[name] = rexp3_bound_reference(config.m, v_mean, config.n_nodes, t)
        else:
            bound[name] = hedge_bound(config.m, v_mean, config.n_nodes, t)
    t0 = int(np.argmax(v_mean >= 1.0 / config.m)) + 1 if np.any(v_mean >= 1.0 / config.m) else None
    meta = {
        "config": asdict(config),
        "master_seed": config.seed,
        "t0": t0,
        "realized_variation": {
            "mean": float(v_final.mean()), "min": float(v_final.min()),
            "max": float(v_final.max()), "std": float(v_final.std()),
        },
        "bound_kind": {p: ("order reference" if p == "rexp3" else "hedge bound")
                       for p in config.policies},
        "sup_estimate": "max over sampled cost sequences (empirical lower bound on the sup)",
        "batch_size": {p: {"min": int(np.min(np.concatenate([x["batch_sizes"][p] for x in parts]))),
                           "max": int(np.max(np.concatenate([x["batch_sizes"][p] for x in parts])))}
                       for p in config.policies},
        "wall_clock_s": time.time() - started,
    }
    if batch_check:
        meta["batch_excess"] = {
            p: float(max(x["batch_excess"][p].max() for x in parts)) for p in batch_check}
    return RegretSummary(t, regret, stderr, bound, v_mean, meta)


def write_summary_csv(path, summary: RegretSummary):
    with open(path, "w") as fh:
        fh.write("t,policy,bayesian_sup_regret,stderr,bound\n")
        for name in summary.regret:
            r, s, b = summary.regret[name], summary.stderr[name], summary.bound[name]
            for i, t in enumerate(summary.t):
                fh.write(f"{t},{name},{r[i]:.17g},{s[i]:.17g},{b[i]:.17g}\n")


def summary_metadata(summary: RegretSummary, include_clock=True):
    meta = dict(summary.meta)
    if not include_clock:
        meta.pop("wall_clock_s", None)
    return meta
