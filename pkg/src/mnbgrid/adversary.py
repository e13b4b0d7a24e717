"""Variation-bounded adversarial cost sequences."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
import math

import numpy as np


class AssumptionViolation(ValueError):
    """Cumulative variation exceeded T/m."""


@dataclass(frozen=True)
class CostMatrix:
    """Costs c[t, i] in [0, 1/m]; rows are time steps, columns nodes."""

    costs: np.ndarray
    m: int
    step_bound: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.asarray(self.costs, dtype=float)
        if c.ndim != 2:
            raise ValueError("cost matrix must be 2-D (time, node)")
        object.__setattr__(self, "costs", c)

    @property
    def horizon(self):
        return self.costs.shape[0]

    @property
    def n_nodes(self):
        return self.costs.shape[1]

    def in_range(self):
        return bool(np.all(self.costs >= 0) and np.all(self.costs <= 1.0 / self.m))


@dataclass(frozen=True)
class VariationBudget:
    v: np.ndarray          # v[T-1] is the cumulative variation up to time T
    step_bound: float
    t0: float              # first T with v_T >= 1/m; inf if never reached

    @property
    def total(self):
        return float(self.v[-1])


def check_step_scale(step_scale, m):
    if not (0 < step_scale <= 1.0 / m):
        raise ValueError(f"step scale must lie in (0, 1/m], got {step_scale}")


def draw_cost_paths(trials, n_nodes, horizon, m, step_scale, rng):
    """Random-walk costs for a block of trials, shape (horizon, trials, n_nodes).

    Each step is uniform on the intersection of (c - s, c + s) and (0, 1/m);
    near the edges the window is simply cut, not reflected.
    """
    check_step_scale(step_scale, m)
    top = 1.0 / m
    out = np.empty((horizon, trials, n_nodes))
    c = rng.uniform(0.0, top, size=(trials, n_nodes))
    out[0] = c
    for t in range(1, horizon):
        lo = np.maximum(c - step_scale, 0.0)
        hi = np.minimum(c + step_scale, top)
        c = lo + (hi - lo) * rng.random((trials, n_nodes))
        out[t] = c
    return out


def generate_costs(n_nodes, horizon, m, step_scale, rng) -> CostMatrix:
    paths = draw_cost_paths(1, n_nodes, horizon, m, step_scale, rng)
    return CostMatrix(paths[:, 0, :], m, step_bound=step_scale)


def step_variation(costs):
    """max_i |c[t+1, i] - c[t, i]| along the time axis (axis 0)."""
    return np.abs(np.diff(costs, axis=0)).max(axis=-1)


def variation_path(costs):
    """Cumulative max-variation, v[0] = 0; works on (T, N) or (T, trials, N)."""
    steps = step_variation(np.asarray(costs))
    zero = np.zeros((1,) + steps.shape[1:])
    return np.concatenate([zero, np.cumsum(steps, axis=0)], axis=0)


def first_crossing(v, m):
    hit = np.nonzero(v >= 1.0 / m)[0]
    return int(hit[0]) + 1 if hit.size else math.inf


def compute_variation(cm: CostMatrix) -> VariationBudget:
    if cm.horizon < 2:
        raise ValueError("variation needs at least two time steps")
    steps = step_variation(cm.costs)
    v = np.concatenate([[0.0], np.cumsum(steps)])
    return VariationBudget(v, float(steps.max()), first_crossing(v, cm.m))


def check_assumption(budget: VariationBudget, m):
    """Raise if v_T > T/m anywhere; return the first-crossing T0."""
    t = np.arange(1, len(budget.v) + 1)
    bad = np.nonzero(budget.v > t / m + 1e-12)[0]
    if bad.size:
        raise AssumptionViolation(
            f"cumulative variation {budget.v[bad[0]]:.6g} exceeds T/m at T={bad[0] + 1}")
    return budget.t0


def membership_check(cm: CostMatrix, budget) -> bool:
    if cm.horizon < 2:
        raise ValueError("membership needs at least two time steps")
    if not cm.in_range():
        return False
    return compute_variation(cm).total <= budget


def batch_variations(cm: CostMatrix, batch_size):
    """Split the cumulative variation at batch boundaries.

    Returns (within, joins): the max-variation accumulated inside each batch
    and the transitions that straddle consecutive batches.  Their sums add up
    to v_T exactly.
    """
    steps = step_variation(cm.costs)
    T = cm.horizon
    starts = np.arange(0, T, batch_size)
    within = np.array([steps[s:min(s + batch_size, T) - 1].sum() for s in starts])
    joins = steps[starts[1:] - 1]
    return within, joins


def write_costs_csv(path, cm: CostMatrix):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"node_{i + 1}" for i in range(cm.n_nodes)])
        for t, row in enumerate(cm.costs, start=1):
            w.writerow([t] + [format(x, ".17g") for x in row])


def read_costs_csv(path, m) -> CostMatrix:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "t":
        raise ValueError(f"{path}: expected header starting with 't'")
    header = rows[0]
    for j, name in enumerate(header[1:], start=1):
        if name != f"node_{j}":
            raise ValueError(f"{path}: column {j + 1} should be node_{j}, got {name!r}")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            data.append([float(x) for x in row[1:]])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    return CostMatrix(np.array(data), m)
