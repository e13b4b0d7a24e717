"""Linear DC optimal power flow and node-outage attack costs.

Variables, in order: dispatch per source, shed per node, angle per
non-reference node, then (f+, f-) per in-service feeder.  The split
f+ - f- = B (d_a - d_b) carries the feeder flow from ``a`` to ``b`` and lets
the absolute flow enter the objective linearly as Cf (f+ + f-).
"""
from __future__ import annotations

from dataclasses import dataclass
import json
import warnings

import numpy as np

from ..adversary import CostMatrix, write_costs_csv
from .grid import ESS, GridModel, GridState, components
from .simplex import LPError, Unbounded, linprog


class ModelError(RuntimeError):
    """The OPF model is ill-posed (e.g. its LP is unbounded)."""


@dataclass(frozen=True)
class LinearProgram:
    c: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    bounds: list
    n_sources: int
    n_nodes: int
    angle_nodes: np.ndarray     # node index of each angle variable
    feeders: np.ndarray         # indices of in-service feeders
    grid: GridModel
    outage: int | None

    @property
    def shed_slice(self):
        return slice(self.n_sources, self.n_sources + self.n_nodes)

    @property
    def angle_slice(self):
        start = self.n_sources + self.n_nodes
        return slice(start, start + len(self.angle_nodes))

    @property
    def split_slice(self):
        start = self.n_sources + self.n_nodes + len(self.angle_nodes)
        return slice(start, start + 2 * len(self.feeders))


@dataclass(frozen=True)
class OPFSolution:
    dispatch: np.ndarray
    shed: np.ndarray
    angles: np.ndarray
    flows: np.ndarray        # per feeder of the grid; zero when out of service
    split: np.ndarray        # (f+, f-) per in-service feeder
    objective: float
    residual: np.ndarray     # nodal balance residual, kW


def ess_limit(grid: GridModel, source, soc):
    """Charge/discharge power limit min((1 - soc) C_ess / T_s, rated)."""
    return min((1.0 - soc) * grid.ess_capacity / grid.step_hours, source.rated_kw)


def build_lp(grid: GridModel, state: GridState, outage_node=None) -> LinearProgram:
    state.validate(grid)
    n, S = grid.n_nodes, len(grid.sources)
    if outage_node is not None and not 0 <= outage_node < n:
        raise ValueError(f"outage node {outage_node} out of range")
    live = [k for k, f in enumerate(grid.feeders)
            if outage_node is None or outage_node not in (f.a, f.b)]
    edges = [(grid.feeders[k].a, grid.feeders[k].b) for k in live]
    refs = {comp[0] for comp in components(n, edges)}
    angle_nodes = np.array([i for i in range(n) if i not in refs], dtype=int)
    angle_col = {int(i): S + n + j for j, i in enumerate(angle_nodes)}
    nv = S + n + len(angle_nodes) + 2 * len(live)

    c = np.zeros(nv)
    bounds = []
    for s in grid.sources:
        c[len(bounds)] = s.cost - state.price
        if s.node == outage_node:
            bounds.append((0.0, 0.0))
        elif s.kind == ESS:
            lim = ess_limit(grid, s, state.ess_soc[s.node])
            bounds.append((-lim, lim))
        else:
            bounds.append((0.0, float(state.available[len(bounds)])))
    for i in range(n):
        c[S + i] = grid.penalty + state.price
        load = float(state.loads[i])
        bounds.append((load, load) if i == outage_node else (0.0, load))
    bounds += [(None, None)] * len(angle_nodes)
    caps = grid.line_capacity()
    split0 = S + n + len(angle_nodes)
    for j, k in enumerate(live):
        c[split0 + 2 * j] = c[split0 + 2 * j + 1] = grid.feeders[k].cost
        bounds += [(0.0, float(caps[k]))] * 2

    A = np.zeros((n + len(live), nv))
    b = np.zeros(n + len(live))
    for col, s in enumerate(grid.sources):
        A[s.node, col] = 1.0
    for i in range(n):
        A[i, S + i] = 1.0
        b[i] = state.loads[i]
    for j, k in enumerate(live):
        f = grid.feeders[k]
        fp, fm = split0 + 2 * j, split0 + 2 * j + 1
        # outflow at a, inflow at b
        A[f.a, fp], A[f.a, fm] = -1.0, 1.0
        A[f.b, fp], A[f.b, fm] = 1.0, -1.0
        row = n + j
        A[row, fp], A[row, fm] = 1.0, -1.0
        if f.a in angle_col:
            A[row, angle_col[f.a]] = -f.susceptance
        if f.b in angle_col:
            A[row, angle_col[f.b]] = f.susceptance
    return LinearProgram(c, A, b, bounds, S, n, angle_nodes, np.array(live, dtype=int),
                         grid, outage_node)


def solve_lp(lp: LinearProgram) -> OPFSolution:
    try:
        res = linprog(lp.c, A_eq=lp.A_eq, b_eq=lp.b_eq, bounds=lp.bounds)
    except Unbounded as exc:
        raise ModelError(f"OPF is unbounded: {exc}") from None
    except LPError as exc:
        raise ModelError(str(exc)) from None
    x = res.x
    grid = lp.grid
    n = lp.n_nodes
    angles = np.zeros(n)
    angles[lp.angle_nodes] = x[lp.angle_slice]
    split = x[lp.split_slice].reshape(-1, 2)
    flows = np.zeros(len(grid.feeders))
    for j, k in enumerate(lp.feeders):
        f = grid.feeders[k]
        flows[k] = f.susceptance * (angles[f.a] - angles[f.b])
    dispatch = x[:lp.n_sources]
    shed = x[lp.shed_slice]
    return OPFSolution(dispatch, shed, angles, flows, split, res.fun,
                       balance_residual(grid, dispatch, shed, flows, lp.b_eq[:n]))


def balance_residual(grid: GridModel, dispatch, shed, flows, loads):
    """P + shed - outflow - load at each node; zero for a feasible point."""
    r = -np.asarray(loads, dtype=float) + shed
    for col, s in enumerate(grid.sources):
        r[s.node] += dispatch[col]
    for k, f in enumerate(grid.feeders):
        r[f.a] -= flows[k]
        r[f.b] += flows[k]
    return r


def operation_cost(grid: GridModel, state: GridState, outage_node=None) -> float:
    return solve_lp(build_lp(grid, state, outage_node)).objective


def attack_cost(grid: GridModel, state: GridState, node) -> float:
    return abs(operation_cost(grid, state) - operation_cost(grid, state, node))


def raw_attack_costs(grid: GridModel, states):
    """Unnormalized attack costs, shape (T, N)."""
    out = np.empty((len(states), grid.n_nodes))
    for t, st in enumerate(states):
        intact = operation_cost(grid, st)
        for i in range(grid.n_nodes):
            out[t, i] = abs(intact - operation_cost(grid, st, i))
    return out


def normalize_costs(raw, m):
    """Scale into [0, 1/m] by m times the global maximum; returns (costs, constant)."""
    raw = np.asarray(raw, dtype=float)
    top = float(raw.max()) if raw.size else 0.0
    if top <= 0:
        warnings.warn("all attack costs are zero; normalization skipped")
        return raw.copy(), 1.0
    const = m * top
    return np.minimum(raw / const, 1.0 / m), const


def cost_timeseries(grid: GridModel, states, m) -> CostMatrix:
    if not states:
        raise ValueError("need at least one grid state")
    raw = raw_attack_costs(grid, states)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        costs, const = normalize_costs(raw, m)
    meta = {"normalization": const, "m": m,
            "timestamps": [st.timestamp for st in states]}
    if caught:
        meta["warning"] = str(caught[0].message)
        warnings.warn(meta["warning"])
    return CostMatrix(costs, m, meta=meta)


def write_cost_output(path, cm: CostMatrix):
    """CostMatrix CSV plus a ``.meta.json`` sidecar with the normalization."""
    write_costs_csv(path, cm)
    side = {"m": cm.m, "normalization": cm.meta.get("normalization", 1.0),
            "steps": cm.horizon, "nodes": cm.n_nodes}
    if "warning" in cm.meta:
        side["warning"] = cm.meta["warning"]
    with open(f"{path}.meta.json", "w") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)
