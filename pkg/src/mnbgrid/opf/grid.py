"""Distribution-grid data: topology, operating snapshots and their CSV files.

Topology file: one CSV with bracketed section markers::

    [nodes]
    node_id,name
    [feeders]
    from,to,susceptance,ampacity,feeder_cost
    [sources]
    node_id,type,rated_kw,variable_cost
    [scalars]
    key,value          # V, Cp, ess_capacity, step_hours

Time-series file: ``timestamp,node,load_kw,avail_<type>...,price,ess_soc``
with one row per (timestamp, node).  A source type without an ``avail_``
column is treated as dispatchable up to its rating.  Sources of type ``ess``
take their limit from the rating and the state of charge instead.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
import io

import numpy as np

ESS = "ess"
SECTIONS = {
    "nodes": ["node_id", "name"],
    "feeders": ["from", "to", "susceptance", "ampacity", "feeder_cost"],
    "sources": ["node_id", "type", "rated_kw", "variable_cost"],
    "scalars": ["key", "value"],
}
SCALARS = ("V", "Cp", "ess_capacity", "step_hours")


class GridFileError(ValueError):
    pass


@dataclass(frozen=True)
class Feeder:
    a: int                # 0-based node indices
    b: int
    susceptance: float
    ampacity: float
    cost: float


@dataclass(frozen=True)
class Source:
    node: int
    kind: str
    rated_kw: float
    cost: float


@dataclass(frozen=True)
class GridModel:
    names: tuple
    feeders: tuple
    sources: tuple
    voltage_kv: float
    penalty: float
    ess_capacity: float = 0.0
    step_hours: float = 0.25

    def __post_init__(self):
        n = len(self.names)
        if n < 2:
            raise GridFileError("a grid needs at least two nodes")
        for f in self.feeders:
            if not (0 <= f.a < n and 0 <= f.b < n) or f.a == f.b:
                raise GridFileError(f"feeder ({f.a + 1}, {f.b + 1}) has a bad endpoint")
            if f.susceptance <= 0 or f.ampacity <= 0:
                raise GridFileError(f"feeder ({f.a + 1}, {f.b + 1}) needs positive susceptance and ampacity")
            if f.cost < 0:
                raise GridFileError(f"feeder ({f.a + 1}, {f.b + 1}) has negative cost")
        for s in self.sources:
            if not 0 <= s.node < n:
                raise GridFileError(f"source at unknown node {s.node + 1}")
            if s.rated_kw < 0:
                raise GridFileError(f"source at node {s.node + 1} has negative rating")
        for key in ("voltage_kv", "penalty", "ess_capacity", "step_hours"):
            if getattr(self, key) < 0:
                raise GridFileError(f"{key} must be nonnegative")
        if self.step_hours <= 0:
            raise GridFileError("step_hours must be positive")
        if not is_connected(n, [(f.a, f.b) for f in self.feeders]):
            raise GridFileError("feeder graph is not connected")

    @property
    def n_nodes(self):
        return len(self.names)

    @property
    def source_types(self):
        return sorted({s.kind for s in self.sources})

    def line_capacity(self):
        return np.array([self.voltage_kv * f.ampacity for f in self.feeders])


@dataclass(frozen=True)
class GridState:
    loads: np.ndarray          # kW per node
    available: np.ndarray      # kW per source (ignored for ESS sources)
    price: float
    ess_soc: np.ndarray        # per node, in [0, 1]
    timestamp: str = ""

    def validate(self, grid: GridModel):
        n = grid.n_nodes
        if self.loads.shape != (n,) or self.ess_soc.shape != (n,):
            raise GridFileError("state vectors do not match the node count")
        if self.available.shape != (len(grid.sources),):
            raise GridFileError("availability vector does not match the source count")
        if np.any(self.loads < 0):
            raise GridFileError(f"{self.timestamp}: negative load")
        if np.any((self.ess_soc < 0) | (self.ess_soc > 1)):
            raise GridFileError(f"{self.timestamp}: state of charge outside [0, 1]")
        rated = np.array([s.rated_kw for s in grid.sources])
        if np.any(self.available < 0) or np.any(self.available > rated + 1e-9):
            raise GridFileError(f"{self.timestamp}: availability outside [0, rated power]")


def components(n, edges):
    """Connected components as a list of sorted node lists."""
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values())


def is_connected(n, edges):
    return len(components(n, edges)) == 1


# ---------------------------------------------------------------------------
# Topology file

def _read_sections(text, origin):
    sections = {}
    current = None
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        head = row[0].strip()
        if head.startswith("[") and head.endswith("]"):
            current = head[1:-1].strip().lower()
            if current not in SECTIONS:
                raise GridFileError(f"{origin}:{lineno}: unknown section [{current}]")
            sections[current] = {"header": None, "rows": []}
            continue
        if current is None:
            raise GridFileError(f"{origin}:{lineno}: data before any section marker")
        cells = [c.strip() for c in row]
        sec = sections[current]
        if sec["header"] is None:
            missing = [c for c in SECTIONS[current] if c not in cells]
            if missing:
                raise GridFileError(
                    f"{origin}:{lineno}: section [{current}] is missing column {missing[0]!r}")
            sec["header"] = cells
        else:
            if len(cells) != len(sec["header"]):
                raise GridFileError(f"{origin}:{lineno}: expected {len(sec['header'])} fields")
            sec["rows"].append((lineno, dict(zip(sec["header"], cells))))
    for name in SECTIONS:
        if name not in sections:
            raise GridFileError(f"{origin}: missing section [{name}]")
    return sections


def _num(value, origin, lineno, column):
    try:
        return float(value)
    except ValueError:
        raise GridFileError(f"{origin}:{lineno}: column {column!r} is not a number: {value!r}") from None


def parse_grid(text, origin="<grid>") -> GridModel:
    sec = _read_sections(text, origin)
    ids = []
    names = []
    for lineno, r in sec["nodes"]["rows"]:
        ids.append(int(_num(r["node_id"], origin, lineno, "node_id")))
        names.append(r["name"])
    if sorted(ids) != list(range(1, len(ids) + 1)):
        raise GridFileError(f"{origin}: node ids must be 1..N")
    order = np.argsort(ids)
    names = tuple(names[i] for i in order)

    def node(value, lineno, column):
        k = int(_num(value, origin, lineno, column))
        if not 1 <= k <= len(ids):
            raise GridFileError(f"{origin}:{lineno}: unknown node {k}")
        return k - 1

    feeders = []
    for lineno, r in sec["feeders"]["rows"]:
        feeders.append(Feeder(node(r["from"], lineno, "from"), node(r["to"], lineno, "to"),
                              _num(r["susceptance"], origin, lineno, "susceptance"),
                              _num(r["ampacity"], origin, lineno, "ampacity"),
                              _num(r["feeder_cost"], origin, lineno, "feeder_cost")))
    sources = []
    for lineno, r in sec["sources"]["rows"]:
        sources.append(Source(node(r["node_id"], lineno, "node_id"), r["type"].lower(),
                              _num(r["rated_kw"], origin, lineno, "rated_kw"),
                              _num(r["variable_cost"], origin, lineno, "variable_cost")))
    scalars = {}
    for lineno, r in sec["scalars"]["rows"]:
        if r["key"] not in SCALARS:
            raise GridFileError(f"{origin}:{lineno}: unknown scalar {r['key']!r}")
        scalars[r["key"]] = _num(r["value"], origin, lineno, "value")
    for key in ("V", "Cp"):
        if key not in scalars:
            raise GridFileError(f"{origin}: scalar {key!r} is required")
    try:
        return GridModel(names, tuple(feeders), tuple(sources), scalars["V"], scalars["Cp"],
                         scalars.get("ess_capacity", 0.0), scalars.get("step_hours", 0.25))
    except GridFileError as exc:
        raise GridFileError(f"{origin}: {exc}") from None


def load_grid(path) -> GridModel:
    with open(path) as fh:
        return parse_grid(fh.read(), str(path))


def bundled_grid() -> GridModel:
    """Synthetic 11-node radial feeder shipped with the package.

    Parameter values are representative, not taken from any utility.
    """
    text = resources.files("mnbgrid.data").joinpath("radial11.csv").read_text()
    return parse_grid(text, "radial11.csv")


def format_grid(grid: GridModel) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["[nodes]"])
    w.writerow(SECTIONS["nodes"])
    for i, name in enumerate(grid.names, start=1):
        w.writerow([i, name])
    w.writerow(["[feeders]"])
    w.writerow(SECTIONS["feeders"])
    for f in grid.feeders:
        w.writerow([f.a + 1, f.b + 1, repr(f.susceptance), repr(f.ampacity), repr(f.cost)])
    w.writerow(["[sources]"])
    w.writerow(SECTIONS["sources"])
    for s in grid.sources:
        w.writerow([s.node + 1, s.kind, repr(s.rated_kw), repr(s.cost)])
    w.writerow(["[scalars]"])
    w.writerow(SECTIONS["scalars"])
    for key, attr in zip(SCALARS, ("voltage_kv", "penalty", "ess_capacity", "step_hours")):
        w.writerow([key, repr(getattr(grid, attr))])
    return out.getvalue()


# ---------------------------------------------------------------------------
# Time-series file

def parse_states(text, grid: GridModel, origin="<states>"):
    reader = csv.reader(io.StringIO(text))
    try:
        header = [c.strip() for c in next(reader)]
    except StopIteration:
        raise GridFileError(f"{origin}: empty file") from None
    for col in ("timestamp", "node", "load_kw", "price", "ess_soc"):
        if col not in header:
            raise GridFileError(f"{origin}:1: missing column {col!r}")
    avail_cols = {c[len("avail_"):].lower(): c for c in header if c.startswith("avail_")}
    n = grid.n_nodes
    rated = np.array([s.rated_kw for s in grid.sources])
    by_time = {}
    order = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise GridFileError(f"{origin}:{lineno}: expected {len(header)} fields, got {len(row)}")
        r = dict(zip(header, (c.strip() for c in row)))
        ts = r["timestamp"]
        node = int(_num(r["node"], origin, lineno, "node"))
        if not 1 <= node <= n:
            raise GridFileError(f"{origin}:{lineno}: unknown node {node}")
        if ts not in by_time:
            by_time[ts] = {"loads": np.full(n, np.nan), "soc": np.full(n, np.nan),
                           "avail": rated.copy(), "price": None, "seen": set()}
            order.append(ts)
        slot = by_time[ts]
        if node in slot["seen"]:
            raise GridFileError(f"{origin}:{lineno}: duplicate row for node {node} at {ts}")
        slot["seen"].add(node)
        load = _num(r["load_kw"], origin, lineno, "load_kw")
        if load < 0:
            raise GridFileError(f"{origin}:{lineno}: negative load {load}")
        soc = _num(r["ess_soc"], origin, lineno, "ess_soc")
        if not 0 <= soc <= 1:
            raise GridFileError(f"{origin}:{lineno}: ess_soc {soc} outside [0, 1]")
        price = _num(r["price"], origin, lineno, "price")
        if slot["price"] is None:
            slot["price"] = price
        elif slot["price"] != price:
            raise GridFileError(f"{origin}:{lineno}: price differs between nodes at {ts}")
        slot["loads"][node - 1] = load
        slot["soc"][node - 1] = soc
        for k, s in enumerate(grid.sources):
            if s.node == node - 1 and s.kind != ESS and s.kind in avail_cols:
                a = _num(r[avail_cols[s.kind]], origin, lineno, avail_cols[s.kind])
                if a < 0 or a > s.rated_kw + 1e-9:
                    raise GridFileError(
                        f"{origin}:{lineno}: {avail_cols[s.kind]}={a} outside [0, {s.rated_kw}]")
                slot["avail"][k] = a
    states = []
    for ts in order:
        slot = by_time[ts]
        if len(slot["seen"]) != n:
            missing = sorted(set(range(1, n + 1)) - slot["seen"])
            raise GridFileError(f"{origin}: timestamp {ts} lacks rows for nodes {missing}")
        states.append(GridState(slot["loads"], slot["avail"], slot["price"], slot["soc"], ts))
    if not states:
        raise GridFileError(f"{origin}: no data rows")
    return states


def load_states(path, grid: GridModel):
    with open(path) as fh:
        return parse_states(fh.read(), grid, str(path))


def format_states(states, grid: GridModel) -> str:
    kinds = [k for k in grid.source_types if k != ESS]
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["timestamp", "node", "load_kw"] + [f"avail_{k}" for k in kinds] + ["price", "ess_soc"])
    for st in states:
        for i in range(grid.n_nodes):
            avail = []
            for k in kinds:
                vals = [st.available[j] for j, s in enumerate(grid.sources) if s.node == i and s.kind == k]
                avail.append(repr(float(vals[0])) if vals else "0")
            w.writerow([st.timestamp, i + 1, repr(float(st.loads[i]))] + avail
                       + [repr(float(st.price)), repr(float(st.ess_soc[i]))])
    return out.getvalue()


def synthetic_states(grid: GridModel, steps=672, seed=0, start="2024-01-01T00:00"):
    """Smooth synthetic week of 15-minute snapshots.

    Loads follow a daily profile with noise, PV follows daylight, wind is an
    AR(1) process, and the energy price tracks load.
    """
    rng = np.random.default_rng(seed)
    n = grid.n_nodes
    hours = np.arange(steps) * grid.step_hours
    base = rng.uniform(60.0, 260.0, size=n)
    base[0] = 0.0 if any(s.node == 0 for s in grid.sources) else base[0]
    daily = 0.75 + 0.25 * np.sin(2 * np.pi * (hours - 8.0) / 24.0)
    wind = np.empty(steps)
    w = 0.5
    for t in range(steps):
        w = np.clip(0.9 * w + 0.1 * 0.5 + 0.08 * rng.normal(), 0.0, 1.0)
        wind[t] = w
    sun = np.clip(np.sin(np.pi * ((hours % 24.0) - 6.0) / 12.0), 0.0, None)
    cloud = np.clip(0.8 + 0.2 * rng.normal(size=steps), 0.3, 1.0)
    price = 0.08 + 0.03 * np.sin(2 * np.pi * (hours - 9.0) / 24.0) + 0.004 * rng.normal(size=steps)
    soc_wave = 0.5 + 0.35 * np.sin(2 * np.pi * (hours - 14.0) / 24.0)
    start_ts = np.datetime64(start)
    states = []
    for t in range(steps):
        loads = base * daily[t] * (1.0 + 0.04 * rng.normal(size=n))
        avail = []
        for s in grid.sources:
            if s.kind == "pv":
                avail.append(s.rated_kw * sun[t] * cloud[t])
            elif s.kind == "wind":
                avail.append(s.rated_kw * wind[t])
            else:
                avail.append(s.rated_kw)
        soc = np.full(n, np.clip(soc_wave[t], 0.0, 1.0))
        ts = str(start_ts + np.timedelta64(int(round(hours[t] * 60)), "m"))
        states.append(GridState(np.maximum(loads, 0.0), np.array(avail), float(price[t]), soc, ts))
    return states
