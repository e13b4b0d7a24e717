"""Command-line front end: ``mnbgrid <command> [options]``.

Every command writes CSV tables plus a ``.meta.json`` sidecar into
``--out-dir``.  Timing information goes to ``timing.json`` only, so two runs
with the same seed produce byte-identical CSV and metadata files.
"""
from __future__ import annotations

import argparse
import json
import math
from pathlib import Path
import sys
import time
import warnings

import numpy as np

from . import analysis, regret
from .adversary import AssumptionViolation, compute_variation, membership_check, read_costs_csv
from .config import ConfigError, load_config, parse_config
from .opf import dcopf
from .opf.grid import GridFileError, bundled_grid, format_states, load_grid, load_states, synthetic_states

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_VALIDATION, EXIT_CONFIG = 0, 2, 3, 4, 5

EXIT_HELP = """exit codes:
  0  success
  2  usage error (unknown flag, missing argument)
  3  file could not be read or written
  4  input failed validation (bad grid, cost file or parameter)
  5  configuration file error (unknown key, bad value)
"""

PRIORS = {"theta1": (2.0, 2.0), "theta2": (1.0, 4.0)}
SENSITIVITY_DIVISORS = (200, 100, 50, 20)


class CLIError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _dump_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _float(x):
    """JSON-safe float (inf becomes a string)."""
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


class Runner:
    def __init__(self, args):
        self.args = args
        self.out = Path(args.out_dir)
        self.timing = {}

    def prepare(self):
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise CLIError(f"cannot create output directory: {exc}", EXIT_IO) from None

    def overrides(self, **extra):
        a = self.args
        base = {"seed": a.seed, "threads": a.threads}
        base.update(extra)
        return base

    def experiment(self, cfg, tag, batch_check=()):
        started = time.time()
        summary = regret.run_experiment(cfg, batch_check=batch_check)
        self.timing[tag] = time.time() - started
        regret.write_summary_csv(self.out / f"{tag}.csv", summary)
        _dump_json(self.out / f"{tag}.meta.json", regret.summary_metadata(summary, include_clock=False))
        return summary

    def finish(self):
        _dump_json(self.out / "timing.json", {k: round(v, 3) for k, v in self.timing.items()})


def _final_row(summary):
    return [(p, summary.regret[p][-1], summary.stderr[p][-1]) for p in summary.regret]


def _write_table(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(r: Runner):
    a = r.args
    if a.config:
        rc = load_config(a.config, r.overrides())
    else:
        rc = parse_config("", "<defaults>", r.overrides())
    if rc.out_dir is not None and a.out_dir == ".":
        r.out = rc.out_dir
    r.prepare()
    s = r.experiment(rc.experiment, "simulate", batch_check=("hedge_lambda",))
    for p, val, se in _final_row(s):
        print(f"{p:15s} R(T) = {val:10.3f}  (se {se:.3f})")


def _scaled(r, **kw):
    a = r.args
    base = dict(q_trials=a.q, l_trials=a.l, horizon=a.horizon, m=a.m)
    base.update(kw)
    base.update(r.overrides())
    try:
        return regret.ExperimentConfig(**base)
    except ValueError as exc:
        raise CLIError(str(exc), EXIT_VALIDATION) from None


def cmd_compare(r: Runner):
    r.prepare()
    roster = ("thompson_hedge", "hedge_lambda", "rexp3") if r.args.with_hedge else ("thompson_hedge", "rexp3")
    rows = []
    for prior, (al, be) in PRIORS.items():
        for n in (10, 20):
            tag = f"compare_{prior}_n{n}"
            s = r.experiment(_scaled(r, n_nodes=n, alpha=al, beta=be, policies=roster), tag,
                             batch_check=("hedge_lambda",))
            for p, val, se in _final_row(s):
                rows.append((prior, n, p, float(val), float(se)))
                print(f"{prior} N={n:<3d} {p:15s} R(T) = {val:10.3f}  (se {se:.3f})")
    _write_table(r.out / "compare_final.csv", ["prior", "n_nodes", "policy", "regret_T", "stderr_T"], rows)


def cmd_sensitivity(r: Runner):
    r.prepare()
    m = r.args.m
    rows = []
    for prior, (al, be) in PRIORS.items():
        for d in SENSITIVITY_DIVISORS:
            tag = f"sensitivity_{prior}_s{d}m"
            s = r.experiment(_scaled(r, n_nodes=r.args.n, alpha=al, beta=be, step_scale=1.0 / (d * m),
                                     policies=("thompson_hedge",)), tag)
            val, se = s.regret["thompson_hedge"][-1], s.stderr["thompson_hedge"][-1]
            rows.append((prior, f"1/({d}m)", float(1.0 / (d * m)), float(val), float(se)))
            print(f"{prior} step 1/({d}m)  R(T) = {val:10.3f}  (se {se:.3f})")
    _write_table(r.out / "sensitivity_final.csv",
                 ["prior", "step_label", "step_scale", "regret_T", "stderr_T"], rows)


def cmd_opf_costs(r: Runner):
    a = r.args
    r.prepare()
    grid = bundled_grid() if a.grid == "bundled" else load_grid(a.grid)
    if a.states:
        states = load_states(a.states, grid)
    else:
        states = synthetic_states(grid, steps=a.steps, seed=a.seed)
        (r.out / "states.csv").write_text(format_states(states, grid))
    started = time.time()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cm = dcopf.cost_timeseries(grid, states, a.m)
    r.timing["opf-costs"] = time.time() - started
    path = r.out / a.output
    dcopf.write_cost_output(path, cm)
    budget = compute_variation(cm)
    ok = membership_check(cm, budget.total)
    print(f"{cm.horizon} steps x {cm.n_nodes} nodes, normalization {cm.meta['normalization']:.6g}, "
          f"V_T = {budget.total:.6g}, membership {'ok' if ok else 'FAILED'}")
    if "warning" in cm.meta:
        print(f"warning: {cm.meta['warning']}", file=sys.stderr)
    if not ok:
        raise CLIError("cost matrix is outside the feasible set", EXIT_VALIDATION)


def cmd_analyze(r: Runner):
    a = r.args
    r.prepare()
    cm = read_costs_csv(a.costs, a.m)
    rep = analysis.regress_costs(cm)
    try:
        t0 = analysis.estimate_t0(rep, a.m)
    except ValueError:
        t0 = None
    _write_table(r.out / "regression.csv", ["term", "coefficient", "std_error", "t_stat", "p_value"],
                 [(n, float(c), float(s), float(t), float(p)) for n, c, s, t, p in rep.coefficient_rows()])
    with open(r.out / "anova.csv", "w") as fh:
        fh.write("source,df,ss,ms,f,significance\n")
        for name, row in rep.anova_rows():
            cells = [name, str(row.df), f"{row.ss:.17g}"]
            cells += ["" if v is None else f"{v:.17g}" for v in (row.ms, row.f, row.significance)]
            fh.write(",".join(cells) + "\n")
    budget = compute_variation(cm)
    _dump_json(r.out / "analysis.meta.json", {
        "costs": str(a.costs), "m": a.m, "points": rep.n, "t0_fitted": t0,
        "t0_first_crossing": _float(budget.t0), "v_T": budget.total,
        "slope": rep.slope, "intercept": rep.intercept,
        "f": _float(rep.regression.f), "significance": rep.regression.significance,
    })
    print(f"V_t = {rep.intercept:.6g} + {rep.slope:.6g} t   (n = {rep.n})")
    print(f"slope se {rep.se_slope:.4g}, t {rep.t_slope:.4g}, p {rep.p_slope:.3g}")
    print(f"F = {rep.regression.f:.6g}, significance {rep.regression.significance:.3g}")
    print(f"T0 (fitted line) = {t0}, T0 (observed path) = {budget.t0}")


def cmd_bound(r: Runner):
    a = r.args
    rows = []
    for t in a.t:
        hb = regret.hedge_bound(a.m, a.vt, a.n, t)
        ref = regret.rexp3_bound_reference(a.m, a.vt, a.n, t)
        delta = regret.pol.hedge_batch_size(t, a.m, a.vt, a.n)
        rows.append((t, hb, ref, delta, regret.per_batch_bound(delta, a.n)))
    print(f"{'T':>8} {'hedge_bound':>14} {'rexp3_order_ref':>16} {'batch':>6} {'per_batch':>10}")
    for t, hb, ref, d, pb in rows:
        print(f"{t:>8d} {hb:>14.2f} {ref:>16.2f} {d:>6d} {pb:>10.3f}")
    if a.csv:
        r.prepare()
        _write_table(r.out / "bound.csv", ["T", "hedge_bound", "rexp3_order_reference", "batch_size",
                                          "per_batch_bound"],
                     [(t, float(hb), float(ref), int(d), float(pb)) for t, hb, ref, d, pb in rows])


# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(
        prog="mnbgrid", description="Multi-node bandit defence of a distribution grid.",
        epilog=EXIT_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    g.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    g.add_argument("--out-dir", default=".", help="output directory (default .)")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, help_text):
        return sub.add_parser(name, parents=[g], help=help_text, description=help_text,
                              epilog=EXIT_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)

    s = add("simulate", "run one Monte-Carlo experiment from a config file")
    s.add_argument("--config", help="INI config file (defaults are used when omitted)")
    s.set_defaults(func=cmd_simulate)

    def scale_flags(sp, n=None):
        sp.add_argument("--q", type=int, default=200, help="outer prior draws (default 200)")
        sp.add_argument("--l", type=int, default=50, help="inner episodes per draw (default 50)")
        sp.add_argument("--horizon", type=int, default=2000, help="horizon T (default 2000)")
        sp.add_argument("--m", type=int, default=3, help="truncation m (default 3)")
        if n is not None:
            sp.add_argument("--n", type=int, default=n, help=f"node count (default {n})")

    c = add("compare", "Thompson-Hedge vs R.EXP3 for both priors and N in {10, 20}")
    scale_flags(c)
    c.add_argument("--with-hedge", action="store_true", help="also run Hedge fed the true rates")
    c.set_defaults(func=cmd_compare)

    s = add("sensitivity", "Thompson-Hedge regret across four cost step scales")
    scale_flags(s, n=20)
    s.set_defaults(func=cmd_sensitivity)

    o = add("opf-costs", "attack-cost matrix from DC-OPF node outages")
    o.add_argument("--grid", default="bundled", help="topology file, or 'bundled' (default)")
    o.add_argument("--states", help="time-series file; synthetic states are generated when omitted")
    o.add_argument("--steps", type=int, default=672, help="synthetic 15-minute steps (default 672)")
    o.add_argument("--m", type=int, default=3, help="truncation m used to normalize (default 3)")
    o.add_argument("--output", default="costs.csv", help="cost file name inside --out-dir")
    o.set_defaults(func=cmd_opf_costs)

    an = add("analyze", "regress cumulative variation on time and estimate T0")
    an.add_argument("--costs", required=True, help="cost CSV written by opf-costs")
    an.add_argument("--m", type=int, default=3, help="truncation m (default 3)")
    an.set_defaults(func=cmd_analyze)

    b = add("bound", "print regret bound tables")
    b.add_argument("--m", type=int, required=True)
    b.add_argument("--vt", type=float, required=True, help="variation budget V_T")
    b.add_argument("--n", type=int, required=True, help="node count N")
    b.add_argument("--t", type=int, nargs="+", required=True, help="one or more horizons")
    b.add_argument("--csv", action="store_true", help="also write bound.csv into --out-dir")
    b.set_defaults(func=cmd_bound)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    runner = Runner(args)
    try:
        args.func(runner)
        if runner.timing:
            runner.finish()
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GridFileError, AssumptionViolation, dcopf.ModelError, regret.BudgetExceeded,
            ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
