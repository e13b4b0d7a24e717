import json

import numpy as np
import pytest

from mnbgrid import cli
from mnbgrid.config import ConfigError, format_config, parse_config
from mnbgrid.regret import ExperimentConfig

SMALL = """
[experiment]
n_nodes = 4
horizon = 150
q_trials = 4
l_trials = 3
alpha = 2, 2, 1, 1
beta = 2
policies = thompson_hedge, rexp3
"""


def test_parse_config():
    rc = parse_config(SMALL + "[output]\nout_dir = runs\n")
    exp = rc.experiment
    assert exp.n_nodes == 4 and exp.horizon == 150
    assert exp.alpha == [2.0, 2.0, 1.0, 1.0] and exp.beta == 2.0
    assert exp.policies == ("thompson_hedge", "rexp3")
    assert str(rc.out_dir) == "runs"
    assert parse_config(SMALL, overrides={"seed": 9}).experiment.seed == 9


def test_config_round_trip():
    exp = ExperimentConfig(n_nodes=5, alpha=[1.0, 2.0, 3.0, 4.0, 5.0], step_scale=0.002)
    again = parse_config(format_config(exp)).experiment
    assert again == exp


@pytest.mark.parametrize("text, match", [
    ("[experiment]\nn_node = 4\n", "unknown key"),
    ("[experimnt]\nn_nodes = 4\n", "unknown section"),
    ("[experiment]\nn_nodes = four\n", "bad value"),
    ("[experiment]\nq_trials = 0\n", "q_trials"),
    ("n_nodes = 4\n", "config"),
])
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)



def test_bound_command(capsys):
    assert cli.main(["bound", "--m", "3", "--vt", "10", "--n", "10", "--t", "1000"]) == 0
    out = capsys.readouterr().out
    assert "4443.01" in out


def test_exit_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["bound", "--nope"])
    assert exc.value.code == cli.EXIT_USAGE
    assert cli.main(["analyze", "--costs", str(tmp_path / "missing.csv"),
                     "--out-dir", str(tmp_path)]) == cli.EXIT_IO
    bad = tmp_path / "bad.ini"
    bad.write_text("[experiment]\nfoo = 1\n")
    assert cli.main(["simulate", "--config", str(bad), "--out-dir", str(tmp_path)]) == cli.EXIT_CONFIG
    costs = tmp_path / "costs.csv"
    costs.write_text("t,node_2\n1,0.1\n")
    assert cli.main(["analyze", "--costs", str(costs), "--out-dir", str(tmp_path)]) == cli.EXIT_VALIDATION
    grid = tmp_path / "grid.csv"
    grid.write_text("[nodes]\nnode_id,name\n1,a\n")
    assert cli.main(["opf-costs", "--grid", str(grid), "--out-dir", str(tmp_path)]) == cli.EXIT_VALIDATION
    assert "exit codes" in cli.build_parser().format_help()


def test_simulate_is_byte_identical(tmp_path):
    cfg = tmp_path / "small.ini"
    cfg.write_text(SMALL)
    for d in ("a", "b"):
        assert cli.main(["simulate", "--config", str(cfg), "--seed", "3",
                         "--out-dir", str(tmp_path / d)]) == 0
    for name in ("simulate.csv", "simulate.meta.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    meta = json.loads((tmp_path / "a" / "simulate.meta.json").read_text())
    assert meta["master_seed"] == 3 and "wall_clock_s" not in meta
    assert "simulate" in json.loads((tmp_path / "a" / "timing.json").read_text())
    cli.main(["simulate", "--config", str(cfg), "--seed", "4", "--out-dir", str(tmp_path / "c")])
    assert (tmp_path / "a" / "simulate.csv").read_bytes() != (tmp_path / "c" / "simulate.csv").read_bytes()


def test_opf_costs_and_analyze_small(tmp_path, capsys):
    out = tmp_path / "o"
    assert cli.main(["opf-costs", "--steps", "24", "--out-dir", str(out)]) == 0
    assert (out / "states.csv").exists()
    side = json.loads((out / "costs.csv.meta.json").read_text())
    assert side["steps"] == 24 and side["m"] == 3
    # feed the written states back in; costs must not change
    again = tmp_path / "p"
    assert cli.main(["opf-costs", "--states", str(out / "states.csv"), "--out-dir", str(again)]) == 0
    a = np.loadtxt(out / "costs.csv", delimiter=",", skiprows=1)
    b = np.loadtxt(again / "costs.csv", delimiter=",", skiprows=1)
    np.testing.assert_allclose(a, b, rtol=1e-12)
    assert cli.main(["analyze", "--costs", str(out / "costs.csv"), "--out-dir", str(out)]) == 0
    anova = (out / "anova.csv").read_text().splitlines()
    assert anova[0] == "source,df,ss,ms,f,significance"
    assert anova[-1].startswith("total,22,")


def test_compare_and_sensitivity_small(tmp_path):
    common = ["--q", "2", "--l", "2", "--horizon", "120"]
    assert cli.main(["compare", *common, "--out-dir", str(tmp_path)]) == 0
    rows = (tmp_path / "compare_final.csv").read_text().splitlines()
    assert len(rows) == 1 + 8
    assert cli.main(["sensitivity", *common, "--n", "4", "--out-dir", str(tmp_path)]) == 0
    rows = (tmp_path / "sensitivity_final.csv").read_text().splitlines()
    assert [r.split(",")[1] for r in rows[1:5]] == ["1/(200m)", "1/(100m)", "1/(50m)", "1/(20m)"]
