import filecmp
import json
import os

import pytest
import yaml

from rankgossip import cli
from rankgossip.config import ConfigError, from_dict, parse_text, validate

NASH = """\
kind: nash
seed: 1
replicates: 500
topology: {kind: complete, size: 2000}
reward: {family: linear}
"""


def write(tmp_path, text, name="exp.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def summary(path):
    with open(os.path.join(path, "summary.json")) as fh:
        return json.load(fh)


def test_nash_run(tmp_path, capsys):
    out = str(tmp_path / "o")
    assert cli.main(["nash", "--config", write(tmp_path, NASH), "--out", out]) == 0
    s = summary(out)
    assert s["strategy"][0] == pytest.approx(0.5, abs=0.05)
    assert s["classification"] == "wasteful"
    with open(os.path.join(out, "report.json")) as fh:
        rep = json.load(fh)
    assert {"strategy", "payoff", "classification", "strategy_ci", "trace"} <= set(rep)
    assert json.loads(capsys.readouterr().out)["out"] == out


def test_negative_rate_names_field(tmp_path, capsys):
    cfg = write(tmp_path, NASH + "strategy: [-0.5]\n")
    assert cli.main(["run", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "strategy[0]" in capsys.readouterr().err


@pytest.mark.parametrize("text,field", [
    ("kind: nash\nreplicates: 5\ntopology: {kind: complete, size: 10}\nreward: linear\n", "seed"),
    (NASH + "bogus: 1\n", "bogus"),
    (NASH.replace("size: 2000", "size: 1"), "topology.size"),
    (NASH.replace("family: linear", "family: wavy"), "reward"),
    ("kind: nash\nseed: [1,\n", "line"),
    ("kind: teleport\nseed: 1\n", "kind"),
])
def test_config_errors_exit_2(tmp_path, capsys, text, field):
    assert cli.main(["run", write(tmp_path, text), "--out", str(tmp_path / "o")]) == 2
    assert field in capsys.readouterr().err


def test_kind_mismatch(tmp_path):
    assert cli.main(["fquad", "--config", write(tmp_path, NASH)]) == 2


def test_runtime_error_exit_1(tmp_path, capsys):
    # a cluster grown for too long on a tiny box reaches the boundary
    args = ["lattice", "--seed", "0", "--set", "params.L=10", "--set", "params.s_max=50", "--out",
            str(tmp_path / "o")]
    assert cli.main(args) == 1
    assert "boundary" in capsys.readouterr().err


def test_determinism_across_threads(tmp_path):
    text = """\
kind: simulate
seed: 7
replicates: 6
topology: {kind: short_long, size: 24, c_far: 10}
strategy: [1.0, 0.05]
ego: [2.0, 0.0]
params: {agent_tables: 2}
"""
    cfg = write(tmp_path, text)
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    assert cli.main(["run", cfg, "--out", a, "--threads", "1"]) == 0
    assert cli.main(["run", cfg, "--out", b, "--threads", "4"]) == 0
    cmp = filecmp.dircmp(a, b)
    assert not cmp.left_only and not cmp.right_only
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    assert not mismatch and not errors


def test_env_default_output(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "base"))
    assert cli.main(["analytic", "--seed", "0", "--set", "params.quantity=audience"]) == 0
    (only,) = os.listdir(tmp_path / "base")
    assert only.startswith("analytic-")


def test_config_round_trip():
    d = yaml.safe_load(NASH)
    cfg = validate(from_dict(d))
    again = validate(from_dict(parse_text(cfg.canonical())))
    assert again.canonical() == cfg.canonical()
    assert again.hash() == cfg.hash()
    assert validate(from_dict(dict(d, threads=3, out="x"))).hash() == cfg.hash()
    assert validate(from_dict(dict(d, seed=2))).hash() != cfg.hash()


def test_sweep_single_point_matches_run(tmp_path):
    base = {"kind": "fquad", "params": {"lam": 1.0}}
    sweep = {"kind": "sweep", "seed": 0, "params": {"base": base, "vary": "params.lam", "values": [2.0]}}
    assert cli.main(["run", write(tmp_path, yaml.safe_dump(sweep)), "--out", str(tmp_path / "s")]) == 0
    direct = dict(base, seed=0, params={"lam": 2.0})
    assert cli.main(["run", write(tmp_path, yaml.safe_dump(direct), "d.yaml"), "--out", str(tmp_path / "d")]) == 0
    assert summary(tmp_path / "s" / "point_000") == summary(tmp_path / "d")
    assert (tmp_path / "s" / "point_000" / "cdf.csv").read_bytes() == (tmp_path / "d" / "cdf.csv").read_bytes()


def test_sweep_slope_and_gaps(tmp_path):
    base = {"kind": "fquad", "params": {}}
    sweep = {"kind": "sweep", "seed": 0,
             "params": {"base": base, "vary": "params.lam", "values": [1.0, 8.0, 64.0], "y": "window_width",
                        "slope": -1 / 3}}
    out = tmp_path / "s"
    assert cli.main(["run", write(tmp_path, yaml.safe_dump(sweep)), "--out", str(out)]) == 0
    s = summary(out)
    assert s["slope"] == pytest.approx(-1 / 3, abs=1e-3)
    bad = {"kind": "sweep", "seed": 0,
           "params": {"base": {"kind": "analytic", "params": {"quantity": "regular_calls"}},
                      "vary": "params.theta", "values": [1.0, -1.0], "y": "residual"}}
    assert cli.main(["run", write(tmp_path, yaml.safe_dump(bad), "b.yaml"), "--out", str(tmp_path / "b")]) == 0
    rows = (tmp_path / "b" / "summary.csv").read_text().splitlines()
    assert rows[1].split(",")[3] == "ok" and rows[2].split(",")[3] == "failed"
    assert summary(tmp_path / "b")["failed"] == 1


def test_empty_sweep_grid_is_config_error():
    with pytest.raises(ConfigError):
        validate(from_dict({"kind": "sweep", "seed": 0,
                            "params": {"base": {"kind": "fquad"}, "vary": "params.lam", "values": []}}))
