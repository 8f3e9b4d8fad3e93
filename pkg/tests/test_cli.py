import json

import pytest

from plett.cli import bundled, main
from plett.experiment import load_rows


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.setenv("PLETT_OUT", str(tmp_path / "default"))
    return tmp_path


def test_list(capsys):
    assert main(["list"]) == 0
    text = capsys.readouterr().out
    assert "single_lane" in text and "multilane" in text
    assert {"single_lane", "synthetic_linear"} <= set(bundled("scenarios"))


def test_run_writes_outputs(out, capsys):
    assert main(["run", "--kind", "single_lane", "--seeds", "2", "--out", str(out / "r"),
                 "--traces"]) == 0
    d = out / "r"
    for name in ("config.json", "runs.csv", "summary.json", "trace_seed0.csv", "trace_seed1.csv",
                 "trace_seed0.png"):
        assert (d / name).exists(), name
    summary = json.loads((d / "summary.json").read_text())
    assert summary["seeds"] == [0, 1] and summary["feasible"] in (True, False)


def test_run_uses_env_output_dir(out):
    assert main(["run", "--config", "synthetic_linear", "--seeds", "1", "--no-plots"]) == 0
    assert (out / "default" / "runs.csv").exists()


def test_grid_pareto_report(out, tmp_path, capsys):
    spec = {"experiments": [
        {"name": "CETT", "kind": "single_lane", "seeds": 1,
         "overrides": {"duration": 3.0, "policy": {"kind": "CETT", "delta": {"v": 0.2, "x_delta": 0.5}}},
         "grid": {"policy.delta.v": [0.2, 0.4], "policy.delta.x_delta": [0.5, 1.0]}},
        {"name": "RHO_ETT", "kind": "single_lane", "seeds": 1,
         "overrides": {"duration": 3.0, "policy": {"kind": "RHO_ETT", "eps": {"v": 16, "x_delta": 5}}},
         "grid": {"policy.eps.v": [8, 16], "policy.eps.x_delta": [5, 10]}},
        {"name": "WC", "kind": "single_lane", "seeds": 1,
         "overrides": {"duration": 3.0, "policy": {"kind": "RHO_ETT_WC", "lambdas": {"v": 2, "x_delta": 2}}},
         "grid": {"policy.eps_rho": [1, 2], "policy.lambdas.v|policy.lambdas.x_delta": [[2, 2], [1.5, 3]]}}]}
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    assert main(["grid", "--spec", str(path), "--out", str(out / "g")]) == 0
    assert len(load_rows(out / "g" / "CETT.csv")) == 4
    assert (out / "g" / "RHO_ETT.json").exists() and (out / "g" / "summary.json").exists()

    assert main(["pareto", "--in", str(out / "g" / "CETT.csv"), "--out", str(out / "front.csv")]) == 0
    assert 1 <= len(load_rows(out / "front.csv")) <= 4
    capsys.readouterr()
    assert main(["pareto", "--in", str(out / "g" / "CETT.csv")]) == 0
    assert capsys.readouterr().out.startswith("policy.delta.v,policy.delta.x_delta,rho_min,m_mean")

    files = [str(out / "g" / f"{n}.csv") for n in ("CETT", "RHO_ETT", "WC")]
    assert main(["report", "--in", *files, "--out", str(out / "rep")]) == 0
    for name in ("CETT_feasibility.png", "RHO_ETT_feasibility.png", "WC_sweep.png", "pareto.png",
                 "summary.json"):
        assert (out / "rep" / name).exists(), name


def test_bundled_grid_name_resolves(out):
    assert main(["grid", "--spec", "ts_feasibility", "--seeds", "1", "--out", str(out / "ts")]) == 0
    rows = load_rows(out / "ts" / "ts_feasibility.csv")
    assert [r.params["Ts"] for r in rows] == [0.01, 0.02]


def test_errors(out, capsys):
    with pytest.raises(SystemExit):
        main(["run", "--config", "no_such_scenario"])
    bad = out / "bad.json"
    bad.write_text(json.dumps({"kind": "single_lane", "Ts": -1}))
    assert main(["run", "--config", str(bad), "--out", str(out / "x")]) == 2
    assert "Ts" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main([])
