import json

import pytest
import yaml

from eimarket.cli import main

from conftest import ROOT


def _variant(tmp_path, **market):
    doc = yaml.safe_load((ROOT / "configs" / "toy.yaml").read_text())
    doc["traces"] = [str(ROOT / "data" / "toy_traces.csv.gz")]
    doc["techs_file"] = str(ROOT / "data" / "techs.yaml")
    doc["market"].update(market)
    p = tmp_path / "variant.yaml"
    p.write_text(yaml.safe_dump(doc))
    return p


def test_run_ok_and_report_rebuild(tmp_path, capsys):
    out = tmp_path / "eom"
    assert main(["run", "--config", str(ROOT / "configs" / "toy.yaml"), "--design", "eom", "--out", str(out)]) == 0
    assert "toy EOM: converged" in capsys.readouterr().out
    before = (out / "report.json").read_bytes()
    (out / "report.json").unlink()
    assert main(["report", "--from", str(out)]) == 0
    assert (out / "report.json").read_bytes() == before


def test_validation_failure_exits_1(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("schema_version: 1\nname: x\n")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert json.loads((tmp_path / "o" / "error.json").read_text())["stage"] == "config"
    assert main(["report", "--from", str(tmp_path / "empty")]) == 1
    assert main(["sweep", "--config", str(bad), "--axis", "rps=0", "--out", str(tmp_path / "s")]) == 1


def test_solver_failure_exits_2(tmp_path):
    cfg = _variant(tmp_path, time_limit=1e-6)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = json.loads((tmp_path / "o" / "error.json").read_text())
    assert err["stage"] == "equilibrium" and err["error"] == "GmpSolveError"


def test_nonconvergence_exits_3(tmp_path):
    out = tmp_path / "cyc"
    assert main(["run", "--config", str(ROOT / "configs" / "cycle.yaml"), "--out", str(out)]) == 3
    rep = json.loads((out / "report.json").read_text())
    assert rep["status"] == "oscillating" and rep["equilibrium"]["oscillation"]["period"] == 3


def test_bad_arguments():
    with pytest.raises(SystemExit):
        main(["run", "--config", "x.yaml", "--design", "CAPACITY", "--out", "o"])
