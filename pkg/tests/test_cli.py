import json
import subprocess
import sys

import pytest

from rebalance.cli import main
from rebalance.distributions import Dataset

SPEC = {"pi0": 0.9, "mu0": [0.0, 0.0], "mu1": [1.0, 0.5], "sigma": 1.0}


@pytest.fixture
def spec_file(tmp_path):
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(SPEC))
    return p


@pytest.fixture
def data_file(tmp_path, spec_file):
    out = tmp_path / "data.csv"
    assert main(["generate", "--spec", str(spec_file), "--n", "800", "--seed", "1",
                 "--out", str(out)]) == 0
    return out


def test_generate(data_file, spec_file, capsys):
    data = Dataset.from_csv(data_file)
    assert data.n == 800 and data.dim == 2
    assert main(["generate", "--spec", str(spec_file), "--n", "800", "--seed", "1"]) == 0
    assert capsys.readouterr().out == data_file.read_text()


def test_generate_target(spec_file, tmp_path):
    out = tmp_path / "t.csv"
    assert main(["generate", "--spec", str(spec_file), "--n", "2000", "--pi1-star", "0.5",
                 "--out", str(out)]) == 0
    assert abs(Dataset.from_csv(out).n1 - 1000) < 150


@pytest.mark.parametrize("method", ["smote:k=5", "plugin", '{"method": "undersample"}'])
def test_train_then_evaluate(method, data_file, spec_file, tmp_path):
    model = tmp_path / "model.json"
    assert main(["train", "--data", str(data_file), "--method", method, "--seed", "3",
                 "--out", str(model)]) == 0
    payload = json.loads(model.read_text())
    assert payload["model"]["kind"] in ("logistic", "plugin") and "J" in payload["manifest"]
    report = tmp_path / "report.json"
    assert main(["evaluate", "--model", str(model), "--spec", str(spec_file),
                 "--n-eval", "20000", "--out", str(report)]) == 0
    rep = json.loads(report.read_text())
    assert rep["excess_risk"] < 0.1 and rep["n_eval"] == 20000


def test_experiment(tmp_path, capsys):
    cfg = {
        "spec_template": {"pi0": 0.9, "scaled": True},
        "dims": [2], "train_sizes": [200], "seeds": [0, 1],
        "methods": ["smote:k=5", "bootstrap"], "n_eval": 10000,
        "output_dir": str(tmp_path / "out"),
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["experiment", "--config", str(path)]) == 0
    assert capsys.readouterr().out.startswith("d,n,numerator,denominator")
    assert len((tmp_path / "out" / "results.csv").read_text().splitlines()) == 5


def test_diag_quick(tmp_path):
    out = tmp_path / "diag.csv"
    assert main(["diag", "--suite", "formulas", "coupling", "--quick", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "suite,check,measured,threshold,status"
    assert sum(line.startswith("suite,") for line in lines) == 1
    assert {line.split(",")[0] for line in lines[1:]} == {"formulas", "coupling"}


def test_diag_failure_exit_code(monkeypatch, capsys):
    from rebalance import cli
    from rebalance.diagnostics import DiagReport

    def fake(suite, seed=0, quick=False):
        rep = DiagReport(suite)
        rep.add("broken", 1.0, 0.0, False)
        return rep

    monkeypatch.setattr(cli, "run_diagnostics", fake)
    assert main(["diag", "--suite", "formulas"]) == 2
    assert "FAILED formulas: broken" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [["generate", "--spec", "/nonexistent.json", "--n", "5"],
     ["experiment", "--config", "/nonexistent.json"],
     ["diag", "--suite", "bogus"]],
)
def test_config_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert capsys.readouterr().err.startswith("error:")


def test_bad_method_exit_1(data_file, capsys):
    assert main(["train", "--data", str(data_file), "--method", "gan"]) == 1
    assert main(["train", "--data", str(data_file), "--method", "{bad"]) == 1


def test_module_entry_point(spec_file):
    proc = subprocess.run(
        [sys.executable, "-m", "rebalance.cli", "generate", "--spec", str(spec_file), "--n", "3"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0 and len(proc.stdout.splitlines()) == 4
