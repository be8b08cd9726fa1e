import json
import math

import numpy as np
import pytest

from ensemblectl.cli import main
from ensemblectl.reporting import dumps, write_json

ANALYZE_EXIT = {
    "harmonic": 0,
    "harmonic-single-input": 10,
    "aircraft-ex2": 0,
    "aircraft-ex3": 20,
    "motivating": 0,
    "diag4": 0,
    "jordan4": 0,
    "fig2": 0,
    "fig3": 0,
    "fig4": 2,
}


@pytest.mark.parametrize("name,code", sorted(ANALYZE_EXIT.items()))
def test_analyze_exit_codes(name, code, capsys):
    assert main(["analyze", "--builtin", name]) == code
    out, err = capsys.readouterr()
    if code == 2:
        assert "error" in err
    else:
        report = json.loads(out)
        assert report["status"] in ("controllable", "uncontrollable", "inconclusive")


@pytest.mark.parametrize("params,code", [(["a=1.5"], 10), (["a=0.5"], 0), (["alpha=1"], 2)])
def test_analyze_params(params, code, capsys):
    argv = ["analyze", "--builtin", "motivating"]
    for p in params:
        argv += ["--param", p]
    assert main(argv) == code


def test_analyze_without_fallback(capsys):
    assert main(["analyze", "--builtin", "aircraft-ex3", "--no-fallback"]) == 20
    report = json.loads(capsys.readouterr().out)
    conditions = [e["condition"] for e in report["evidence"]]
    assert "numeric reachability of canary target" not in conditions


def test_analyze_writes_verdict(tmp_path, capsys):
    assert main(["analyze", "--builtin", "motivating", "--param", "a=1.5", "--out", str(tmp_path)]) == 10
    report = json.loads((tmp_path / "verdict.json").read_text())
    assert report["status"] == "uncontrollable"
    failed = [e for e in report["evidence"] if not e["passed"]]
    assert failed


def test_output_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["synth", "--builtin", "fig2", "--out", str(d)]) == 0
        assert main(["analyze", "--builtin", "diag4", "--param", "alpha=4", "--out", str(d)]) == 0
    for name in ["summary.json", "errors.json", "verdict.json", "control.csv", "trajectory.csv"]:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_synth_scenarios(tmp_path, capsys):
    assert main(["synth", "--builtin", "fig2", "--out", str(tmp_path), "--no-csv"]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["passed"] and summary["errors"]["sup_error"] <= 1e-2
    assert not (tmp_path / "control.csv").exists()


def test_synth_needs_scenario(capsys):
    assert main(["synth", "--builtin", "diag4"]) == 2


def test_synth_unreachable_target(tmp_path, capsys):
    doc = {
        "n": 2, "m": 1,
        "A0": [0.0, -1.0, 1.0, 0.0],
        "B0": [1.0, 0.0],
        "K": {"lo": -1.0, "hi": 1.0},
        "X0": {"const": [0.0, 0.0], "linear": [-1.0, 0.0]},
        "XF": {"const": [0.0, 0.0], "linear": [0.0, 0.0]},
        "T": 1.0,
    }
    path = tmp_path / "odd.json"
    path.write_text(json.dumps(doc))
    assert main(["synth", "--input", str(path), "--out", str(tmp_path)]) == 11
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert not summary["passed"]


def test_reach(capsys):
    assert main(["reach", "--builtin", "fig4"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["table"][-1]["order"] == 30
    assert main(["reach", "--builtin", "harmonic-single-input"]) == 11


@pytest.mark.parametrize("argv", [
    ["example", "--name", "nosuch"],
    ["analyze"],
    ["analyze", "--builtin", "fig2", "--input", "x.json"],
    ["analyze", "--input", "/nonexistent/file.json"],
    ["analyze", "--builtin", "diag4", "--param", "alpha"],
    ["analyze", "--builtin", "diag4", "--rank-tol", "2"],
    ["nosuch-command"],
])
def test_input_errors(argv, capsys):
    assert main(argv) == 2


def test_example_round_trip(tmp_path, capsys):
    assert main(["example", "--name", "fig3", "--out", str(tmp_path)]) == 0
    path = tmp_path / "fig3.json"
    doc = json.loads(path.read_text())
    assert doc["name"] == "fig3" and doc["T"] == 4.0
    assert main(["synth", "--input", str(path), "--grid-count", "21", "--nt", "128",
                 "--error-metric", "relative", "--threshold", "0.05"]) == 0


def test_reporting_format(tmp_path):
    text = dumps({"b": 1, "a": [1.0, 0.1, np.float64(1e-20)], "c": {"x": True, "y": None, "z": math.nan}})
    assert text.index('"b"') < text.index('"a"')
    assert "0.10000000000000001" in text and "9.9999999999999995e-21" in text
    assert json.loads(text)["c"]["z"] is None
    write_json(tmp_path / "r.json", {"k": 2})
    assert json.loads((tmp_path / "r.json").read_text()) == {"k": 2}
