import json
import os
import subprocess
import sys

import pytest

from harris import cli
from harris.diagnostics import NumericalError


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_escape_run_writes_artifacts(tmp_path):
    out = tmp_path / "esc"
    code = cli.main(["escape", "--example", "ex3", "--start", "2", "--horizon", "200",
                     "--replicas", "500", "--seed", "1", "--out", str(out)])
    assert code == 0
    lines = (out / "escape.csv").read_text().splitlines()
    assert lines[0] == "replica,exit_step,stayed"
    assert len(lines) == 501
    summary = json.loads((out / "summary.json").read_text())
    assert summary["operation"] == "estimate_escape"
    assert summary["estimates"]["closed_form"] == 0.5
    assert "config_digest" in summary


def test_config_file_and_flag_precedence(tmp_path):
    cfgfile = tmp_path / "c.json"
    cfgfile.write_text(json.dumps({"example": "ex3", "horizon": 50, "replicas": 100, "seed": 9}))
    cfg = cli.build_config(["escape", "--config", str(cfgfile), "--horizon", "70", "--out", "x"])
    assert cfg.get("horizon") == 70
    assert cfg.get("replicas") == 100
    assert cfg.seed == 9


def test_invalid_config_exit_2_lists_all(tmp_path, capsys):
    code = cli.main(["escape", "--example", "ex99", "--replicas", "0", "--out", str(tmp_path)])
    assert code == 2
    err = capsys.readouterr().err
    assert "seed" in err and "ex99" in err and "replicas ≥ 1" in err
    assert not os.listdir(tmp_path)


def test_unsupported_example_for_experiment(capsys):
    assert cli.main(["validate", "tv", "--example", "ex9", "--seed", "1"]) == 2
    assert "valid ids" in capsys.readouterr().err


def test_validate_ok(capsys):
    assert cli.main(["validate", "escape", "--example", "ex4", "--seed", "1"]) == 0


def test_numerical_error_exit_3(tmp_path, monkeypatch):
    def boom(cfg):
        raise NumericalError("singular", 1.0)

    monkeypatch.setitem(cli.RUNNERS, "tv", boom)
    code = cli.main(["tv", "--example", "ex3", "--seed", "1", "--out", str(tmp_path / "o")])
    assert code == 3


def test_tv_and_classes_runs(tmp_path):
    assert cli.main(["tv", "--example", "ex3", "--n", "100", "--truncation", "1000", "--seed", "0",
                     "--out", str(tmp_path / "tv")]) == 0
    assert (tmp_path / "tv" / "tv.csv").read_text().startswith("n,tv\n")
    assert cli.main(["classes", "--example", "ex14", "--grid", "0.5", "--subchain", "1", "--seed", "0",
                     "--out", str(tmp_path / "cl")]) == 0
    s = json.loads((tmp_path / "cl" / "summary.json").read_text())
    assert s["estimates"]["classes"] == 2


def test_integrability_and_coverage_and_balance(tmp_path):
    assert cli.main(["integrability", "--example", "ex9", "--fix", "x2=0", "--seed", "0",
                     "--out", str(tmp_path / "i")]) == 0
    assert json.loads((tmp_path / "i" / "summary.json").read_text())["verdict"] == "divergent"
    assert cli.main(["coverage", "--example", "ex9", "--horizon", "100", "--replicas", "20", "--seed", "0",
                     "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "coverage.csv").read_text().startswith("replica,coord,first_accept_step\n")
    assert cli.main(["balance", "--example", "ex14", "--replicas", "200", "--seed", "0",
                     "--out", str(tmp_path / "b")]) == 0
    assert json.loads((tmp_path / "b" / "summary.json").read_text())["verdict"] == "balanced"


def test_transdim_small(tmp_path):
    assert cli.main(["transdim-marginal", "--steps", "2000", "--replicas", "3", "--replica-steps", "500",
                     "--seed", "4", "--out", str(tmp_path / "t")]) == 0
    lines = (tmp_path / "t" / "transdim.csv").read_text().splitlines()
    assert lines[0] == "replica,first_within_accept,event_d,all_covered"


def test_rerun_byte_identical(tmp_path):
    args = ["escape", "--example", "ex9", "--horizon", "300", "--replicas", "100", "--seed", "5"]
    cli.main(args + ["--out", str(tmp_path / "a")])
    cli.main(args + ["--out", str(tmp_path / "b")])
    for name in ("escape.csv", "summary.json"):
        assert read(tmp_path / "a" / name) == read(tmp_path / "b" / name)


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "harris", "validate", "escape", "--example", "ex3"],
                       capture_output=True, text=True)
    assert r.returncode == 2
    assert "seed" in r.stderr
