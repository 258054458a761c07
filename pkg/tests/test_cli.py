from __future__ import annotations

import json
import subprocess
import sys

import pytest

from riesz_lab.cli import config_hash, main, read_config_file
from riesz_lab.errors import ConfigInvalid


def run(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    lines = cap.out.strip().splitlines()
    doc = json.loads(lines[-1]) if lines and lines[-1].startswith("{") else None
    return code, doc, lines, cap.err


def test_kernels_exact_output(capsys):
    code, doc, lines, _ = run(capsys, "kernels", "--q", "2", "--green", "o", "o", "--hmc", "o", "0")
    assert code == 0
    assert "green o o 2" in lines
    assert doc["pass"] is True
    assert doc["command"] == "kernels"


def test_missing_subcommand_exits_two(capsys):
    assert main([]) == 2


def test_bad_vertex_exits_two(capsys):
    code, _, _, err = run(capsys, "kernels", "--q", "3", "--green", "o", "9")
    assert code == 2
    assert json.loads(err)["error"] == "ConfigInvalid"


def test_failed_check_exits_one(capsys):
    code, doc, _, err = run(capsys, "riesz", "--q", "2", "--u", "exp:1:1/2")
    assert code == 1
    assert doc["pass"] is False
    assert json.loads(err.strip().splitlines()[-1])["error"] == "CheckFailed"


def test_green_bound_verification(capsys):
    code, doc, _, _ = run(capsys, "verify", "--theorem", "green", "--q", "2", "--ends", "0:(0)", "--t", "1/4")
    assert code == 0
    rep = doc["results"]["green_bound"][0]
    assert (rep["min_ratio_num"], rep["min_ratio_den"]) == (3, 4)


@pytest.mark.parametrize("theorem,extra", [
    ("main1", ["--q", "4", "--u", "main1-example"]),
    ("converse", ["--q", "2", "--ends", "0:(0)", "--psi", "power:1:1", "--u", "exp:1:2"]),
])
def test_verifiers_pass(capsys, theorem, extra):
    code, doc, _, _ = run(capsys, "verify", "--theorem", theorem, *extra)
    assert code == 0, doc


def test_config_file_and_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# tree\nq = 3\nends = 1:(2)\nt = 1/9\n")
    code, doc, _, _ = run(capsys, "green-bound", "--config", str(cfg))
    assert code == 0
    assert doc["config"]["q"] == "3"
    code, doc, _, _ = run(capsys, "green-bound", "--config", str(cfg), "--q", "2", "--ends", "0:(1)", "--t", "1/4")
    assert doc["config"]["q"] == "2"


def test_empty_or_unknown_config_exits_two(tmp_path, capsys):
    empty = tmp_path / "empty.cfg"
    empty.write_text("# nothing\n")
    with pytest.raises(ConfigInvalid):
        read_config_file(str(empty))
    assert main(["kernels", "--config", str(empty)]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert main(["kernels", "--config", str(bad)]) == 2


def test_outputs_are_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["simulate", "--target", "visits", "--q", "2", "--paths", "2000", "--replicas", "2",
                     "--out", str(d)]) == 0
    capsys.readouterr()
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    ta = (a / "tables" / "estimates.csv").read_text()
    assert ta == (b / "tables" / "estimates.csv").read_text()
    doc = json.loads((a / "report.json").read_text())
    assert ta.splitlines()[0] == f"# config_hash={doc['config_hash']}"
    assert doc["config_hash"] == config_hash(doc["config"])


def test_report_aggregates_runs(tmp_path, capsys):
    good, bad = tmp_path / "good", tmp_path / "bad"
    main(["kernels", "--q", "2", "--green", "o", "0", "--out", str(good)])
    main(["riesz", "--q", "2", "--u", "exp:1:1/2", "--out", str(bad)])
    capsys.readouterr()
    code, doc, _, _ = run(capsys, "report", "--inputs", str(good))
    assert code == 0 and doc["results"]["runs"][0]["pass"] is True
    code, doc, _, _ = run(capsys, "report", "--inputs", str(good), str(bad))
    assert code == 1


def test_moment_and_disk_commands(capsys):
    code, doc, _, _ = run(capsys, "moment", "--q", "2", "--ends", "0:(0)", "--psi", "power:1:1/2", "--integral")
    assert code == 0
    assert doc["results"]["boundary_integral"]["verdict"] == "finite_certified"
    code, doc, _, _ = run(capsys, "disk")
    assert code == 0 and doc["results"]["checks"] == doc["results"]["passed"]


def test_weighted_simulation_from_csv(tmp_path, capsys):
    csv = tmp_path / "tree.csv"
    csv.write_text("parent,child_label,numerator,denominator\no,0,10,1\no,1,1,1\no,2,1,1\n")
    code, doc, _, _ = run(capsys, "simulate", "--target", "weighted", "--weighted", str(csv), "--q-ext", "2",
                          "--paths", "5000", "--replicas", "2")
    assert code == 0
    assert abs(doc["results"]["estimates"][0]["oracle"] - 44 / 7) < 1e-12


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "riesz_lab", "kernels", "--q", "2", "--green", "o", "o"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert "green o o 2" in res.stdout
