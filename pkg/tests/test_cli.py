import importlib
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

import bellkit.cli
from bellkit.cli import main
from bellkit.core import Behavior, Scenario
from bellkit.geometry import local_visibility
from bellkit.modelfile import behavior_file, load_model, read_transcript, serialize_model
from bellkit.quantum import tsirelson_singlet

CORPUS = Path(__file__).parents[1] / "corpus"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_check_product_model_holds(capsys):
    code, out, _ = run(capsys, "check", CORPUS / "product_mixture.json")
    assert code == 0
    assert "FAILS" not in out
    for name in ("no-conspiracy", "bell-local", "parameter-independence", "outcome-independence", "fr"):
        assert name in out


def test_check_signaling_fails(capsys):
    code, out, _ = run(capsys, "check", CORPUS / "signaling.json")
    assert code == 1 and "FAILS" in out


def test_check_tolerance_flag(capsys):
    assert run(capsys, "check", CORPUS / "signaling.json", "--tol", "0.5")[0] == 0


def test_check_tolerance_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("BELLKIT_TOL", "0.5")
    importlib.reload(bellkit.cli)
    try:
        assert bellkit.cli.main(["check", str(CORPUS / "signaling.json")]) == 0
    finally:
        monkeypatch.delenv("BELLKIT_TOL")
        importlib.reload(bellkit.cli)
    capsys.readouterr()


def test_check_noext_split(capsys):
    code, out, _ = run(capsys, "check", CORPUS / "noext_split.json")
    assert code == 1
    line = next(l for l in out.splitlines() if l.startswith("no-extension"))
    assert "FAILS" in line and "0.5" in line


def test_chsh_pr_box(capsys):
    code, out, _ = run(capsys, "chsh", CORPUS / "pr_box.json")
    assert code == 0 and "CHSH value: 4.0000" in out


def test_chsh_quantum_file(capsys):
    code, out, _ = run(capsys, "chsh", CORPUS / "singlet_tsirelson.json")
    assert code == 0 and "CHSH value: 2.8284" in out


def test_local_member_and_non_member(capsys):
    code, out, _ = run(capsys, "local", CORPUS / "uniform.json")
    assert code == 0 and "member" in out
    code, out, _ = run(capsys, "local", CORPUS / "pr_box.json")
    assert code == 1 and "NOT a member" in out
    assert "correlator form" in out


def test_local_visibility_matches_library(capsys):
    code, out, _ = run(capsys, "--digits", "6", "local", "--visibility", CORPUS / "singlet_tsirelson.json")
    assert code == 1
    printed = float(out.strip().splitlines()[-1].split()[-1])
    assert printed == float(f"{local_visibility(tsirelson_singlet()):.6g}")


def test_quantum_writes_behavior(tmp_path, capsys):
    out = tmp_path / "q.json"
    code, _, _ = run(capsys, "quantum", "--preset", "singlet", "--angles-a", "0", "90",
                     "--angles-b", "45", "135", "-o", out)
    assert code == 0
    np.testing.assert_allclose(load_model(out).behavior.p, tsirelson_singlet().p, atol=1e-15)


def test_quantum_state_amplitudes(capsys):
    code, out, _ = run(capsys, "quantum", "--state", "1,0", "0,0", "0,0", "0,0",
                       "--angles-a", "0", "--angles-b", "0")
    assert code == 0
    assert json.loads(out)["behavior"]["p"][0][0] == [[1.0, 0.0], [0.0, 0.0]]


def test_quantum_bad_state_is_input_error(capsys):
    code, _, err = run(capsys, "quantum", "--state", "1,0", "1,0", "0,0", "0,0",
                       "--angles-a", "0", "--angles-b", "0")
    assert code == 2 and err.startswith("error:")


def test_simulate_writes_transcript_and_summary(tmp_path, capsys):
    tr, summ = tmp_path / "t.txt", tmp_path / "s.json"
    code, out, _ = run(capsys, "simulate", CORPUS / "singlet_tsirelson.json", "--runs", 20000, "--seed", 3,
                       "--out", tr, "--summary", summ, "--workers", 2)
    assert code == 0 and "empirical CHSH" in out
    with open(tr) as fh:
        t = read_transcript(fh)
    assert len(t) == 20000 and t.seed == 3
    doc = json.loads(summ.read_text())
    assert abs(doc["chsh"] - 2 * np.sqrt(2)) < 5 * doc["chsh_stderr"]


def test_simulate_with_reference(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", CORPUS / "uniform.json", "--runs", 5000, "--seed", 1,
                       "--ref", CORPUS / "pr_box.json", "--out", tmp_path / "t.txt")
    assert code == 0 and "total-variation" in out


def test_verify_small(capsys):
    code, out, _ = run(capsys, "verify", "--trials", 50, "--seed", 7)
    assert code == 0
    assert out.count("50/50") == 2 and "150/150" in out


def test_missing_file_is_input_error(capsys):
    code, _, err = run(capsys, "chsh", "/nonexistent/file.json")
    assert code == 2 and "error" in err


def test_invalid_model_is_input_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"format_version": 1, "scenario": ')
    assert run(capsys, "check", bad)[0] == 2


def test_unknown_subcommand_is_input_error(capsys):
    assert run(capsys, "frobnicate")[0] == 2


def test_resource_cap_exit_code(tmp_path, capsys):
    big = tmp_path / "big.json"
    big.write_text(serialize_model(behavior_file(Behavior.uniform(Scenario(21, 1, 2, 2)))))
    code, _, err = run(capsys, "local", big)
    assert code == 3 and "cap" in err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "bellkit", "chsh", str(CORPUS / "pr_box.json")],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "4.0000" in res.stdout


@pytest.mark.parametrize("path", sorted(CORPUS.glob("*.json")), ids=lambda p: p.stem)
def test_check_runs_on_every_corpus_file(path, capsys):
    assert run(capsys, "check", path)[0] in (0, 1)
