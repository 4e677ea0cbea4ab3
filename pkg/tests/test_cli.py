import json
import shutil
import subprocess
from pathlib import Path

import pytest

from sosgap.cli import main

DATA = Path(__file__).parent / "data"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def payload(out):
    return json.loads(out)


def test_gen_golden(capsys):
    code, out, err = run(capsys, "gen", "--n", "10", "--m", "60", "--seed", "1")
    assert code == 0
    assert out == (DATA / "gen_n10_m60_s1.json").read_text()
    assert "digest=3b4b1d7950f1fe53" in err


def test_gen_planted_is_satisfiable(capsys, tmp_path):
    from sosgap.boolcore import brute_force_opt, instance_from_json

    code, out, _ = run(capsys, "gen", "--n", "8", "--m", "12", "--family", "planted", "--seed", "4")
    assert code == 0
    assert brute_force_opt(instance_from_json(out))[0] == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["gen", "--n", "2", "--m", "3"],
        ["gen", "--n", "6", "--m", "4", "--weights", "1,1,1"],
        ["norm24", "--matrix", "1,0;0"],
        ["verify", "--family", "tseitin-k4"],
    ],
)
def test_usage_errors_exit_two(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and "usage error" in err


def test_argparse_rejects_unknown_family(capsys):
    with pytest.raises(SystemExit) as e:
        main(["gen", "--family", "nope"])
    assert e.value.code == 2


def test_pe_k4_passes_and_saves(capsys, tmp_path):
    pe_path = tmp_path / "pe.json"
    code, out, _ = run(capsys, "pe", "--family", "tseitin-k4", "--save-pe", str(pe_path))
    rep = payload(out)
    assert code == 0 and rep["status"] == "PASS" and rep["pseudo_value"] in (1, "1")
    inst_path = tmp_path / "k4.json"
    run(capsys, "gen", "--family", "tseitin-k4", "--out", str(inst_path))
    code, out, _ = run(capsys, "verify", "--instance", str(inst_path), "--pe", str(pe_path))
    assert code == 0 and payload(out)["status"] == "PASS"


def test_gap_k4_reports_degree_shortfall(capsys):
    code, out, err = run(capsys, "gap", "--family", "tseitin-k4")
    rep = payload(out)
    assert code == 1 and rep["status"] == "FAIL"
    assert "undefined" in rep["first_violation"] and "gap: FAIL" in err


def test_gap_satisfiable_is_not_a_gap(capsys):
    code, out, _ = run(capsys, "gap", "--family", "planted", "--n", "8", "--m", "3", "--seed", "0")
    rep = payload(out)
    assert code == 1 and rep["status"] == "NOT-A-GAP"
    assert rep["first_violation"].startswith("margin")


def test_gap_corrupted_pe_names_stage(capsys, tmp_path):
    bad = tmp_path / "pe.json"
    bad.write_text('{"nvars": 4, "degree": "x"')
    code, out, err = run(capsys, "gap", "--family", "tseitin-k4", "--pe", str(bad))
    rep = payload(out)
    assert code == 1 and rep["status"] == "ERROR" and rep["stage"] == "pe-load"


def test_gap_resource_limit_exit_three(capsys):
    code, out, _ = run(capsys, "gap", "--family", "planted", "--n", "8", "--m", "3", "--seed", "0", "--cap-dim", "100")
    rep = payload(out)
    assert code == 3 and rep["status"] == "ERROR" and rep["stage"] == "accept-matrix"


def test_game_gap_k4(capsys):
    code, out, _ = run(capsys, "game-gap", "--family", "tseitin-k4")
    rep = payload(out)
    assert code == 0 and rep["status"] == "PASS"
    assert rep["true_value"] == "11/12" and rep["details"]["interval_ok"]


def test_protocol_k4(capsys):
    code, out, _ = run(capsys, "protocol", "--family", "tseitin-k4")
    rep = payload(out)
    assert code == 0 and rep["pseudo_value"] < 1


@pytest.mark.parametrize("matrix", ["1,0;0,1", "1,0"])
def test_norm24_small_matrices(capsys, matrix):
    code, out, _ = run(capsys, "norm24", "--matrix", matrix)
    rep = payload(out)
    assert code == 0 and abs(rep["true_value"] - 1) < 1e-9


def test_deterministic_modulo_timestamp(capsys):
    argv = ["game-gap", "--family", "tseitin-k4", "--seed", "3"]
    a = payload(run(capsys, *argv)[1])
    b = payload(run(capsys, *argv)[1])
    a.pop("timestamp"), b.pop("timestamp")
    assert a == b


@pytest.mark.parametrize(
    "argv",
    [
        ["gap", "--family", "tseitin-k4"],
        ["norm24", "--matrix", "1,0;0,1", "--tol", "-1"],
        ["pe", "--family", "tseitin-k4", "--degree", "2"],
    ],
)
def test_every_fail_names_first_violation(capsys, argv):
    code, out, _ = run(capsys, *argv)
    rep = payload(out)
    assert code == 1 and rep["status"] == "FAIL" and rep["first_violation"]


@pytest.mark.skipif(shutil.which("sosgap") is None, reason="console script not installed")
def test_console_script():
    r = subprocess.run(["sosgap", "gen", "--family", "tseitin-k4"], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["n"] == 6
