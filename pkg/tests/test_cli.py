import json

import pytest

from mompoly.cli import EXIT_CERT, EXIT_OK, EXIT_SOLVER, EXIT_SPEC, main
from mompoly.problems import data_path


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    try:
        report = json.loads(out)
    except json.JSONDecodeError:
        report = None
    return code, report


def test_solve_default(capsys):
    code, rep = run(capsys, "solve", "m20m02")
    assert code == EXIT_OK
    assert rep["status"] == "Optimal"
    assert rep["bound"] == pytest.approx(1 / 3, abs=1e-6)
    assert rep["runs"][0]["sizes"]["rows"] > 0


def test_solve_deterministic_except_wall_time(capsys):
    _, a = run(capsys, "solve", "prod_x1x2", "--order", "3")
    _, b = run(capsys, "solve", "prod_x1x2", "--order", "3")
    a.pop("wall_time")
    b.pop("wall_time")
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_sweep_monotone(capsys):
    code, rep = run(capsys, "solve", "prod_x1x2", "--sweep", "2..4")
    assert code == EXIT_OK and rep["monotone"] is True
    assert [r["order"] for r in rep["runs"]] == [2, 3, 4]


def test_sdpa_export(capsys, tmp_path):
    code, rep = run(capsys, "solve", "m20m02", "--solver", "sdpa-export", "--export-dir", str(tmp_path))
    assert code == EXIT_OK
    assert (tmp_path / "m20m02_r2.dat-s").exists()


def test_invalid_spec_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 1, "objective": "x1", "cone": "nope"}))
    assert run(capsys, "solve", str(bad))[0] == EXIT_SPEC
    bad.write_text("{ not json")
    assert run(capsys, "solve", str(bad))[0] == EXIT_SPEC
    assert run(capsys, "solve", str(tmp_path / "missing.json"))[0] == EXIT_SPEC
    assert run(capsys, "solve", "m20m02", "--sweep", "4..2")[0] == EXIT_SPEC
    assert run(capsys, "solve", "m20m02", "--order", "0")[0] == EXIT_SPEC


def test_bad_arguments_exit_2(capsys):
    assert run(capsys, "solve")[0] == EXIT_SPEC
    assert run(capsys, "frobnicate")[0] == EXIT_SPEC
    assert run(capsys, "verify", "adhoc")[0] == EXIT_SPEC


def test_solver_failure_exit_3(capsys):
    code, rep = run(capsys, "solve", "m20m02", "--max-dim", "1")
    assert code == EXIT_SOLVER
    assert rep["runs"][0]["status"] == "TooLarge"


def test_verify_shipped_certificate(capsys):
    code, rep = run(capsys, "verify", str(data_path("cov3322.cert.json")))
    assert code == EXIT_OK and rep["valid"] is True
    assert rep["blocks"][0]["psd"] == "PD"


def test_verify_generated(capsys, tmp_path):
    assert run(capsys, "verify", "holder", "--k", "4")[0] == EXIT_OK
    assert run(capsys, "verify", "holder", "--k", "2", "--i", "1,2")[0] == EXIT_OK
    code, rep = run(capsys, "verify", "adhoc", "--i", "1,2,1", "--save", str(tmp_path / "a.json"))
    assert code == EXIT_OK
    assert run(capsys, "verify", str(tmp_path / "a.json"))[0] == EXIT_OK


def test_corrupted_certificate_exit_4(capsys, tmp_path):
    cert = json.loads(data_path("cov3322.cert.json").read_text())
    cert["target"] = cert["target"].replace("9/2", "4")
    bad = tmp_path / "wrong.json"
    bad.write_text(json.dumps(cert))
    code, rep = run(capsys, "verify", str(bad))
    assert code == EXIT_CERT and rep["valid"] is False
    broken = tmp_path / "broken.json"
    broken.write_text(data_path("cov3322.cert.json").read_text()[:200])
    assert run(capsys, "verify", str(broken))[0] == EXIT_CERT


def test_examples(capsys):
    code, rep = run(capsys, "examples", "h17", "--samples", "10")
    assert code == EXIT_OK
    assert run(capsys, "examples", "holder")[0] == EXIT_OK
    assert run(capsys, "examples", "adhoc")[0] == EXIT_OK
    code, rep = run(capsys, "examples", "bilocal")
    assert code == EXIT_OK


def test_hankel_and_reformulate(capsys):
    code, rep = run(capsys, "hankel", "h17", "--extend", "1")
    assert code == EXIT_OK
    code, rep = run(capsys, "reformulate", "prod_x1x2", "--summary")
    assert code == EXIT_OK


def test_pretty_output(capsys):
    code = main(["verify", "holder", "--k", "1", "--pretty"])
    out = capsys.readouterr().out
    assert code == EXIT_OK and "valid" in out and not out.lstrip().startswith("{")
