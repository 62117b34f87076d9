import json

import numpy as np
import pytest

from switchopt.cli import main, EXIT_OK, EXIT_CHECK_FAILED, EXIT_SOLVER, \
    EXIT_CONFIG


def _read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = np.array([[float(v) for v in line.split(",")]
                         for line in fh if line.strip()])
    return header, rows


def test_solve_catalyst_writes_report(tmp_path):
    code = main(["solve", "--problem", "catalyst1", "--T", "1",
                 "--s0", "0.1,0.7", "--out", str(tmp_path)])
    assert code == EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["problem"] == "catalyst1"
    assert report["converged"]
    assert report["reference_errors"]["s1"] <= 1e-6
    assert report["reference_errors"]["s2"] <= 1e-6

    header, rows = _read_csv(tmp_path / "trajectory.csv")
    assert header == ["t", "x1", "x2", "u1", "p1", "p2"]
    assert rows[0, 0] == 0.0
    assert rows[-1, 0] == pytest.approx(1.0)
    # control starts at the upper bound, ends at the lower one
    assert rows[0, 3] == 1.0
    assert rows[-1, 3] == 0.0


def test_solve_secant_bressan(tmp_path):
    code = main(["solve", "--problem", "bressan", "--secant",
                 "--bracket", "3,4", "--opt-tol", "1e-12",
                 "--ode-tol", "1e-11", "--out", str(tmp_path)])
    assert code == EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text())
    assert abs(report["s"][0] - 10.0 / 3.0) <= 1e-10


def test_solve_misordered_exits_3(tmp_path, capsys):
    code = main(["solve", "--problem", "catalyst1", "--T", "1",
                 "--s0", "0.7,0.1", "--out", str(tmp_path)])
    assert code == EXIT_CONFIG
    assert "ordering" in capsys.readouterr().err


def test_solve_unknown_problem_exits_3(tmp_path):
    code = main(["solve", "--problem", "nosuch", "--s0", "0.5",
                 "--out", str(tmp_path)])
    assert code == EXIT_CONFIG


def test_solve_missing_costate_exits_3(tmp_path):
    code = main(["solve", "--problem", "catalyst2", "--T", "1",
                 "--s0", "0.1,0.7", "--out", str(tmp_path)])
    assert code == EXIT_CONFIG


def test_solve_secant_divergence_exits_2(tmp_path, capsys):
    code = main(["solve", "--problem", "jacobson", "--secant",
                 "--bracket", "4.70,4.71", "--out", str(tmp_path)])
    assert code == EXIT_SOLVER
    assert "SecantDivergence" in capsys.readouterr().err


def test_solve_with_warmstart_chain(tmp_path):
    code = main(["solve", "--problem", "catalyst1", "--T", "1",
                 "--warmstart", "--N", "100", "--rho-tv", "1e-3",
                 "--out", str(tmp_path)])
    assert code == EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["reference_errors"]["s1"] <= 1e-6


def test_report_json_round_trips(tmp_path):
    main(["solve", "--problem", "catalyst1", "--T", "1",
          "--s0", "0.1,0.7", "--out", str(tmp_path)])
    text = (tmp_path / "report.json").read_text()
    again = json.dumps(json.loads(text), indent=2) + "\n"
    assert again == text


def test_warmstart_command(tmp_path):
    code = main(["warmstart", "--problem", "catalyst1", "--T", "1",
                 "--N", "100", "--rho-tv", "1e-3", "--out", str(tmp_path)])
    assert code == EXIT_OK
    structure = json.loads((tmp_path / "structure.json").read_text())
    assert len(structure["switch_times"]) == 2
    assert structure["phase_kinds"] == ["bang-high", "singular", "bang-low"]
    header, rows = _read_csv(tmp_path / "u_profile.csv")
    assert header == ["t", "u1"]
    assert rows.shape == (100, 2)


def test_warmstart_no_structure_exits_2(tmp_path, capsys):
    code = main(["warmstart", "--problem", "catalyst1", "--T", "1",
                 "--N", "100", "--rho-tv", "0", "--out", str(tmp_path)])
    assert code == EXIT_SOLVER
    assert "NoStructure" in capsys.readouterr().err


def test_gradcheck_passes(capsys):
    code = main(["gradcheck", "--problem", "catalyst1", "--T", "1",
                 "--s0", "0.15,0.7", "--ode-tol", "1e-11"])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "d_s1" in out and "MISMATCH" not in out


def test_gradcheck_case2(capsys):
    code = main(["gradcheck", "--problem", "catalyst2", "--T", "1",
                 "--s0", "0.1,0.7", "--p0", "0.9,0.8",
                 "--ode-tol", "1e-11"])
    assert code == EXIT_OK
    assert "d_p01" in capsys.readouterr().out


def test_gradcheck_goddard(capsys):
    code = main(["gradcheck", "--problem", "goddard", "--T", "42",
                 "--s0", "13,21", "--ode-tol", "1e-11"])
    assert code == EXIT_OK
    assert "d_T" in capsys.readouterr().out


def test_profile_bressan(tmp_path, capsys):
    code = main(["profile", "--problem", "bressan", "--grid", "3.0,3.7,15",
                 "--out", str(tmp_path)])
    assert code == EXIT_OK
    header, rows = _read_csv(tmp_path / "derivative_profile.csv")
    assert header == ["s", "dC_ds1"]
    assert rows.shape == (15, 2)
    assert "1 sign changes" in capsys.readouterr().out


def test_profile_single_point(tmp_path):
    code = main(["profile", "--problem", "bressan", "--grid", "3.3,3.3,1",
                 "--out", str(tmp_path)])
    assert code == EXIT_OK
    _, rows = _read_csv(tmp_path / "derivative_profile.csv")
    assert rows.shape == (1, 2)


def test_out_dir_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv("SPA_OUT_DIR", str(tmp_path / "envout"))
    code = main(["profile", "--problem", "bressan", "--grid", "3.3,3.3,1"])
    assert code == EXIT_OK
    assert (tmp_path / "envout" / "derivative_profile.csv").exists()


def test_csv_full_precision(tmp_path):
    main(["solve", "--problem", "catalyst1", "--T", "1",
          "--s0", "0.1,0.7", "--out", str(tmp_path)])
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    # 17 significant digits survive a parse/format round trip
    for field in lines[1].split(","):
        assert float(field) == float("%.17g" % float(field))
    assert any(len(f.replace("-", "").replace(".", "")) >= 16
               for f in lines[2].split(","))


def test_solve_sweep_jobs(tmp_path):
    code = main(["solve", "--problem", "jacobson,bressan", "--secant",
                 "--bracket", "1.41,1.42", "--jobs", "2", "--out", str(tmp_path)])
    assert code == EXIT_OK
    assert (tmp_path / "jacobson" / "report.json").exists()
    assert (tmp_path / "bressan" / "report.json").exists()


def test_bad_flag_exits_config():
    assert main(["solve", "--nope"]) == EXIT_CONFIG
