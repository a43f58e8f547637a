"""File exports and the command-line interface, exit codes included."""

import json
from pathlib import Path

import pytest

from taskspy.cli import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, _with_target, main
from taskspy.estimation import run_estimation
from taskspy.export import export_run, fmt
from taskspy.regressor import TargetKind
from taskspy.scenario import load_scenario
from taskspy.world import run

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def test_fmt_twelve_significant_digits():
    assert fmt(0.1234567890123456) == "0.123456789012"
    assert fmt(1.0) == "1"
    assert fmt(-3.5e-7) == "-3.5e-07"


def test_trajectory_csv_shape(tmp_path):
    sc = load_scenario(SCENARIOS / "twin_obstacle.json")
    log = run(sc)
    export_run(tmp_path, log)
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,robot_id,px,py,ux,uy,case,active_ids"
    assert len(lines) - 1 == log.steps * len(sc.robots)
    # Duplicate-obstacle window: both ids joined in the active column.
    first = lines[1].split(",")
    assert first[6] == "KM_R1"
    assert first[7] == "0;1"


def test_estimates_csv_shape(tmp_path):
    sc = load_scenario(SCENARIOS / "open_field.json")
    est = run_estimation(sc)
    export_run(tmp_path, est.trajectory, est)
    lines = (tmp_path / "estimates.csv").read_text().splitlines()
    assert lines[0] == "t,robot_id,estimator,theta_0,theta_1,err_norm,lambda_min_q"
    assert len(lines) - 1 == 2 * len(est.ts)  # two estimators, one robot
    ao_rows = [l for l in lines[1:] if ",ao," in l]
    ukf_rows = [l for l in lines[1:] if ",ukf," in l]
    assert ao_rows and ukf_rows
    assert all(r.split(",")[6] != "" for r in ao_rows)
    assert all(r.split(",")[6] == "" for r in ukf_rows)


def test_summary_fields(tmp_path):
    sc = load_scenario(SCENARIOS / "gate_two_active.json")
    est = run_estimation(sc, estimators=("ao",))
    export_run(tmp_path, est.trajectory, est)
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert doc["scenario"] == "gate_two_active"
    assert doc["min_margin"] >= sc.safety.d_s - sc.dist_tol
    robot = doc["robots"]["0"]
    assert [seg[0] for seg in robot["case_segments"]] == ["KM_R2", "K0"]
    assert robot["failed"]["ao"] is False
    assert robot["final_error"]["ao"] < 1e-2
    assert robot["t_c"] is not None
    # Window mixes the rank-2 case with no one-dimensional stretch at all:
    # the null-space direction never exists, so drift is reported as null.
    assert robot["nullspace_drift_rad"] is None


def test_summary_stays_strict_json_without_obstacles(tmp_path):
    sc = load_scenario(SCENARIOS / "open_field.json")
    export_run(tmp_path, run(sc))
    text = (tmp_path / "summary.json").read_text()
    assert "Infinity" not in text

    def no_specials(_):
        raise AssertionError("non-strict JSON token")

    doc = json.loads(text, parse_constant=no_specials)
    assert doc["min_margin"] is None


def test_export_without_estimates(tmp_path):
    sc = load_scenario(SCENARIOS / "twin_obstacle.json")
    log = run(sc)
    export_run(tmp_path, log)
    assert (tmp_path / "trajectory.csv").is_file()
    assert (tmp_path / "summary.json").is_file()
    assert not (tmp_path / "estimates.csv").exists()


def test_with_target_override():
    sc = load_scenario(SCENARIOS / "open_field.json")
    assert _with_target(sc, "goal") is sc
    gained = _with_target(sc, "gain")
    assert gained.estimation.target is TargetKind.GAIN
    assert gained.estimation.theta0 == (1.0,)


def test_cli_simulate_and_analyze(tmp_path, capsys):
    out = tmp_path / "run"
    rc = main(["simulate", str(SCENARIOS / "twin_obstacle.json"),
               "--out", str(out), "--cross-check"])
    assert rc == EXIT_OK
    assert (out / "trajectory.csv").is_file()
    assert "min margin" in capsys.readouterr().out

    rc = main(["analyze", str(out)])
    assert rc == EXIT_OK
    text = capsys.readouterr().out
    assert "twin_obstacle" in text
    assert "KM_R1" in text


def test_cli_estimate(tmp_path, capsys):
    out = tmp_path / "run"
    rc = main(["estimate", str(SCENARIOS / "headon_stall.json"),
               "--out", str(out), "--estimators", "ao"])
    assert rc == EXIT_OK
    assert (out / "estimates.csv").is_file()
    text = capsys.readouterr().out
    assert "robot 0 ao: final error" in text

    rc = main(["analyze", str(out)])
    assert rc == EXIT_OK
    text = capsys.readouterr().out
    assert "t_c: never" in text
    assert "null-space drift" in text


def test_cli_estimate_gain_target(tmp_path):
    out = tmp_path / "run"
    rc = main(["estimate", str(SCENARIOS / "open_field.json"),
               "--out", str(out), "--target", "gain", "--estimators", "ao"])
    assert rc == EXIT_OK
    header = (out / "estimates.csv").read_text().splitlines()[0]
    assert header == "t,robot_id,estimator,theta_0,err_norm,lambda_min_q"


def test_cli_validation_errors(tmp_path, capsys):
    rc = main(["simulate", str(tmp_path / "nope.json"), "--out", str(tmp_path)])
    assert rc == EXIT_VALIDATION
    assert "error:" in capsys.readouterr().err

    rc = main(["estimate", str(SCENARIOS / "open_field.json"),
               "--out", str(tmp_path / "x"), "--estimators", "ao,magic"])
    assert rc == EXIT_VALIDATION

    rc = main(["analyze", str(tmp_path / "empty")])
    assert rc == EXIT_VALIDATION


def test_cli_runtime_error_exit_code(tmp_path, capsys):
    # gamma dt >> 1 breaks the discrete safety guarantee: the filter permits
    # an inward step that lands inside the margin, which must abort with the
    # runtime exit code.
    doc = {
        "version": 1,
        "dt": 0.001,
        "t_final": 1.0,
        "safety": {"d_s": 0.3, "gamma_cbf": 5000.0},
        "robots": [
            {"id": 0, "start": [0.0, 0.0],
             "params": {"goal": [2.0, 0.0], "k_p": 30.0}}
        ],
        "static_obstacles": [[0.31, 0.0]],
    }
    path = tmp_path / "overdriven.json"
    path.write_text(json.dumps(doc))
    rc = main(["simulate", str(path), "--out", str(tmp_path / "out")])
    assert rc == EXIT_RUNTIME
    assert "error:" in capsys.readouterr().err


def test_cli_selftest(capsys):
    rc = main(["selftest", "--n", "300", "--seed", "5"])
    assert rc == EXIT_OK
    text = capsys.readouterr().out
    assert "selftest: ok" in text
    assert "instances: 300" in text


def test_reruns_are_byte_identical(tmp_path):
    sc_path = SCENARIOS / "twin_obstacle.json"
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["simulate", str(sc_path), "--out", str(out_a)]) == EXIT_OK
    assert main(["simulate", str(sc_path), "--out", str(out_b)]) == EXIT_OK
    for name in ("trajectory.csv", "summary.json"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_estimation_reruns_are_byte_identical(tmp_path):
    sc = load_scenario(SCENARIOS / "headon_stall.json")
    a = run_estimation(sc)
    b = run_estimation(sc)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    export_run(out_a, a.trajectory, a)
    export_run(out_b, b.trajectory, b)
    for name in ("trajectory.csv", "estimates.csv", "summary.json"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
