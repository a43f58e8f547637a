"""Tidy-file writers for runs: two CSVs and one JSON summary.

Every float is rendered with 12 significant digits through repr-stable
formatting, and JSON keys are sorted, so identical runs produce byte-identical
files. No plotting here; the CSVs are the plotting interface.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .estimation import EstimateLog
from .world import TrajectoryLog


def fmt(v: float) -> str:
    return f"{v:.12g}"


def write_trajectory_csv(log: TrajectoryLog, path: Path) -> None:
    lines = ["t,robot_id,px,py,ux,uy,case,active_ids"]
    for n, t in enumerate(log.ts):
        for i, spec in enumerate(log.scenario.robots):
            p = log.positions[n][i]
            u = log.controls[n][i]
            active = ";".join(str(j) for j in log.actives[n][i])
            lines.append(
                f"{fmt(t)},{spec.id},{fmt(p.x)},{fmt(p.y)},"
                f"{fmt(u.x)},{fmt(u.y)},{log.cases[n][i]},{active}"
            )
    path.write_text("\n".join(lines) + "\n")


def write_estimates_csv(log: EstimateLog, path: Path) -> None:
    p = log.scenario.estimation.target_dim
    theta_cols = ",".join(f"theta_{k}" for k in range(p))
    lines = [f"t,robot_id,estimator,{theta_cols},err_norm,lambda_min_q"]
    for (robot_id, estimator), track in sorted(log.tracks.items()):
        lam = track.lambda_min_q
        for n, t in enumerate(log.ts):
            theta = ",".join(fmt(v) for v in track.theta[n])
            lam_s = fmt(lam[n]) if lam is not None else ""
            lines.append(
                f"{fmt(t)},{robot_id},{estimator},{theta},"
                f"{fmt(track.err_norm[n])},{lam_s}"
            )
    path.write_text("\n".join(lines) + "\n")


def _round12(obj):
    """Recursively rewrite floats as 12-significant-digit numbers."""
    if isinstance(obj, float):
        return float(fmt(obj))
    if isinstance(obj, dict):
        return {k: _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    return obj


def summary_dict(traj: TrajectoryLog, est: EstimateLog | None = None) -> dict:
    robots = {}
    for i, spec in enumerate(traj.scenario.robots):
        entry: dict = {
            "case_segments": traj.case_segments(i),
            "final_position": [traj.positions[-1][i].x, traj.positions[-1][i].y],
        }
        if est is not None:
            entry["final_error"] = {
                name: est.track(spec.id, name).final_error()
                for name in est.estimators
            }
            entry["failed"] = {
                name: est.track(spec.id, name).failed for name in est.estimators
            }
            if "ao" in est.estimators:
                entry["t_c"] = est.track(spec.id, "ao").t_c
            report = est.excitation.get(spec.id)
            if report is not None:
                entry["lambda_min_gram"] = report.lambda_min
                entry["nullspace_drift_rad"] = (
                    None if report.drift_undefined else report.nullspace_drift_rad
                )
        robots[str(spec.id)] = entry
    margin = traj.min_margin()
    return {
        "scenario": traj.scenario.name,
        "steps": traj.steps,
        "t_final": traj.ts[-1] if traj.ts else 0.0,
        # Nothing to collide with: keep the JSON strict, no Infinity token.
        "min_margin": margin if math.isfinite(margin) else None,
        "robots": robots,
    }


def write_summary_json(traj: TrajectoryLog, path: Path,
                       est: EstimateLog | None = None) -> None:
    doc = _round12(summary_dict(traj, est))
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def export_run(out_dir: Path, traj: TrajectoryLog,
               est: EstimateLog | None = None) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(traj, out_dir / "trajectory.csv")
    if est is not None:
        write_estimates_csv(est, out_dir / "estimates.csv")
    write_summary_json(traj, out_dir / "summary.json", est)
