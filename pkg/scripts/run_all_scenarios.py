#!/usr/bin/env python3
"""Run every bundled scenario, export artifacts, print one summary row each.

Simulation always cross-checks the closed-form branch against the QP oracle;
estimation runs the requested estimator subset. Output directories are one
per scenario under --out.
"""

import argparse
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))  # run from a clean checkout too

from taskspy.estimation import run_estimation  # noqa: E402
from taskspy.export import export_run  # noqa: E402
from taskspy.scenario import load_scenario  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario-dir", default=str(ROOT / "scenarios"))
    ap.add_argument("--out", default=str(ROOT / "out"))
    ap.add_argument("--estimators", default="ao,ukf")
    args = ap.parse_args()

    estimators = tuple(s for s in args.estimators.split(",") if s)
    paths = sorted(Path(args.scenario_dir).glob("*.json"))
    if not paths:
        print(f"no scenarios under {args.scenario_dir}", file=sys.stderr)
        return 2

    print(f"{'scenario':<20} {'steps':>6} {'margin':>8} {'dev':>9} "
          f"{'wall':>6}  finals")
    for path in paths:
        sc = load_scenario(path)
        t0 = time.perf_counter()
        est = run_estimation(sc, estimators=estimators, cross_check=True)
        wall = time.perf_counter() - t0
        traj = est.trajectory
        finals = []
        for (rid, name), track in sorted(est.tracks.items()):
            tag = f"{rid}/{name}"
            finals.append(
                f"{tag}=FAILED" if track.failed
                else f"{tag}={track.final_error():.2e}"
            )
        export_run(Path(args.out) / sc.name, traj, est)
        print(f"{sc.name:<20} {traj.steps:>6} {traj.min_margin():>8.4f} "
              f"{traj.max_closed_form_dev:>9.2e} {wall:>5.1f}s  "
              + " ".join(finals))
    print(f"artifacts under {args.out}/<scenario>/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
