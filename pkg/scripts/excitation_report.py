#!/usr/bin/env python3
"""Deep dive into one scenario's excitation and identification behavior.

Prints, per robot: the active-set case timeline, the growth of the smallest
eigenvalue of the accumulated gram, the excitation time t_c (if any), the
null-space drift of the one-dimensional regimes, and sampled estimate errors.
"""

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))  # run from a clean checkout too

from taskspy.cli import _with_target  # noqa: E402
from taskspy.estimation import run_estimation  # noqa: E402
from taskspy.scenario import load_scenario  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("scenario")
    ap.add_argument("--estimators", default="ao,ukf")
    ap.add_argument("--target", choices=("goal", "gain"), default=None)
    ap.add_argument("--samples", type=int, default=8,
                    help="number of error-curve rows to print")
    args = ap.parse_args()

    sc = load_scenario(Path(args.scenario))
    if args.target:
        sc = _with_target(sc, args.target)
    estimators = tuple(s for s in args.estimators.split(",") if s)
    est = run_estimation(sc, estimators=estimators)
    traj = est.trajectory

    print(f"{sc.name}: {traj.steps} steps of {sc.dt} s, "
          f"min margin {traj.min_margin():.6g}")
    for i, robot in enumerate(sc.robots):
        print(f"\nrobot {robot.id}")
        for label, t0, t1 in traj.case_segments(i):
            print(f"  {label:6s} {t0:8.3f} .. {t1:8.3f} s")
        exc = est.excitation.get(robot.id)
        if exc is not None:
            print(f"  gram lambda_min: {exc.lambda_min:.6g} over "
                  f"[{exc.window[0]:.3g}, {exc.window[1]:.3g}] s")
            drift = ("undefined (no one-dimensional stretch)"
                     if exc.drift_undefined
                     else f"{exc.nullspace_drift_rad:.6g} rad")
            print(f"  null-space drift: {drift}")
        stride = max(1, len(est.ts) // max(1, args.samples))
        cols = [(rid_name[1], track) for rid_name, track in sorted(est.tracks.items())
                if rid_name[0] == robot.id]
        header = "  t        " + "  ".join(f"{name:>10s}" for name, _ in cols)
        print(header)
        for k in range(0, len(est.ts), stride):
            row = f"  {est.ts[k]:7.3f}  " + "  ".join(
                f"{track.err_norm[k]:10.3e}" if k < len(track.err_norm) else
                f"{'-':>10s}"
                for _, track in cols
            )
            print(row)
        for name, track in cols:
            if track.failed:
                print(f"  {name}: FAILED ({track.failure})")
            elif name == "ao":
                t_c = "never" if track.t_c is None else f"{track.t_c:.4g} s"
                print(f"  ao: final {track.final_error():.3e}, t_c {t_c}")
            else:
                print(f"  {name}: final {track.final_error():.3e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
