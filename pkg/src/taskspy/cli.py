"""Command-line front end.

Exit codes: 0 success, 2 scenario/input validation problem, 3 runtime failure
(infeasible QP, safety violation, failed self-audit).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .errors import ScenarioParseError, ScenarioValidationError, TaskSpyError
from .estimation import KNOWN_ESTIMATORS, run_estimation
from .export import export_run
from .regressor import TargetKind
from .scenario import Scenario, load_scenario
from .selftest import kkt_audit
from .world import run

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _with_target(scenario: Scenario, target: str) -> Scenario:
    """Override the identification target, resetting theta0 to the default
    prior when its dimension no longer fits."""
    kind = TargetKind.GOAL if target == "goal" else TargetKind.GAIN
    est = scenario.estimation
    if est.target is kind:
        return scenario
    theta0 = (0.0, 0.0) if kind is TargetKind.GOAL else (1.0,)
    est = dataclasses.replace(est, target=kind, theta0=theta0)
    return dataclasses.replace(scenario, estimation=est)


def _cmd_simulate(args: argparse.Namespace) -> int:
    scenario = load_scenario(Path(args.scenario))
    log = run(scenario, cross_check=args.cross_check)
    export_run(Path(args.out), log)
    print(f"{scenario.name}: {log.steps} steps, min margin {log.min_margin():.6g}")
    return EXIT_OK


def _cmd_estimate(args: argparse.Namespace) -> int:
    scenario = load_scenario(Path(args.scenario))
    if args.target:
        scenario = _with_target(scenario, args.target)
    estimators = tuple(s for s in args.estimators.split(",") if s)
    for name in estimators:
        if name not in KNOWN_ESTIMATORS:
            raise ScenarioValidationError(
                f"--estimators: unknown estimator '{name}'"
            )
    log = run_estimation(scenario, estimators=estimators)
    export_run(Path(args.out), log.trajectory, log)
    for (robot_id, name), track in sorted(log.tracks.items()):
        status = f"FAILED ({track.failure})" if track.failed else (
            f"final error {track.final_error():.6g}"
        )
        print(f"robot {robot_id} {name}: {status}")
    return EXIT_OK


def _cmd_analyze(args: argparse.Namespace) -> int:
    path = Path(args.out_dir) / "summary.json"
    if not path.is_file():
        raise ScenarioParseError(f"no summary.json under {args.out_dir}")
    doc = json.loads(path.read_text())
    margin = doc["min_margin"]
    print(f"scenario: {doc['scenario']}  steps: {doc['steps']}  "
          f"min margin: {'n/a' if margin is None else f'{margin:.6g}'}")
    for robot_id, entry in sorted(doc["robots"].items(), key=lambda kv: int(kv[0])):
        print(f"robot {robot_id}:")
        for label, t0, t1 in entry["case_segments"]:
            print(f"  {label:6s} {t0:.4g} .. {t1:.4g} s")
        if "lambda_min_gram" in entry:
            print(f"  lambda_min(Q): {entry['lambda_min_gram']:.6g}")
        drift = entry.get("nullspace_drift_rad")
        if drift is not None:
            print(f"  null-space drift: {drift:.6g} rad")
        if "t_c" in entry:
            t_c = entry["t_c"]
            print(f"  t_c: {'never' if t_c is None else f'{t_c:.4g} s'}")
    return EXIT_OK


def _cmd_selftest(args: argparse.Namespace) -> int:
    report = kkt_audit(n=args.n, seed=args.seed)
    for line in report.lines():
        print(line)
    if not report.ok():
        print("selftest: FAIL")
        return EXIT_RUNTIME
    print("selftest: ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taskspy",
        description="Safety-filtered navigation with online task identification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a scenario, write trajectory files")
    p_sim.add_argument("scenario")
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--cross-check", action="store_true",
                       help="replay every optimum through the closed forms")
    p_sim.set_defaults(func=_cmd_simulate)

    p_est = sub.add_parser("estimate", help="run a scenario with estimators attached")
    p_est.add_argument("scenario")
    p_est.add_argument("--out", required=True)
    p_est.add_argument("--estimators", default="ao,ukf",
                       help="comma-separated subset of: ao,ukf")
    p_est.add_argument("--target", choices=("goal", "gain"), default=None,
                       help="override the scenario's identification target")
    p_est.set_defaults(func=_cmd_estimate)

    p_an = sub.add_parser("analyze", help="summarize a finished run directory")
    p_an.add_argument("out_dir")
    p_an.set_defaults(func=_cmd_analyze)

    p_self = sub.add_parser("selftest", help="randomized KKT and closed-form audit")
    p_self.add_argument("--n", type=int, default=10_000)
    p_self.add_argument("--seed", type=int, default=0)
    p_self.set_defaults(func=_cmd_selftest)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioParseError, ScenarioValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TaskSpyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
