"""Online identification harness: estimators fed by the running world.

Each robot gets an independent adaptive-observer track and (optionally) a UKF
track, both consuming the same noise-free measurements: the robot's position,
the velocity the safety filter emitted, and the positions of everything it is
avoiding. Estimator tracks are isolated; a failure inside one robot's
estimator marks that track failed and the rest of the run continues.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .controller import classify_case
from .errors import TaskSpyError
from .linalg import Vec2, min_eig_sym
from .observer import ObserverState, ao_init, ao_step
from .regressor import (
    ExcitationReport,
    Regressor,
    TargetKind,
    TargetParam,
    build_regressor,
    detect_active_set,
    excitation_gram,
)
from .scenario import Scenario
from .ukf import InstantSnapshot, UkfState, ukf_init, ukf_step
from .world import (
    TrajectoryLog,
    WorldState,
    _record,
    all_at_goal,
    obstacle_positions,
    step_world,
)

KNOWN_ESTIMATORS = ("ao", "ukf")


@dataclass
class EstimateTrack:
    """One estimator's trajectory of estimates for one robot."""

    robot_id: int
    estimator: str
    theta: list[tuple[float, ...]] = field(default_factory=list)
    err_norm: list[float] = field(default_factory=list)
    lambda_min_q: list[float] | None = None
    t_c: float | None = None
    failed: bool = False
    failure: str = ""

    def final_error(self) -> float | None:
        return self.err_norm[-1] if self.err_norm else None


@dataclass
class EstimateLog:
    """Everything the estimation run produced, trajectory included."""

    scenario: Scenario
    estimators: tuple[str, ...]
    ts: list[float] = field(default_factory=list)
    tracks: dict[tuple[int, str], EstimateTrack] = field(default_factory=dict)
    cases: dict[int, list[str]] = field(default_factory=dict)
    excitation: dict[int, ExcitationReport] = field(default_factory=dict)
    trajectory: TrajectoryLog | None = None

    def track(self, robot_id: int, estimator: str) -> EstimateTrack:
        return self.tracks[(robot_id, estimator)]


def true_theta(params, kind: TargetKind) -> np.ndarray:
    if kind is TargetKind.GOAL:
        return np.array([params.goal.x, params.goal.y])
    return np.array([params.k_p])


def target_for(params, kind: TargetKind) -> TargetParam:
    """The observer knows the complement of what it is identifying."""
    if kind is TargetKind.GOAL:
        return TargetParam.goal(known_k_p=params.k_p)
    return TargetParam.gain(known_goal=params.goal)


def run_estimation(
    scenario: Scenario,
    estimators: tuple[str, ...] = ("ao", "ukf"),
    cross_check: bool = False,
) -> EstimateLog:
    """Step the world and every enabled estimator together.

    Measurements are consumed at each pre-step snapshot: position x(t) and the
    exact filtered velocity u(t), or its one-step-lagged finite difference if
    the scenario asks for that.
    """
    for name in estimators:
        if name not in KNOWN_ESTIMATORS:
            raise TaskSpyError(f"unknown estimator '{name}'")
    est_spec = scenario.estimation
    kind = est_spec.target
    theta0 = np.array(est_spec.theta0)
    fd_velocity = est_spec.velocity_source == "finite_difference"

    log = EstimateLog(scenario=scenario, estimators=tuple(estimators))
    traj = TrajectoryLog(scenario=scenario)
    log.trajectory = traj

    targets = [target_for(r.params, kind) for r in scenario.robots]
    truths = [true_theta(r.params, kind) for r in scenario.robots]
    ao_states = [ao_init(theta0, r.start, est_spec.ao) for r in scenario.robots]
    ukf_states = [ukf_init(theta0, est_spec.ukf) for _ in scenario.robots]
    regs: list[list[Regressor]] = [[] for _ in scenario.robots]
    for r in scenario.robots:
        log.cases[r.id] = []
        for name in estimators:
            log.tracks[(r.id, name)] = EstimateTrack(
                robot_id=r.id,
                estimator=name,
                lambda_min_q=[] if name == "ao" else None,
            )

    world = WorldState(positions=tuple(r.start for r in scenario.robots))
    prev_positions: tuple[Vec2, ...] | None = None

    for _ in range(scenario.n_steps):
        new_world, controls = step_world(world, scenario)
        _record(traj, world, controls, cross_check)
        log.ts.append(world.t)

        for i, spec in enumerate(scenario.robots):
            cons, sol = controls[i]
            x = world.positions[i]
            if fd_velocity and prev_positions is None:
                # No velocity history yet; estimators start next step.
                _snapshot_estimates(log, estimators, spec.id,
                                    ao_states[i], ukf_states[i], truths[i], "")
                continue
            if fd_velocity:
                u_meas = (x - prev_positions[i]) * (1.0 / scenario.dt)
            else:
                u_meas = sol.u_star

            active = detect_active_set(cons, u_meas, est_spec.eps_active)
            case = classify_case(cons, active)
            if "ao" in estimators:
                track = log.track(spec.id, "ao")
                if not track.failed:
                    try:
                        reg = build_regressor(x, cons, active, targets[i])
                        ao_states[i] = ao_step(ao_states[i], x, reg, est_spec.ao)
                        regs[i].append(reg)
                    except TaskSpyError as exc:
                        track.failed = True
                        track.failure = str(exc)
            if "ukf" in estimators:
                track = log.track(spec.id, "ukf")
                if not track.failed:
                    try:
                        snap = InstantSnapshot(
                            x=x,
                            obstacles=obstacle_positions(world, scenario, i),
                            safety=scenario.safety,
                            target=targets[i],
                        )
                        ukf_states[i] = ukf_step(
                            ukf_states[i], snap, u_meas, est_spec.ukf
                        )
                    except TaskSpyError as exc:
                        track.failed = True
                        track.failure = str(exc)
            _snapshot_estimates(
                log, estimators, spec.id,
                ao_states[i], ukf_states[i], truths[i], case.value,
            )

        prev_positions = world.positions
        world = new_world
        if all_at_goal(world, scenario):
            break

    for i, spec in enumerate(scenario.robots):
        if regs[i]:
            log.excitation[spec.id] = excitation_gram(
                regs[i], scenario.dt, t0=log.ts[0] if log.ts else 0.0
            )
    return log


def _snapshot_estimates(
    log: EstimateLog,
    estimators: tuple[str, ...],
    robot_id: int,
    ao_state: ObserverState,
    ukf_state: UkfState,
    truth: np.ndarray,
    case_value: str,
) -> None:
    if "ao" in estimators:
        track = log.track(robot_id, "ao")
        track.theta.append(tuple(float(v) for v in ao_state.theta_hat))
        track.err_norm.append(float(np.linalg.norm(ao_state.theta_hat - truth)))
        track.lambda_min_q.append(min_eig_sym(ao_state.q))
        track.t_c = ao_state.t_c
    if "ukf" in estimators:
        track = log.track(robot_id, "ukf")
        track.theta.append(tuple(float(v) for v in ukf_state.mean))
        track.err_norm.append(float(np.linalg.norm(ukf_state.mean - truth)))
    log.cases[robot_id].append(case_value)
