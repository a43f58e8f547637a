"""Synchronous multirobot world stepping.

Every robot's constraints and control are computed from one frozen snapshot
of positions (ascending id order), then all positions advance together by
explicit Euler. Static obstacles enter each robot's constraint list after the
other robots. The run is fully deterministic; re-running a scenario must
reproduce identical bytes downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .controller import (
    ConstraintSet,
    ControlSolution,
    build_constraints,
    nominal_control,
    solve_closed_form,
    solve_qp_oracle,
)
from .errors import SafetyViolationError, TaskSpyError
from .linalg import Vec2
from .scenario import Scenario

GOAL_STOP_TOL = 1e-3
# Any constraint offset this far negative means the state itself violates
# safety, independent of the distance check.
B_VIOLATION_TOL = -1e-9


@dataclass(frozen=True)
class WorldState:
    """Positions aligned with the scenario's (id-sorted) robot list."""

    positions: tuple[Vec2, ...]
    t: float = 0.0


@dataclass
class TrajectoryLog:
    """Per-step, per-robot record of one simulation run."""

    scenario: Scenario
    ts: list[float] = field(default_factory=list)
    positions: list[tuple[Vec2, ...]] = field(default_factory=list)
    controls: list[tuple[Vec2, ...]] = field(default_factory=list)
    cases: list[tuple[str, ...]] = field(default_factory=list)
    actives: list[tuple[tuple[int, ...], ...]] = field(default_factory=list)
    duals: list[tuple[tuple[float, ...], ...]] = field(default_factory=list)
    margins: list[float] = field(default_factory=list)
    max_closed_form_dev: float = 0.0

    @property
    def steps(self) -> int:
        return len(self.ts)

    def min_margin(self) -> float:
        return min(self.margins) if self.margins else math.inf

    def case_segments(self, robot_index: int) -> list[tuple[str, float, float]]:
        """Compress one robot's case column into [label, t_start, t_end] runs."""
        segments: list[tuple[str, float, float]] = []
        dt = self.scenario.dt
        for t, row in zip(self.ts, self.cases):
            label = row[robot_index]
            if segments and segments[-1][0] == label:
                segments[-1] = (label, segments[-1][1], t + dt)
            else:
                segments.append((label, t, t + dt))
        return segments


def obstacle_positions(world: WorldState, scenario: Scenario, i: int) -> tuple[Vec2, ...]:
    """Constraint sources for robot index i: other robots (id order), then statics."""
    others = tuple(p for j, p in enumerate(world.positions) if j != i)
    return others + scenario.static_obstacles


def step_controls(
    world: WorldState, scenario: Scenario
) -> list[tuple[ConstraintSet, ControlSolution]]:
    """Constraints and QP optimum for every robot from the frozen snapshot."""
    out = []
    for i, spec in enumerate(scenario.robots):
        x = world.positions[i]
        cons = build_constraints(x, obstacle_positions(world, scenario, i), scenario.safety)
        for j, (_, b) in enumerate(cons.rows):
            if b < B_VIOLATION_TOL:
                raise SafetyViolationError(
                    f"robot {spec.id}: constraint {j} already violated (b={b})"
                )
        sol = solve_qp_oracle(cons, nominal_control(x, spec.params))
        out.append((cons, sol))
    return out


def _pair_margin(world: WorldState, scenario: Scenario) -> float:
    worst = math.inf
    pts = world.positions
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            worst = min(worst, (pts[i] - pts[j]).norm())
        for ob in scenario.static_obstacles:
            worst = min(worst, (pts[i] - ob).norm())
    return worst


def step_world(
    world: WorldState, scenario: Scenario
) -> tuple[WorldState, list[tuple[ConstraintSet, ControlSolution]]]:
    """Advance one step; raises SafetyViolationError on a breached margin."""
    controls = step_controls(world, scenario)
    dt = scenario.dt
    new_positions = tuple(
        p + sol.u_star * dt for p, (_, sol) in zip(world.positions, controls)
    )
    new_world = WorldState(positions=new_positions, t=world.t + dt)
    margin = _pair_margin(new_world, scenario)
    if margin < scenario.safety.d_s - scenario.dist_tol:
        raise SafetyViolationError(
            f"pairwise distance {margin} fell below "
            f"d_s - dist_tol = {scenario.safety.d_s - scenario.dist_tol} at t={new_world.t}"
        )
    return new_world, controls


def all_at_goal(world: WorldState, scenario: Scenario, tol: float = GOAL_STOP_TOL) -> bool:
    return all(
        (p - spec.params.goal).norm() <= tol
        for p, spec in zip(world.positions, scenario.robots)
    )


def run(scenario: Scenario, cross_check: bool = False) -> TrajectoryLog:
    """Simulate the scenario to t_final or until every robot reaches its goal.

    With cross_check on, the closed-form branch solution is evaluated at every
    instant and compared against the oracle; a deviation beyond 1e-8 raises.
    """
    log = TrajectoryLog(scenario=scenario)
    world = WorldState(positions=tuple(r.start for r in scenario.robots))
    for _ in range(scenario.n_steps):
        new_world, controls = step_world(world, scenario)
        _record(log, world, controls, cross_check)
        world = new_world
        if all_at_goal(world, scenario):
            break
    return log


def _record(
    log: TrajectoryLog,
    world: WorldState,
    controls: list[tuple[ConstraintSet, ControlSolution]],
    cross_check: bool,
) -> None:
    log.ts.append(world.t)
    log.positions.append(world.positions)
    log.controls.append(tuple(sol.u_star for _, sol in controls))
    log.cases.append(tuple(sol.case_label.value for _, sol in controls))
    log.actives.append(tuple(sol.active for _, sol in controls))
    log.duals.append(tuple(sol.mu for _, sol in controls))
    log.margins.append(_pair_margin(world, log.scenario))
    if cross_check:
        for spec, x, (cons, sol) in zip(log.scenario.robots, world.positions, controls):
            u_cf = solve_closed_form(
                sol.case_label, cons, sol.active, nominal_control(x, spec.params)
            )
            dev = (u_cf - sol.u_star).norm()
            log.max_closed_form_dev = max(log.max_closed_form_dev, dev)
            if dev > 1e-8:
                raise TaskSpyError(
                    f"closed form deviates from oracle by {dev} "
                    f"(robot {spec.id}, t={world.t}, case {sol.case_label.value})"
                )
