"""Randomized self-audit of the safety filter.

Draws safe instances (robot outside the safety disc of every obstacle, so
u = 0 is always feasible and the QP can never be infeasible), solves each with
the enumeration oracle, certifies all four KKT conditions, and replays the
optimum through the per-case closed forms. The same audit backs the CLI
``selftest`` subcommand and the acceptance suite, with pinned seeds there.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from typing import NamedTuple

from .controller import (
    KKT_TOL,
    CaseLabel,
    SafetyConfig,
    TaskParams,
    build_constraints,
    classify_case,
    kkt_residuals,
    nominal_control,
    solve_closed_form,
    solve_qp_oracle,
)
from .errors import InfeasibleError
from .linalg import Vec2


class Instance(NamedTuple):
    x: Vec2
    task: TaskParams
    safety: SafetyConfig
    obstacles: tuple[Vec2, ...]


@dataclass
class AuditReport:
    n: int = 0
    infeasible: int = 0
    max_stationarity: float = 0.0
    max_primal: float = 0.0
    max_dual: float = 0.0
    max_comp: float = 0.0
    max_closed_dev: float = 0.0
    case_counts: dict[str, int] = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def max_kkt(self) -> float:
        return max(self.max_stationarity, self.max_primal,
                   self.max_dual, self.max_comp)

    def ok(self, kkt_tol: float = KKT_TOL, closed_tol: float = 1e-8) -> bool:
        return (self.infeasible == 0 and self.max_kkt <= kkt_tol
                and self.max_closed_dev <= closed_tol)

    def lines(self) -> list[str]:
        cases = " ".join(f"{k}={v}" for k, v in sorted(self.case_counts.items()))
        return [
            f"instances: {self.n}  infeasible: {self.infeasible}",
            f"kkt residuals: stationarity {self.max_stationarity:.3e}"
            f"  primal {self.max_primal:.3e}  dual {self.max_dual:.3e}"
            f"  comp {self.max_comp:.3e}",
            f"closed-form deviation: {self.max_closed_dev:.3e}",
            f"cases: {cases}",
            f"elapsed: {self.elapsed:.2f} s",
        ]


def sample_instance(rng: random.Random, m_max: int = 6) -> Instance:
    """One random safe instance, biased toward interesting geometry.

    Obstacles are kept at distance >= d_s, half of them hugging the boundary
    where the filter actually bites. A slice of instances gets an exact
    duplicate obstacle (dependent coincident rows) or a boundary pair placed
    symmetrically about the robot (dependent opposite rows).
    """
    x = Vec2(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0))
    goal = Vec2(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0))
    task = TaskParams(goal=goal, k_p=rng.uniform(0.2, 3.0))
    safety = SafetyConfig(d_s=rng.uniform(0.1, 0.6),
                          gamma_cbf=rng.uniform(0.5, 4.0))

    m = rng.randint(0, m_max)
    obstacles: list[Vec2] = []
    for _ in range(m):
        ang = rng.uniform(0.0, 2.0 * math.pi)
        if rng.random() < 0.5:
            dist = safety.d_s * rng.uniform(1.0, 1.2)
        else:
            dist = safety.d_s + rng.uniform(0.0, 1.5)
        obstacles.append(Vec2(x.x + dist * math.cos(ang),
                              x.y + dist * math.sin(ang)))

    roll = rng.random()
    if obstacles and roll < 0.20 and len(obstacles) < m_max:
        obstacles.append(obstacles[0])
    elif roll < 0.30 and len(obstacles) + 2 <= m_max:
        ang = rng.uniform(0.0, 2.0 * math.pi)
        ox = safety.d_s * math.cos(ang)
        oy = safety.d_s * math.sin(ang)
        obstacles.append(Vec2(x.x + ox, x.y + oy))
        obstacles.append(Vec2(x.x - ox, x.y - oy))
    return Instance(x=x, task=task, safety=safety, obstacles=tuple(obstacles))


def audit_instance(inst: Instance, report: AuditReport) -> None:
    cons = build_constraints(inst.x, inst.obstacles, inst.safety)
    u_hat = nominal_control(inst.x, inst.task)
    try:
        sol = solve_qp_oracle(cons, u_hat)
    except InfeasibleError:
        report.infeasible += 1
        return
    st, pr, du, co = kkt_residuals(cons, sol.u_star, sol.mu, u_hat)
    report.max_stationarity = max(report.max_stationarity, st)
    report.max_primal = max(report.max_primal, pr)
    report.max_dual = max(report.max_dual, du)
    report.max_comp = max(report.max_comp, co)

    # Independent re-derivation of the tight set guards the oracle's report.
    tight = tuple(
        j for j in range(len(cons))
        if abs(cons.residual(j, sol.u_star)) <= KKT_TOL
    )
    if tight != sol.active:
        raise AssertionError(
            f"oracle reported active set {sol.active}, residual scan says {tight}"
        )
    case = classify_case(cons, tight)
    u_closed = solve_closed_form(case, cons, tight, u_hat)
    dev = (u_closed - sol.u_star).norm()
    report.max_closed_dev = max(report.max_closed_dev, dev)
    report.case_counts[case.value] = report.case_counts.get(case.value, 0) + 1


def kkt_audit(n: int = 10_000, seed: int = 0, m_max: int = 6) -> AuditReport:
    rng = random.Random(seed)
    report = AuditReport(n=n)
    t0 = time.perf_counter()
    for _ in range(n):
        audit_instance(sample_instance(rng, m_max), report)
    report.elapsed = time.perf_counter() - t0
    return report
