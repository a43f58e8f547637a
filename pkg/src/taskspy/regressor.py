"""Linear-in-parameters decomposition of the filtered control law.

For each active-set regime the observed velocity factors as
u = G(x) theta + f(x), where theta is the unknown being identified (goal
position, 2 entries, or proportional gain, 1 entry) and everything else in
G and f is known to the observer. The rank-2 regime yields G = 0: the
measurement carries no information about theta there, by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .controller import CaseLabel, ConstraintSet, classify_case, _one_dim_coefficient
from .errors import DimensionMismatchError, EmptyWindowError
from .linalg import DEFAULT_RANK_TOL, Vec2, min_eig_sym, pinv_k2

DETECT_EPS = 1e-6


class TargetKind(Enum):
    GOAL = "goal"
    GAIN = "gain"


@dataclass(frozen=True)
class TargetParam:
    """Which task parameter is unknown, plus the known complement."""

    kind: TargetKind
    known_goal: Vec2 | None = None
    known_k_p: float | None = None

    @staticmethod
    def goal(known_k_p: float) -> "TargetParam":
        if not (math.isfinite(known_k_p) and known_k_p > 0.0):
            raise ValueError(f"known_k_p must be positive, got {known_k_p}")
        return TargetParam(TargetKind.GOAL, known_k_p=known_k_p)

    @staticmethod
    def gain(known_goal: Vec2) -> "TargetParam":
        if not known_goal.is_finite():
            raise ValueError("known_goal must be finite")
        return TargetParam(TargetKind.GAIN, known_goal=known_goal)

    @property
    def p(self) -> int:
        return 2 if self.kind is TargetKind.GOAL else 1


@dataclass(frozen=True)
class Regressor:
    """One instant of the decomposition u = G theta + f.

    v1 is the unit constraint direction in the one-dimensional regimes (the
    null-space direction of G for the goal target); None otherwise.
    """

    g: np.ndarray
    f: Vec2
    case_label: CaseLabel
    v1: Vec2 | None = None

    def predict(self, theta: np.ndarray) -> Vec2:
        out = self.g @ np.asarray(theta, dtype=float)
        return Vec2(float(out[0]) + self.f.x, float(out[1]) + self.f.y)


@dataclass(frozen=True)
class ExcitationReport:
    """Integrated excitation over a window of regressor samples."""

    gram: np.ndarray
    lambda_min: float
    nullspace_drift_rad: float
    window: tuple[float, float]
    drift_undefined: bool = False


def detect_active_set(
    cons: ConstraintSet, u_meas: Vec2, eps: float = DETECT_EPS
) -> tuple[int, ...]:
    """Indices whose constraint residual at the measured velocity is < eps."""
    return tuple(
        j for j in range(len(cons.rows)) if abs(cons.residual(j, u_meas)) < eps
    )


def build_regressor(
    x: Vec2,
    cons: ConstraintSet,
    active: Sequence[int],
    target: TargetParam,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> Regressor:
    """Decompose the filtered law at one instant for the chosen target."""
    case = classify_case(cons, active, rank_tol)
    p = target.p

    if case is CaseLabel.KM_R2:
        rows = [cons.rows[j][0] for j in active]
        b = [cons.rows[j][1] for j in active]
        f = pinv_k2(rows, rank_tol).apply(b)
        return Regressor(g=np.zeros((2, p)), f=f, case_label=case)

    if case is CaseLabel.K0:
        if target.kind is TargetKind.GOAL:
            k_p = target.known_k_p
            g = np.array([[k_p, 0.0], [0.0, k_p]])
            return Regressor(g=g, f=Vec2(-k_p * x.x, -k_p * x.y), case_label=case)
        d = x - target.known_goal
        return Regressor(
            g=np.array([[-d.x], [-d.y]]), f=Vec2(0.0, 0.0), case_label=case
        )

    v1, v2, c = _one_dim_coefficient(cons, active)
    base = Vec2(v1.x * c, v1.y * c)
    # Projector onto the unconstrained direction.
    proj = np.array(
        [[v2.x * v2.x, v2.x * v2.y], [v2.y * v2.x, v2.y * v2.y]]
    )
    if target.kind is TargetKind.GOAL:
        k_p = target.known_k_p
        px = proj @ np.array([x.x, x.y])
        f = Vec2(base.x - k_p * float(px[0]), base.y - k_p * float(px[1]))
        return Regressor(g=k_p * proj, f=f, case_label=case, v1=v1)
    d = x - target.known_goal
    pd = proj @ np.array([d.x, d.y])
    return Regressor(
        g=np.array([[-float(pd[0])], [-float(pd[1])]]),
        f=base,
        case_label=case,
        v1=v1,
    )


def nullspace_drift(v1_series: Sequence[Vec2]) -> float:
    """Largest unsigned angle between any sample direction and the first one.

    Antipodal samples fold onto the same line, so a sign flip of the
    constraint direction does not count as drift.
    """
    if len(v1_series) < 2:
        return 0.0
    v0 = v1_series[0]
    worst = 0.0
    for v in v1_series[1:]:
        c = abs(v.dot(v0))
        c = min(1.0, c)
        worst = max(worst, math.acos(c))
    return worst


def excitation_gram(
    regs: Sequence[Regressor], dt: float, t0: float = 0.0
) -> ExcitationReport:
    """Riemann sum of G^T G over the window, plus drift diagnostics.

    The gram here is raw (unfiltered) and diagnostic; the observer's own Q is
    what gates the excitation-time latch.
    """
    if not regs:
        raise EmptyWindowError("excitation window has no samples")
    p = regs[0].g.shape[1]
    gram = np.zeros((p, p))
    v1s: list[Vec2] = []
    saw_rank2 = False
    for r in regs:
        if r.g.shape != (2, p):
            raise DimensionMismatchError(
                f"regressor shape {r.g.shape} does not match (2, {p})"
            )
        gram += (r.g.T @ r.g) * dt
        if r.v1 is not None:
            v1s.append(r.v1)
        if r.case_label is CaseLabel.KM_R2:
            saw_rank2 = True
    drift_undefined = saw_rank2 and not v1s
    return ExcitationReport(
        gram=gram,
        lambda_min=min_eig_sym(gram),
        nullspace_drift_rad=nullspace_drift(v1s),
        window=(t0, t0 + len(regs) * dt),
        drift_undefined=drift_undefined,
    )
