"""Safety-filtered velocity controller and its closed-form reconstruction.

The ego robot runs a proportional go-to-goal law filtered through a minimally
invasive quadratic program: minimize ||u - u_hat||^2 subject to one linear
half-plane constraint per obstacle. `solve_qp_oracle` solves that QP exactly
by enumerating candidate active sets and certifying the KKT conditions.
`solve_closed_form` reproduces the optimum from the active-set geometry alone,
one branch per rank regime, which is what makes the task parameters appear
linearly in the observed velocity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Sequence

from .errors import (
    CoincidentObstacleError,
    DegenerateConstraintError,
    InconsistentGeometryError,
    InfeasibleError,
)
from .linalg import DEFAULT_RANK_TOL, Vec2, pinv_k2, rot90, svd_k2

EPS_ACTIVE = 1e-6
KKT_TOL = 1e-9
# Relative determinant threshold below which a constraint pair is treated as
# dependent and skipped during enumeration (singletons cover it).
PAIR_DET_TOL = 1e-12
MIN_ROW_NORM = 1e-12


class CaseLabel(Enum):
    K0 = "K0"
    K1 = "K1"
    KM_R1 = "KM_R1"
    KM_R2 = "KM_R2"


class PairKind(Enum):
    COINCIDENT = "coincident"
    OPPOSITE = "opposite"
    NOT_DEPENDENT = "not_dependent"


@dataclass(frozen=True)
class TaskParams:
    """Goal position and proportional gain of one robot."""

    goal: Vec2
    k_p: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.k_p) and self.k_p > 0.0):
            raise ValueError(f"k_p must be finite and positive, got {self.k_p}")
        if not self.goal.is_finite():
            raise ValueError("goal must be finite")


@dataclass(frozen=True)
class SafetyConfig:
    """Safety distance and barrier aggressiveness of the filter."""

    d_s: float
    gamma_cbf: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.d_s) and self.d_s > 0.0):
            raise ValueError(f"d_s must be finite and positive, got {self.d_s}")
        if not (math.isfinite(self.gamma_cbf) and self.gamma_cbf > 0.0):
            raise ValueError(
                f"gamma_cbf must be finite and positive, got {self.gamma_cbf}"
            )


@dataclass(frozen=True)
class ConstraintSet:
    """Half-plane rows a_j . u <= b_j, ordered like the obstacle list."""

    rows: tuple[tuple[Vec2, float], ...]

    def __len__(self) -> int:
        return len(self.rows)

    def residual(self, j: int, u: Vec2) -> float:
        a, b = self.rows[j]
        return a.dot(u) - b


@dataclass(frozen=True)
class ControlSolution:
    """QP optimum with its duals and residual-detected active set."""

    u_star: Vec2
    mu: tuple[float, ...]
    active: tuple[int, ...]
    case_label: CaseLabel


def nominal_control(x: Vec2, params: TaskParams) -> Vec2:
    """Proportional law u_hat = -k_p (x - goal)."""
    return (params.goal - x) * params.k_p


def build_constraints(
    x: Vec2, obstacles: Sequence[Vec2], cfg: SafetyConfig
) -> ConstraintSet:
    """One row per obstacle: a_j = x_j - x, b_j = gamma/2 (||x - x_j||^2 - d_s^2)."""
    rows = []
    half_gamma = 0.5 * cfg.gamma_cbf
    ds_sq = cfg.d_s * cfg.d_s
    for j, xo in enumerate(obstacles):
        d = x - xo
        dist_sq = d.norm_sq()
        if dist_sq < MIN_ROW_NORM * MIN_ROW_NORM:
            raise CoincidentObstacleError(
                f"obstacle {j} coincides with the robot position"
            )
        rows.append((-d, half_gamma * (dist_sq - ds_sq)))
    return ConstraintSet(tuple(rows))


def kkt_residuals(
    cons: ConstraintSet, u: Vec2, mu: Sequence[float], u_hat: Vec2
) -> tuple[float, float, float, float]:
    """Worst-case violations of (stationarity, primal, dual, complementarity)."""
    sx = u.x - u_hat.x
    sy = u.y - u_hat.y
    primal = 0.0
    dual = 0.0
    comp = 0.0
    for (a, b), m in zip(cons.rows, mu):
        sx += 0.5 * m * a.x
        sy += 0.5 * m * a.y
        r = a.dot(u) - b
        primal = max(primal, r)
        dual = max(dual, -m)
        comp = max(comp, abs(m * r))
    return math.hypot(sx, sy), primal, dual, comp


def _primal_feasible(cons: ConstraintSet, u: Vec2, tol: float) -> bool:
    for a, b in cons.rows:
        if a.x * u.x + a.y * u.y - b > tol:
            return False
    return True


def solve_qp_oracle(
    cons: ConstraintSet,
    u_hat: Vec2,
    kkt_tol: float = KKT_TOL,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> ControlSolution:
    """Exact QP solve by active-set enumeration.

    Candidates are tried in a fixed order (empty set, singletons by index,
    pairs lexicographically) and the first one passing all four KKT checks
    wins. Raises InfeasibleError when nothing certifies, which for this
    constraint family can only happen from an already-violated state.

    The reported active set contains the rows tight at the optimum (residual
    within kkt_tol), which is what the per-case closed forms are defined on.
    Thresholded detection from measured velocities is the estimation side's
    job and lives elsewhere.
    """
    m = len(cons.rows)

    accepted: tuple[Vec2, dict[int, float]] | None = None

    if _primal_feasible(cons, u_hat, kkt_tol):
        accepted = (u_hat, {})
    if accepted is None:
        for j in range(m):
            a, b = cons.rows[j]
            nn = a.norm_sq()
            if nn < MIN_ROW_NORM * MIN_ROW_NORM:
                continue
            mu_j = 2.0 * (a.dot(u_hat) - b) / nn
            if mu_j < -kkt_tol:
                continue
            u = Vec2(u_hat.x - 0.5 * mu_j * a.x, u_hat.y - 0.5 * mu_j * a.y)
            if _primal_feasible(cons, u, kkt_tol):
                accepted = (u, {j: mu_j})
                break
    if accepted is None:
        for i, j in combinations(range(m), 2):
            ai, bi = cons.rows[i]
            aj, bj = cons.rows[j]
            det = ai.x * aj.y - ai.y * aj.x
            if abs(det) <= PAIR_DET_TOL * ai.norm() * aj.norm():
                continue
            u = Vec2(
                (bi * aj.y - bj * ai.y) / det,
                (ai.x * bj - aj.x * bi) / det,
            )
            # Stationarity: u_hat - u = (mu_i a_i + mu_j a_j) / 2.
            rx = u_hat.x - u.x
            ry = u_hat.y - u.y
            mu_i = 2.0 * (rx * aj.y - aj.x * ry) / det
            mu_j = 2.0 * (ai.x * ry - rx * ai.y) / det
            if mu_i < -kkt_tol or mu_j < -kkt_tol:
                continue
            if _primal_feasible(cons, u, kkt_tol):
                accepted = (u, {i: mu_i, j: mu_j})
                break

    if accepted is None:
        raise InfeasibleError(
            "no active set satisfies the KKT conditions; "
            "the state already violates a safety constraint"
        )

    u_star, mu_map = accepted
    mu = tuple(mu_map.get(j, 0.0) for j in range(m))
    active = tuple(
        j for j in range(m) if abs(cons.residual(j, u_star)) <= kkt_tol
    )
    return ControlSolution(
        u_star=u_star,
        mu=mu,
        active=active,
        case_label=classify_case(cons, active, rank_tol),
    )


def classify_case(
    cons: ConstraintSet,
    active: Sequence[int],
    rank_tol: float = DEFAULT_RANK_TOL,
) -> CaseLabel:
    """Rank regime of the active rows: none, one, many dependent, full rank."""
    k = len(active)
    if k == 0:
        return CaseLabel.K0
    if k == 1:
        return CaseLabel.K1
    dec = svd_k2([cons.rows[j][0] for j in active])
    if dec.sigma[0] <= 0.0:
        return CaseLabel.KM_R1
    return CaseLabel.KM_R1 if dec.sigma[1] / dec.sigma[0] < rank_tol else CaseLabel.KM_R2


def _one_dim_coefficient(
    cons: ConstraintSet, active: Sequence[int]
) -> tuple[Vec2, Vec2, float]:
    """Shared geometry of the rank-one regimes.

    Returns (v1, v2, c) such that the constrained component of the optimum is
    v1 * c; c collapses to b / ||a|| for a single row and to the weighted
    average over scaled copies otherwise.
    """
    i1 = active[0]
    a1, b1 = cons.rows[i1]
    n1 = a1.norm()
    if n1 < MIN_ROW_NORM:
        raise DegenerateConstraintError(f"active row {i1} has near-zero norm")
    v1 = a1 * (1.0 / n1)
    v2 = rot90(v1)
    if len(active) == 1:
        return v1, v2, b1 / n1
    # Division, not reciprocal-multiply: duplicated rows then get lam == 1.0
    # bitwise and the averaged coefficient collapses to the single-row b / n.
    nn = a1.norm_sq()
    s2 = 0.0
    sb = 0.0
    for j in active:
        aj, bj = cons.rows[j]
        lam = aj.dot(a1) / nn
        s2 += lam * lam
        sb += lam * bj
    return v1, v2, sb / (s2 * n1)


def solve_closed_form(
    case: CaseLabel,
    cons: ConstraintSet,
    active: Sequence[int],
    u_hat: Vec2,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> Vec2:
    """Optimum reconstructed from the active-set geometry, one branch per case."""
    if case is CaseLabel.K0:
        return u_hat
    if case in (CaseLabel.K1, CaseLabel.KM_R1):
        v1, v2, c = _one_dim_coefficient(cons, active)
        t = v2.dot(u_hat)
        return Vec2(v1.x * c + v2.x * t, v1.y * c + v2.y * t)
    rows = [cons.rows[j][0] for j in active]
    b = [cons.rows[j][1] for j in active]
    return pinv_k2(rows, rank_tol).apply(b)


def classify_dependent_pair(
    a1: Vec2, aj: Vec2, b1: float, bj: float, cfg: SafetyConfig
) -> PairKind:
    """Classify one constraint row against a reference row.

    Linearly dependent rows reachable from real states come in exactly two
    flavors: coincident obstacles (scaling +1, equal offsets) and the robot
    sitting at the midpoint of an obstacle pair at the safety distance
    (scaling -1, both offsets zero). Any other dependent combination raises
    InconsistentGeometryError.
    """
    n1 = a1.norm()
    nj = aj.norm()
    if n1 < MIN_ROW_NORM or nj < MIN_ROW_NORM:
        raise DegenerateConstraintError("dependent-pair check needs nonzero rows")
    cross = a1.x * aj.y - a1.y * aj.x
    if abs(cross) > 1e-9 * n1 * nj:
        return PairKind.NOT_DEPENDENT
    lam = aj.dot(a1) / (n1 * n1)
    if abs(lam - 1.0) <= 1e-6:
        if abs(b1 - bj) > 1e-9:
            raise InconsistentGeometryError(
                f"coincident rows with unequal offsets ({b1} vs {bj})"
            )
        return PairKind.COINCIDENT
    if abs(lam + 1.0) <= 1e-6:
        if abs(b1) > 1e-9 or abs(bj) > 1e-9:
            raise InconsistentGeometryError(
                "opposite rows require both offsets zero "
                f"(robot at the midpoint, distance {cfg.d_s} each side); "
                f"got ({b1}, {bj})"
            )
        return PairKind.OPPOSITE
    raise InconsistentGeometryError(
        f"dependent rows with scaling {lam}; only +1 or -1 is reachable"
    )
