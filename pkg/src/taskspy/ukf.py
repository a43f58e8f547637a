"""Unscented Kalman filter baseline for the same identification problem.

The parameter is modeled as a random walk and the measurement function maps a
parameter hypothesis to the velocity the safety filter would emit: build the
nominal law from the hypothesis, re-solve the QP, return the optimum. The map
is piecewise smooth with kinks at active-set changes; no smoothing is applied.
Sigma points landing in different active-set cases are permitted (and logged
at debug level). When every sigma point maps to the same velocity bit for bit
the update is skipped: the measurement carries no parameter information, which
is exactly the rank-2 stall.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .controller import SafetyConfig, build_constraints, solve_qp_oracle
from .errors import DimensionMismatchError, NonFiniteStateError
from .linalg import Vec2, min_eig_sym
from .regressor import TargetKind, TargetParam

log = logging.getLogger(__name__)

COV_FLOOR = 1e-12


@dataclass(frozen=True)
class UkfConfig:
    """Filter tuning.

    p0: initial covariance scale. q_proc: process-noise intensity (per
    second; the predict step adds q_proc * dt * I). r_meas: measurement-noise
    variance. alpha/beta/kappa: the usual sigma-point spread knobs. dt:
    step length, matching the world integrator.
    """

    p0: float = 1.0
    q_proc: float = 1e-6
    r_meas: float = 1e-4
    alpha: float = 0.5
    beta: float = 2.0
    kappa: float = 0.0
    dt: float = 1e-3

    def __post_init__(self) -> None:
        if not (math.isfinite(self.p0) and self.p0 > 0.0):
            raise ValueError(f"p0 must be positive, got {self.p0}")
        # q_proc = 0 is allowed on purpose: the rank-2 stall check runs with a
        # frozen prior.
        if not (math.isfinite(self.q_proc) and self.q_proc >= 0.0):
            raise ValueError(f"q_proc must be nonnegative, got {self.q_proc}")
        if not (math.isfinite(self.r_meas) and self.r_meas > 0.0):
            raise ValueError(f"r_meas must be positive, got {self.r_meas}")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt}")


@dataclass(frozen=True)
class UkfState:
    mean: np.ndarray
    cov: np.ndarray
    t: float = 0.0


@dataclass(frozen=True)
class InstantSnapshot:
    """Everything the measurement model needs at one instant."""

    x: Vec2
    obstacles: tuple[Vec2, ...]
    safety: SafetyConfig
    target: TargetParam

    def nominal_for(self, theta: np.ndarray) -> Vec2:
        if self.target.kind is TargetKind.GOAL:
            k_p = self.target.known_k_p
            return Vec2(
                k_p * (float(theta[0]) - self.x.x),
                k_p * (float(theta[1]) - self.x.y),
            )
        d = self.x - self.target.known_goal
        k = float(theta[0])
        return Vec2(-k * d.x, -k * d.y)

    def measure(self, theta: np.ndarray):
        cons = build_constraints(self.x, self.obstacles, self.safety)
        return solve_qp_oracle(cons, self.nominal_for(theta))


def ukf_init(theta0: np.ndarray, cfg: UkfConfig) -> UkfState:
    th0 = np.asarray(theta0, dtype=float).reshape(-1)
    p = th0.shape[0]
    if p not in (1, 2):
        raise DimensionMismatchError(f"parameter dimension must be 1 or 2, got {p}")
    if not np.isfinite(th0).all():
        raise NonFiniteStateError("ukf_init requires finite theta0")
    return UkfState(mean=th0.copy(), cov=cfg.p0 * np.eye(p))


def _chol_with_jitter(cov: np.ndarray) -> np.ndarray:
    jitter = 0.0
    for _ in range(4):
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError:
            jitter = max(COV_FLOOR, 10.0 * jitter, 1e-9 * float(np.trace(cov)))
            jitter *= 10.0
    raise NonFiniteStateError("covariance lost positive definiteness")


def _floor_cov(cov: np.ndarray) -> np.ndarray:
    sym = 0.5 * (cov + cov.T)
    mn = min_eig_sym(sym)
    if mn < COV_FLOOR:
        sym = sym + (2.0 * COV_FLOOR - mn) * np.eye(sym.shape[0])
    return sym


def ukf_step(
    s: UkfState, snapshot: InstantSnapshot, u_meas: Vec2, cfg: UkfConfig
) -> UkfState:
    """One predict/update cycle against the measured velocity."""
    p = s.mean.shape[0]
    if snapshot.target.p != p:
        raise DimensionMismatchError(
            f"snapshot target dim {snapshot.target.p} does not match state dim {p}"
        )
    mean = s.mean
    cov = s.cov + cfg.q_proc * cfg.dt * np.eye(p)
    t = s.t + cfg.dt

    lam = cfg.alpha * cfg.alpha * (p + cfg.kappa) - p
    scale = p + lam
    root = _chol_with_jitter(cov) * math.sqrt(scale)
    points = [mean]
    for i in range(p):
        points.append(mean + root[:, i])
        points.append(mean - root[:, i])

    sols = [snapshot.measure(th) for th in points]
    first = sols[0].u_star
    if all(sol.u_star == first for sol in sols[1:]):
        # Identical outputs: zero cross covariance, gain would be zero.
        return UkfState(mean=mean, cov=_floor_cov(cov), t=t)
    cases = {sol.case_label for sol in sols}
    if len(cases) > 1:
        log.debug("sigma points straddle cases %s at t=%.4f", sorted(c.value for c in cases), t)

    wm = np.full(2 * p + 1, 0.5 / scale)
    wm[0] = lam / scale
    wc = wm.copy()
    wc[0] += 1.0 - cfg.alpha * cfg.alpha + cfg.beta

    z = np.array([[sol.u_star.x, sol.u_star.y] for sol in sols])
    zbar = wm @ z
    dz = z - zbar
    s_mat = (dz.T * wc) @ dz + cfg.r_meas * np.eye(2)
    # Guard against indefiniteness from negative center weights combined with
    # the discontinuous measurement map.
    s_mat = 0.5 * (s_mat + s_mat.T)
    mn = min_eig_sym(s_mat)
    if mn < 0.5 * cfg.r_meas:
        s_mat = s_mat + (0.5 * cfg.r_meas - mn) * np.eye(2)
    dx = np.array(points) - mean
    pxz = (dx.T * wc) @ dz
    gain = np.linalg.solve(s_mat.T, pxz.T).T
    innov = np.array([u_meas.x, u_meas.y]) - zbar
    mean_new = mean + gain @ innov
    cov_new = _floor_cov(cov - gain @ s_mat @ gain.T)
    if not np.isfinite(mean_new).all():
        raise NonFiniteStateError("ukf mean diverged")
    return UkfState(mean=mean_new, cov=cov_new, t=t)
