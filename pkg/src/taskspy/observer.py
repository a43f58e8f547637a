"""Adaptive observer identifying task parameters from filtered motion.

Continuous-time laws, advanced here by explicit Euler on the simulation grid
so the predictor and the plant share one time discretization:

    x_hat' = G theta0 + f + k_w (x - x_hat)
    W'     = -k_w W + G
    eta'   = -k_w eta
    Q'     = W^T W
    C'     = W^T (W theta0 + x - x_hat - eta)
    theta' = Gamma (C - Q theta_hat)

On the shared grid the identity x - x_hat = W (theta - theta0) + eta holds
exactly step to step, so C tracks Q theta to roundoff and the estimate error
contracts monotonically through (I - dt Gamma Q). eta is decoupled from the
rest (zero in normal operation) and is advanced by its exact decay factor.

The excitation time t_c latches at the first step where the filtered gram Q
becomes positive definite beyond the configured threshold; convergence of
theta_hat is exponential after that point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatchError, NonFiniteStateError
from .linalg import Vec2, min_eig_sym
from .regressor import Regressor


@dataclass(frozen=True)
class AoConfig:
    """Observer gains.

    k_w: filter bandwidth (1/s) shared by the predictor and W.
    gamma_gain: update-law gain, a positive scalar (scaled identity) or a
        symmetric positive definite matrix matching the parameter dimension.
    ie_threshold: smallest eigenvalue of Q that declares interval excitation.
    dt: integration step, matching the world integrator.
    """

    k_w: float = 5.0
    gamma_gain: float | np.ndarray = 10.0
    ie_threshold: float = 1e-4
    dt: float = 1e-3

    def __post_init__(self) -> None:
        if not (math.isfinite(self.k_w) and self.k_w > 0.0):
            raise ValueError(f"k_w must be positive, got {self.k_w}")
        if not (math.isfinite(self.ie_threshold) and self.ie_threshold > 0.0):
            raise ValueError(f"ie_threshold must be positive, got {self.ie_threshold}")
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if np.isscalar(self.gamma_gain):
            if not (math.isfinite(self.gamma_gain) and self.gamma_gain > 0.0):
                raise ValueError(f"gamma_gain must be positive, got {self.gamma_gain}")
        else:
            g = np.asarray(self.gamma_gain, dtype=float)
            if g.ndim != 2 or g.shape[0] != g.shape[1]:
                raise ValueError("matrix gamma_gain must be square")
            if not np.allclose(g, g.T):
                raise ValueError("matrix gamma_gain must be symmetric")
            if min_eig_sym(g) <= 0.0:
                raise ValueError("matrix gamma_gain must be positive definite")

    def gamma_matrix(self, p: int) -> np.ndarray:
        if np.isscalar(self.gamma_gain):
            return float(self.gamma_gain) * np.eye(p)
        g = np.asarray(self.gamma_gain, dtype=float)
        if g.shape != (p, p):
            raise DimensionMismatchError(
                f"gamma_gain shape {g.shape} does not match parameter dim {p}"
            )
        return g


@dataclass(frozen=True)
class ObserverState:
    x_hat: np.ndarray
    w: np.ndarray
    eta: np.ndarray
    q: np.ndarray
    c: np.ndarray
    theta_hat: np.ndarray
    theta0: np.ndarray
    t: float = 0.0
    t_c: float | None = None


def ao_init(theta0: np.ndarray, x0: Vec2, cfg: AoConfig) -> ObserverState:
    """Fresh state at the measured initial position; eta starts at zero."""
    th0 = np.asarray(theta0, dtype=float).reshape(-1)
    p = th0.shape[0]
    if p not in (1, 2):
        raise DimensionMismatchError(f"parameter dimension must be 1 or 2, got {p}")
    if not np.isfinite(th0).all() or not x0.is_finite():
        raise NonFiniteStateError("ao_init requires finite theta0 and x0")
    return ObserverState(
        x_hat=np.array([x0.x, x0.y]),
        w=np.zeros((2, p)),
        eta=np.zeros(2),
        q=np.zeros((p, p)),
        c=np.zeros(p),
        theta_hat=th0.copy(),
        theta0=th0.copy(),
    )


def ao_step(
    s: ObserverState, x_meas: Vec2, reg: Regressor, cfg: AoConfig
) -> ObserverState:
    """Advance every observer variable by one step from the same snapshot."""
    p = s.theta0.shape[0]
    if reg.g.shape != (2, p):
        raise DimensionMismatchError(
            f"regressor shape {reg.g.shape} does not match parameter dim {p}"
        )
    dt = cfg.dt
    k_w = cfg.k_w
    x = np.array([x_meas.x, x_meas.y])
    f = np.array([reg.f.x, reg.f.y])
    err = x - s.x_hat

    x_hat = s.x_hat + dt * (reg.g @ s.theta0 + f + k_w * err)
    w = s.w + dt * (reg.g - k_w * s.w)
    eta = math.exp(-k_w * dt) * s.eta
    q = s.q + dt * (s.w.T @ s.w)
    c = s.c + dt * (s.w.T @ (s.w @ s.theta0 + err - s.eta))
    gamma = cfg.gamma_matrix(p)
    theta_hat = s.theta_hat + dt * (gamma @ (s.c - s.q @ s.theta_hat))

    if not (np.isfinite(theta_hat).all() and np.isfinite(x_hat).all()):
        raise NonFiniteStateError("observer state diverged (check dt * gains)")

    t = s.t + dt
    t_c = s.t_c
    if t_c is None and min_eig_sym(q) > cfg.ie_threshold:
        t_c = t
    return replace(
        s, x_hat=x_hat, w=w, eta=eta, q=q, c=c, theta_hat=theta_hat, t=t, t_c=t_c
    )


def ie_reached(s: ObserverState, cfg: AoConfig) -> float | None:
    """Excitation time, or None while Q is still rank deficient.

    The latch is permanent: once Q clears the threshold at some step, t_c
    keeps that first crossing time.
    """
    del cfg
    return s.t_c
