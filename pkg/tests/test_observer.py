"""Adaptive observer dynamics: filters, accumulators, and the update law."""

import math
import random
from dataclasses import replace

import numpy as np
import pytest

from taskspy.controller import (
    ConstraintSet,
    SafetyConfig,
    TaskParams,
    build_constraints,
    nominal_control,
    solve_qp_oracle,
)
from taskspy.errors import DimensionMismatchError, NonFiniteStateError
from taskspy.linalg import Vec2, min_eig_sym
from taskspy.observer import AoConfig, ao_init, ao_step, ie_reached
from taskspy.regressor import Regressor, TargetParam, build_regressor
from taskspy.selftest import sample_instance
from taskspy.controller import CaseLabel


def const_reg(g: np.ndarray, f: Vec2 = Vec2(0.0, 0.0)) -> Regressor:
    return Regressor(g=g, f=f, case_label=CaseLabel.K0)


def test_config_validation():
    with pytest.raises(ValueError):
        AoConfig(k_w=-1.0)
    with pytest.raises(ValueError):
        AoConfig(ie_threshold=0.0)
    with pytest.raises(ValueError):
        AoConfig(dt=0.0)
    with pytest.raises(ValueError):
        AoConfig(gamma_gain=-10.0)
    with pytest.raises(ValueError):
        AoConfig(gamma_gain=np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        AoConfig(gamma_gain=np.array([[1.0, 0.0], [0.0, -1.0]]))
    AoConfig(gamma_gain=np.array([[2.0, 0.5], [0.5, 2.0]]))


def test_init_shapes_goal_mode():
    cfg = AoConfig()
    s = ao_init(np.zeros(2), Vec2(1.0, 1.0), cfg)
    assert np.array_equal(s.x_hat, np.array([1.0, 1.0]))
    assert s.w.shape == (2, 2) and not s.w.any()
    assert s.q.shape == (2, 2) and not s.q.any()
    assert s.c.shape == (2,) and not s.c.any()
    assert not s.eta.any()
    assert s.t == 0.0
    assert s.t_c is None


def test_init_shapes_gain_mode():
    s = ao_init(np.array([1.0]), Vec2(0.0, 0.0), AoConfig())
    assert s.w.shape == (2, 1)
    assert s.q.shape == (1, 1)
    assert s.c.shape == (1,)


def test_init_rejects_bad_dimension_and_nonfinite():
    with pytest.raises(DimensionMismatchError):
        ao_init(np.zeros(3), Vec2(0.0, 0.0), AoConfig())
    with pytest.raises(NonFiniteStateError):
        ao_init(np.array([np.nan, 0.0]), Vec2(0.0, 0.0), AoConfig())


def test_gamma_matrix_dimension_check():
    cfg = AoConfig(gamma_gain=np.eye(2))
    s = ao_init(np.array([0.5]), Vec2(0.0, 0.0), cfg)
    with pytest.raises(DimensionMismatchError):
        ao_step(s, Vec2(0.0, 0.0), const_reg(np.zeros((2, 1))), cfg)


def test_zero_regressor_freezes_everything():
    cfg = AoConfig(dt=1e-3)
    theta0 = np.array([0.3, -0.2])
    s = ao_init(theta0, Vec2(0.0, 0.0), cfg)
    reg = const_reg(np.zeros((2, 2)))
    for _ in range(500):
        s = ao_step(s, Vec2(0.0, 0.0), reg, cfg)
    assert np.array_equal(s.theta_hat, theta0)
    assert not s.w.any()
    assert not s.q.any()
    assert not s.c.any()
    assert s.t_c is None


def test_w_matches_discrete_and_continuous_closed_forms():
    # W' = -k W + I has the Euler solution (1 - (1 - k dt)^n) / k, which the
    # implementation must reproduce to roundoff; the continuous-time limit
    # (1 - e^{-k t}) / k is only reached once the filter has settled.
    k_w = 5.0
    dt = 1e-4
    cfg = AoConfig(k_w=k_w, dt=dt)
    s = ao_init(np.zeros(2), Vec2(0.0, 0.0), cfg)
    reg = const_reg(np.eye(2))
    decay = 1.0 - k_w * dt
    for n in range(1, 20001):
        s = ao_step(s, Vec2(0.0, 0.0), reg, cfg)
        if n % 4000 == 0:
            w_discrete = (1.0 - decay**n) / k_w
            assert s.w[0, 0] == pytest.approx(w_discrete, abs=1e-12)
            assert s.w[1, 1] == pytest.approx(w_discrete, abs=1e-12)
            assert s.w[0, 1] == 0.0
    w_settled = (1.0 - math.exp(-k_w * 2.0)) / k_w
    assert abs(s.w[0, 0] - w_settled) <= 1e-6


def test_eta_decays_exponentially():
    # Test hook: offset the predictor and seed eta with the matching x - x_hat.
    k_w = 5.0
    dt = 1e-4
    cfg = AoConfig(k_w=k_w, dt=dt)
    x0 = Vec2(1.0, -1.0)
    delta = np.array([0.02, -0.01])
    s = ao_init(np.zeros(2), x0, cfg)
    s = replace(s, x_hat=s.x_hat + delta, eta=-delta.copy())
    eta0 = float(np.linalg.norm(s.eta))
    reg = const_reg(np.zeros((2, 2)))
    for n in range(1, 10001):
        s = ao_step(s, x0, reg, cfg)
        if n % 2500 == 0:
            expected = math.exp(-k_w * n * dt) * eta0
            assert abs(float(np.linalg.norm(s.eta)) - expected) <= 1e-6 * expected


def test_q_monotone_psd_every_step():
    rng = random.Random(21)
    cfg = AoConfig(dt=1e-3)
    s = ao_init(np.zeros(2), Vec2(0.0, 0.0), cfg)
    for _ in range(300):
        inst = sample_instance(rng, m_max=3)
        cons = build_constraints(inst.x, inst.obstacles, inst.safety)
        sol = solve_qp_oracle(cons, nominal_control(inst.x, inst.task))
        reg = build_regressor(
            inst.x, cons, sol.active, TargetParam.goal(inst.task.k_p)
        )
        q_prev = s.q
        s = ao_step(s, inst.x, reg, cfg)
        assert min_eig_sym(s.q - q_prev) >= -1e-12


def run_goal_loop(gamma, steps, dt=1e-3, k_p=1.0):
    """True plant and observer on a free-space go-to-goal run."""
    cfg = AoConfig(gamma_gain=gamma, dt=dt)
    task = TaskParams(goal=Vec2(1.0, -0.5), k_p=k_p)
    target = TargetParam.goal(k_p)
    theta_true = np.array([task.goal.x, task.goal.y])
    x = Vec2(-1.0, 0.8)
    s = ao_init(np.zeros(2), x, cfg)
    cons = ConstraintSet(())
    errs = [float(np.linalg.norm(s.theta_hat - theta_true))]
    idents = []
    for _ in range(steps):
        reg = build_regressor(x, cons, (), target)
        sol = solve_qp_oracle(cons, nominal_control(x, task))
        x_next = Vec2(x.x + dt * sol.u_star.x, x.y + dt * sol.u_star.y)
        s = ao_step(s, x, reg, cfg)
        x = x_next
        errs.append(float(np.linalg.norm(s.theta_hat - theta_true)))
        ident = np.array([x.x, x.y]) - s.x_hat - s.w @ (theta_true - s.theta0)
        idents.append(float(np.linalg.norm(ident)))
    return s, errs, idents


def test_error_monotone_and_identity_preserved():
    s, errs, idents = run_goal_loop(gamma=10.0, steps=3000)
    t_c = ie_reached(s, AoConfig())
    assert t_c is not None
    n_tc = int(round(t_c / 1e-3))
    for n in range(min(n_tc, len(errs) - 1)):
        assert errs[n + 1] <= errs[n] + 1e-9
    # Prediction-error identity x - x_hat = W (theta - theta0) holds along
    # the shared Euler grid up to accumulated roundoff.
    assert max(idents) <= 1e-8
    assert errs[-1] < 0.7 * errs[0]


def test_goal_estimate_converges_free_space():
    s, errs, _ = run_goal_loop(gamma=40.0, steps=5000)
    assert errs[-1] < 1e-2
    assert s.t_c is not None and s.t_c < 1.0


def test_ie_latch_behavior():
    cfg = AoConfig(dt=1e-3)
    s = ao_init(np.zeros(2), Vec2(0.0, 0.0), cfg)
    assert ie_reached(s, cfg) is None

    # Inject an already-excited Q: the next step must latch.
    s_exc = replace(s, q=np.diag([1.0, 2.0]))
    s_exc = ao_step(s_exc, Vec2(0.0, 0.0), const_reg(np.zeros((2, 2))), cfg)
    assert ie_reached(s_exc, cfg) == pytest.approx(1e-3)

    # Latching is permanent even if excitation stops.
    first = s_exc.t_c
    for _ in range(50):
        s_exc = ao_step(s_exc, Vec2(0.0, 0.0), const_reg(np.zeros((2, 2))), cfg)
    assert s_exc.t_c == first


def test_divergence_raises():
    # dt * Gamma * lambda_max(Q) far beyond 2: the update law oscillates with
    # growing amplitude once the estimate sits off its fixed point.
    cfg = AoConfig(gamma_gain=1e7, dt=1e-3)
    s = ao_init(np.array([1.0, 1.0]), Vec2(0.0, 0.0), cfg)
    reg = const_reg(np.eye(2))
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(NonFiniteStateError):
            for _ in range(2000):
                s = ao_step(s, Vec2(0.0, 0.0), reg, cfg)


def test_step_rejects_mismatched_regressor():
    cfg = AoConfig()
    s = ao_init(np.zeros(2), Vec2(0.0, 0.0), cfg)
    with pytest.raises(DimensionMismatchError):
        ao_step(s, Vec2(0.0, 0.0), const_reg(np.zeros((2, 1))), cfg)
