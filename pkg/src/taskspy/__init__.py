"""Safety-filtered navigation with online identification of the task behind it.

A robot runs a proportional go-to-goal law through a minimally invasive
barrier-based safety filter (a small QP). From the filtered motion alone, an
observer tries to recover the task parameters: the goal, or the gain. The
package provides the filter, its per-case closed forms, the regressor
decomposition of the filtered control, an adaptive observer and a UKF built
on it, and a deterministic multi-robot simulation harness.
"""

from .controller import (
    CaseLabel,
    ConstraintSet,
    ControlSolution,
    PairKind,
    SafetyConfig,
    TaskParams,
    build_constraints,
    classify_case,
    classify_dependent_pair,
    kkt_residuals,
    nominal_control,
    solve_closed_form,
    solve_qp_oracle,
)
from .errors import (
    CoincidentObstacleError,
    DegenerateConstraintError,
    DimensionMismatchError,
    EmptyWindowError,
    InconsistentGeometryError,
    InfeasibleError,
    NonFiniteStateError,
    ScenarioParseError,
    ScenarioValidationError,
    SafetyViolationError,
    TaskSpyError,
)
from .estimation import EstimateLog, EstimateTrack, run_estimation
from .linalg import Vec2, min_eig_sym, pinv_k2, rot90, svd_k2, vec2
from .observer import AoConfig, ObserverState, ao_init, ao_step, ie_reached
from .regressor import (
    ExcitationReport,
    Regressor,
    TargetKind,
    TargetParam,
    build_regressor,
    detect_active_set,
    excitation_gram,
    nullspace_drift,
)
from .scenario import EstimationSpec, RobotSpec, Scenario, load_scenario, parse_scenario
from .selftest import AuditReport, kkt_audit, sample_instance
from .ukf import InstantSnapshot, UkfConfig, UkfState, ukf_init, ukf_step
from .world import TrajectoryLog, WorldState, run, step_world

__version__ = "0.1.0"

__all__ = [
    "AoConfig",
    "AuditReport",
    "CaseLabel",
    "CoincidentObstacleError",
    "ConstraintSet",
    "ControlSolution",
    "DegenerateConstraintError",
    "DimensionMismatchError",
    "EmptyWindowError",
    "EstimateLog",
    "EstimateTrack",
    "EstimationSpec",
    "ExcitationReport",
    "InconsistentGeometryError",
    "InfeasibleError",
    "InstantSnapshot",
    "NonFiniteStateError",
    "ObserverState",
    "PairKind",
    "Regressor",
    "RobotSpec",
    "SafetyConfig",
    "SafetyViolationError",
    "Scenario",
    "ScenarioParseError",
    "ScenarioValidationError",
    "TargetKind",
    "TargetParam",
    "TaskParams",
    "TaskSpyError",
    "TrajectoryLog",
    "UkfConfig",
    "UkfState",
    "Vec2",
    "WorldState",
    "ao_init",
    "ao_step",
    "build_constraints",
    "build_regressor",
    "classify_case",
    "classify_dependent_pair",
    "detect_active_set",
    "excitation_gram",
    "ie_reached",
    "kkt_audit",
    "kkt_residuals",
    "load_scenario",
    "min_eig_sym",
    "nominal_control",
    "nullspace_drift",
    "parse_scenario",
    "pinv_k2",
    "rot90",
    "run",
    "run_estimation",
    "sample_instance",
    "solve_closed_form",
    "solve_qp_oracle",
    "step_world",
    "svd_k2",
    "ukf_init",
    "ukf_step",
    "vec2",
]
