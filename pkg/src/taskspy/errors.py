"""Exception types shared across the package."""


class TaskSpyError(Exception):
    """Base class for all taskspy errors."""


class DimensionMismatchError(TaskSpyError):
    """An array or parameter vector has an unsupported shape."""


class NonFiniteStateError(TaskSpyError):
    """A NaN or Inf appeared where finite state is required."""


class CoincidentObstacleError(TaskSpyError):
    """Robot and obstacle closer than the degeneracy threshold."""


class DegenerateConstraintError(TaskSpyError):
    """A constraint row is too short to normalize."""


class InfeasibleError(TaskSpyError):
    """No candidate active set satisfies the KKT conditions."""


class InconsistentGeometryError(TaskSpyError):
    """Dependent constraint rows whose scaling cannot arise from real states."""


class EmptyWindowError(TaskSpyError):
    """An excitation window contains no samples."""


class ScenarioParseError(TaskSpyError):
    """Scenario file is not valid JSON."""


class ScenarioValidationError(TaskSpyError):
    """Scenario content violates the schema; message names the field."""


class SafetyViolationError(TaskSpyError):
    """A safety distance was breached during simulation."""
