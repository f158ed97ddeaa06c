"""Exception types shared across the simulator."""


class FormsimError(Exception):
    """Base class for all formsim errors."""


class DegenerateFrameworkError(FormsimError):
    """Geometry makes the requested computation meaningless (e.g. coincident robots)."""


class UnrealizableMotionError(FormsimError):
    """The neighbor graph cannot express the requested rigid-body motion.

    Carries the per-robot least-squares residuals so callers can report
    which robot's edge directions are deficient.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class MissingMeasurementError(FormsimError):
    """A robot is missing the measurement for one of its incident edges."""


class NotAssignedError(FormsimError):
    """Estimator operation requested for an edge the robot does not estimate."""


class SupportMismatchError(FormsimError):
    """Motion parameter sets defined over different (robot, edge) supports."""


class EstimationCycleError(FormsimError):
    """Estimation assignment induces a directed cycle.

    ``cycle`` lists the robot ids of one offending cycle in order.
    """

    def __init__(self, message, cycle=None):
        super().__init__(message)
        self.cycle = cycle or []


class UnassignedBiasError(FormsimError):
    """A biased edge has no robot assigned to estimate its bias."""


class OutOfRangeError(FormsimError):
    """True inter-robot distance exceeds the sensor's maximum range."""


class FormationBrokenError(FormsimError):
    """Simulation aborted because a sensing link broke mid-run."""


class ScenarioError(FormsimError):
    """Scenario file failed to parse or validate. ``field`` is a JSON path."""

    def __init__(self, message, field=None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class LogFormatError(FormsimError):
    """Trajectory log is malformed or has an incompatible schema version."""
