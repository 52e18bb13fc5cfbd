"""Exception hierarchy shared by every stage of the pipeline."""


class BlockLociError(Exception):
    """Base class for all package errors."""


class ConfigError(BlockLociError):
    """Malformed or inconsistent experiment description."""


class GraphError(BlockLociError):
    """A block graph violates a structural invariant."""


class NumericalError(BlockLociError):
    """A numerical stage failed (divergence, non-convergence, singular fit)."""


class UnstableTrajectoryError(NumericalError):
    """Simulated signal exceeded the overflow guard.

    Raised when the closed loop is unstable at the current setpoint and
    excitation amplitude.
    """

    def __init__(self, message, sample=None):
        super().__init__(message)
        self.sample = sample


class ConvergenceError(NumericalError):
    """Iterative DC solver ran out of budget."""


class FitError(NumericalError):
    """Rational model fit is ill-posed or produced non-finite values."""


class LinearizationError(NumericalError):
    """A nonlinearity has no finite, unique local slope at its operating point."""


class SetpointError(NumericalError):
    """Wraps a failure at one setpoint of a sweep, remembering which one."""

    def __init__(self, index, r_dc, cause):
        super().__init__(f"setpoint {index} (r_dc={r_dc:g}): {cause}")
        self.index = index
        self.r_dc = r_dc
        self.cause = cause


class IndeterminateClassification(BlockLociError):
    """Every root track fell between the fixed and moving thresholds."""
