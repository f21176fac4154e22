"""Exception types shared across the solver modules."""


class ParameterError(ValueError):
    """A model or configuration value violates its admissible range."""

    def __init__(self, constraint, message=None):
        self.constraint = constraint
        super().__init__(message or f"violated constraint: {constraint}")


class RangeError(OverflowError):
    """An evaluation left the representable floating-point range."""


class NonConvergence(RuntimeError):
    """An iterative solver exhausted its budget."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message} (last residual {residual:.3e} after {iterations} iterations)")


class NoBracket(RuntimeError):
    """No sign change was found while expanding a root bracket."""


class InconsistentBoundaries(RuntimeError):
    """The two ergodic-value expressions disagree; the boundary solve is bad."""
