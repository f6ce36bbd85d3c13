"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition or data contract."""


class NumericError(ArithmeticError):
    """A numerical routine failed (non-convergence, singular system, ...)."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class BoundNotApplicableError(RuntimeError):
    """The perturbation bound's precondition does not hold for these inputs."""
