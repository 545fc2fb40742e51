"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid mesh/physics/solver configuration."""


class SolverError(RuntimeError):
    """A linear solve failed (singular matrix, bad pivot, ...)."""


class NewtonError(RuntimeError):
    """Newton iteration failed to converge.

    Carries the best iterate found so the caller can retry with a
    smaller time step.
    """

    def __init__(self, message, best_x=None, residual_norm=None, iterations=None):
        super().__init__(message)
        self.best_x = best_x
        self.residual_norm = residual_norm
        self.iterations = iterations
