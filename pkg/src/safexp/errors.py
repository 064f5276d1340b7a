"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


class EstimationError(RuntimeError):
    """A sampled batch cannot support the requested estimate."""


class NumericalError(RuntimeError):
    """Non-finite values or a failed numerical routine."""


class DegenerateDualError(RuntimeError):
    """The analytic dual is unbounded or degenerate (lambda* below the floor).

    Callers fall back to the plain trust-region step along -H^{-1} ghat
    scaled to the boundary.
    """


class RecoveryInfeasibleError(RuntimeError):
    """A violated constraint has a vanishing gradient: no recovery direction."""
