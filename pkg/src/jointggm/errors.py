"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input data or configuration violates a structural requirement."""


class NumericalError(ArithmeticError):
    """A numerical routine could not produce a valid result."""


class ResidualFloorError(NumericalError):
    """A class residual norm collapsed below the solver's floor (interpolation regime)."""


class RankDeficiencyError(NumericalError):
    """A restricted least-squares design lacks full column rank."""
