"""Exception types raised across the package."""


class AffrollError(Exception):
    """Base class for all library errors."""


class NonOrthonormalizable(AffrollError, ValueError):
    pass


class ShapeODEViolation(AffrollError, ValueError):
    pass


class DomainError(AffrollError, ValueError):
    pass


class SingularInertia(AffrollError, ArithmeticError):
    pass


class VariantMismatch(AffrollError, ValueError):
    pass


class StepSizeUnderflow(AffrollError, ArithmeticError):
    pass


class ChartSingularity(AffrollError, ValueError):
    pass


class MaxTimeExceeded(AffrollError, RuntimeError):
    pass


class NoSeedFound(AffrollError, ValueError):
    pass


class ConfigError(AffrollError, ValueError):
    """Invalid scenario file; ``field`` names the offending key path."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
