class OtfsError(Exception):
    """Base class for every error raised by the simulator."""


class ConfigurationError(OtfsError, ValueError):
    pass


class DimensionError(OtfsError, ValueError):
    pass


class BoundsError(OtfsError, IndexError):
    pass


class ContractViolation(OtfsError, ValueError):
    pass


class SingularSystemError(OtfsError, ArithmeticError):
    pass


__all__ = [
    "OtfsError",
    "ConfigurationError",
    "DimensionError",
    "BoundsError",
    "ContractViolation",
    "SingularSystemError",
]
