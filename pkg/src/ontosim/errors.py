"""Exception types raised across the simulator."""


class OntosimError(Exception):
    """Base class for all simulator errors."""


class MemoryCapExceeded(OntosimError):
    pass


class ZeroNorm(OntosimError):
    pass


class ZeroOverlap(OntosimError):
    """Collapse center incompatible with the state (the overlap underflowed)."""


class NodeRegion(OntosimError):
    """Guidance evaluated where the density is numerically zero."""

    def __init__(self, message, positions=None):
        super().__init__(message)
        self.positions = positions


class InvalidGeometry(OntosimError):
    pass


class DegenerateRegion(OntosimError):
    pass


class BadEdges(OntosimError, ValueError):
    pass


class InsufficientExpected(OntosimError, ValueError):
    pass


class ConfigError(OntosimError, ValueError):
    """Invalid scenario configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class DumpFormatError(OntosimError, ValueError):
    pass
