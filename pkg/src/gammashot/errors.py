"""Exception classes shared across the package."""


class GammashotError(Exception):
    """Base class for package-specific errors."""


class InvalidParameterError(GammashotError, ValueError):
    """A distribution or model parameter violates its constraints."""


class StationarityError(GammashotError, ValueError):
    """Stationary initialisation requested with persistence rho >= 1."""


class UnsupportedRegimeError(GammashotError, ValueError):
    """Operation requires a scale regime it does not support."""


class UnsupportedOrderError(GammashotError, ValueError):
    """Moment order outside the implemented range."""


class DegenerateKernelError(GammashotError, RuntimeError):
    """Truncated-kernel rejection sampling stalled (pathological bandwidth/window)."""


class DegenerateAllocationError(GammashotError, RuntimeError):
    """Every allocation weight is zero for some event."""


class UndefinedRatioError(GammashotError, ValueError):
    """Pair correlation requested where an intensity vanishes."""


class UndefinedIqrError(GammashotError, ValueError):
    """Normalised interquantile range undefined (zero median)."""


class NoDrawsError(GammashotError, ValueError):
    """An operation on a draw archive received no draws."""


class SchemaError(GammashotError, ValueError):
    """Input file does not match the expected schema."""


class IngestionError(GammashotError, ValueError):
    """Too many malformed rows while ingesting event data."""


class UsageError(GammashotError, ValueError):
    """Invalid command-line usage or run configuration."""
