"""Exception hierarchy shared by the library and the CLI."""
from typing import Optional


class TodaError(Exception):
    """Base class for every error raised by todaflow."""


class DimensionError(TodaError, ValueError):
    pass


class PowerCapError(TodaError):
    """Requested operator power exceeds the configured K_max."""


class UnsupportedBoundaryError(TodaError):
    pass


class StructureViolationError(TodaError):
    """A commutator that must be tridiagonal and symmetric is not."""


class FlowBreakdownError(TodaError):
    def __init__(self, step: int, message: str = "") -> None:
        self.step = step
        super().__init__(message or f"flow breakdown at step {step}: a_n <= 0 or non-finite entries")


class IntegrityError(TodaError):
    """Determinant drift of a transfer matrix left SL(2, C)."""


class DegenerateInputError(TodaError, ValueError):
    pass


class PolyShapeError(TodaError):
    """A polynomial matrix does not have the degree/trace shape of B(J)."""


class PoleError(TodaError):
    def __init__(self, site: int, z: complex) -> None:
        self.site = site
        self.z = z
        super().__init__(f"m-function pole: decaying solution vanishes at site {site} for z={z}")


class ConfigError(TodaError):
    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None) -> None:
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{message}{suffix}")
