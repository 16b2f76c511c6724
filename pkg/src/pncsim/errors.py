"""Exception hierarchy shared by the simulator, the sweeps and the analysis code."""

from __future__ import annotations


class PNCSimError(Exception):
    """Base class for all errors raised by pncsim."""


class DomainError(PNCSimError, ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigError(PNCSimError, ValueError):
    """Invalid run configuration. ``field`` names the offending key."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class NumericalFailure(PNCSimError, RuntimeError):
    """A state invariant was violated during time evolution."""

    def __init__(self, message: str, time: float):
        self.reason = message
        self.time = time
        super().__init__(f"{message} at t = {time:.6g} ps")

    def __reduce__(self):
        # rebuild from the parts so failures survive the trip back from worker processes
        return type(self), (self.reason, self.time)


class CalibrationError(PNCSimError, RuntimeError):
    pass


class FitError(PNCSimError, RuntimeError):
    """A nonlinear fit did not converge or produced unusable parameters."""

    def __init__(self, message: str, residual: float | None = None):
        self.residual = residual
        super().__init__(message if residual is None else f"{message} (residual {residual:.3g})")


class UndefinedVisibilityError(PNCSimError, ValueError):
    pass


class LambdaUndefinedError(PNCSimError, ValueError):
    def __init__(self, slope: float):
        self.slope = slope
        super().__init__(f"negative visibility slope {slope:.6g}; lambda undefined")
