from typing import Any, List, Optional


class DhnError(Exception):
    """Base class for every error raised by the project."""


class ConfigParseError(DhnError):
    def __init__(self, message: str, line: Optional[int] = None,
                 section: Optional[str] = None, field: Optional[str] = None):
        self.line = line
        self.section = section
        self.field = field
        location = []
        if line is not None:
            location.append(f"line {line}")
        if section:
            location.append(f"[{section}]")
        if field:
            location.append(field)
        prefix = f"{' '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")


class ValidationFailedError(DhnError):
    def __init__(self, report: Any):
        self.report = report
        super().__init__(f"Network validation failed: {report.violations}")


class DomainError(DhnError, ValueError):
    pass


class InfeasibleConfigurationError(DhnError):
    pass


class SolverConvergenceError(DhnError):
    def __init__(self, message: str, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"{message} (iterations={iterations}, residual={residual:.3e})")


class StepSizeError(DhnError):
    def __init__(self, dt: float, suggested_dt: float):
        self.dt = dt
        self.suggested_dt = suggested_dt
        super().__init__(
            f"Step size dt={dt:.6g} s exceeds the stability bound; use dt <= {suggested_dt:.6g} s"
        )


class SimulationAbortedError(DhnError):
    def __init__(self, message: str, partial: Any = None):
        self.partial = partial
        super().__init__(message)


class MissingChannelsError(DhnError):
    def __init__(self, missing: List[str]):
        self.missing = list(missing)
        super().__init__(f"Trajectory is missing required columns: {', '.join(self.missing)}")


class InsufficientSignalError(DhnError):
    pass


class SpanMismatchError(DhnError):
    pass


class BaseMismatchError(DhnError):
    pass


class UnknownThermalMassError(DhnError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown thermal mass"


class EmptyIntervalError(DhnError):
    pass


class TopologyError(DhnError):
    pass
