"""
Exception hierarchy for the EVI toolkit
"""
from typing import Optional


class EviError(Exception):
    """Base class for all toolkit errors"""


class DimensionError(EviError, ValueError):
    """Matrix or vector dimensions do not agree"""


class InfeasibleSetError(EviError):
    """A moving set S(t) = K - h(t) is empty or undefined at the queried time"""

    def __init__(self, message: str, t: Optional[float] = None):
        super().__init__(message)
        self.t = t


class ComplementarityError(EviError):
    """A complementarity problem could not be solved"""

    def __init__(self, message: str, status: str = "infeasible", hint: Optional[str] = None):
        if hint:
            message = f"{message} ({hint})"
        super().__init__(message)
        self.status = status
        self.hint = hint


class AssumptionViolation(EviError):
    """A well-posedness assumption (A1-A5) fails on the supplied data"""

    def __init__(self, message: str, assumption: str):
        super().__init__(f"{assumption}: {message}")
        self.assumption = assumption


class StepSizeError(EviError, ValueError):
    """The requested time step cannot be used"""


class SimulationError(EviError):
    """A failure raised while integrating, tagged with the time it happened"""

    def __init__(self, message: str, t: float):
        super().__init__(f"t={t:.10g}: {message}")
        self.t = t


class ScenarioValidationError(EviError, ValueError):
    """A scenario or design description failed validation"""

    def __init__(self, field: str, detail: str):
        super().__init__(f"{field}: {detail}")
        self.field = field
        self.detail = detail
