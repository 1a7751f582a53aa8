"""
Error types for the FMO resonance toolkit

Parameter and data problems derive from ValueError, numerical failures from
RuntimeError. The command line maps them onto exit codes 1 and 2.
"""
from typing import Optional, Sequence, Tuple


class FmoError(Exception):
    """Base class for every error raised by the toolkit"""


class FormatError(FmoError, ValueError):
    """Input document is structurally malformed"""


class ValidationError(FmoError, ValueError):
    """Network violates symmetry or the coupling constraints"""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class ParameterError(FmoError, ValueError):
    """A model parameter is outside its admissible range"""


class DomainError(FmoError, ValueError):
    """Function evaluated outside its domain"""


class DegenerateInputError(FmoError, ValueError):
    """Input makes the requested quantity undefined (flat or vanishing density)"""


class ConvergenceError(FmoError, RuntimeError):
    """Iterative solver did not converge"""

    def __init__(self, message: str, bracket: Optional[Tuple[float, float]] = None,
                 residual: Optional[float] = None):
        details = message
        if bracket is not None:
            details += f" (bracket [{bracket[0]:.6g}, {bracket[1]:.6g}]"
            details += f", residual {residual:.3g})" if residual is not None else ")"
        super().__init__(details)
        self.bracket = bracket
        self.residual = residual


class QuadratureError(FmoError, RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance"""

    def __init__(self, message: str, achieved: float, requested: float):
        super().__init__(f"{message} (achieved error {achieved:.3g}, requested {requested:.3g})")
        self.achieved = achieved
        self.requested = requested


class SearchError(FmoError, RuntimeError):
    """Parameter search produced no usable evaluation"""

    def __init__(self, message: str, failures: Sequence[str] = ()):
        super().__init__(message)
        self.failures = list(failures)


NUMERICAL_ERRORS = (ConvergenceError, QuadratureError, SearchError)
