"""
Domain errors.

All errors derive from ValueError so they can be raised from pydantic
validators and still reach callers as the domain type.
"""
from typing import Any, List, Optional


class AeqsimError(ValueError):
    """Base class for every error raised by the simulator"""


class SpeciesDocumentError(AeqsimError):
    """Species document could not be parsed"""


class SpeciesValidationError(AeqsimError):
    """Species document parsed but violates a data invariant"""


class UnknownLevelError(AeqsimError):
    def __init__(self, level: str):
        super().__init__(f"Unknown level: {level}")
        self.level = level


class MissingCoefficientError(AeqsimError):
    """A level lacks the coefficient an operation needs (kappa, g_J, lifetime)"""


class ResonanceWindowError(AeqsimError):
    def __init__(self, level: str, wavelength_nm: float, line_nm: float):
        super().__init__(
            f"Wavelength {wavelength_nm} nm lies within the exclusion window "
            f"of the {line_nm} nm line of {level}"
        )
        self.level = level
        self.wavelength_nm = wavelength_nm
        self.line_nm = line_nm


class ScanRangeError(AeqsimError):
    """Empty or inverted wavelength range, or nonpositive step"""


class ZeroPolarizabilityError(AeqsimError):
    """Depth matching against a lattice that does not trap the level"""


class StepSizeError(AeqsimError):
    """Fixed-step integrator called with a step above its bound"""


class ProtocolError(AeqsimError):
    """An op could not be applied to the register"""

    def __init__(self, message: str, op_index: Optional[int] = None, partial_log: Optional[List[Any]] = None):
        super().__init__(message)
        self.op_index = op_index
        self.partial_log = partial_log or []


class UnschedulableError(AeqsimError):
    """Circuit cannot be lowered on the given device"""


class ParallelConflictError(UnschedulableError):
    """Two gates in one parallel layer touch the same site"""
