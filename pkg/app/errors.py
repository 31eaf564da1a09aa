"""Exception hierarchy shared by every simulation module.

The CLI maps ``ScenarioError`` to exit code 1 and every other ``GndlineError``
to exit code 2.
"""


class GndlineError(Exception):
    """Base class for all simulator errors."""


class InvalidParameterError(GndlineError, ValueError):
    """An input is outside the domain an operation accepts."""


class DegenerateDeltaError(GndlineError):
    def __init__(self, magnitude: float):
        super().__init__(f"degenerate delta: |z_ab + z_bc + z_ca| = {magnitude:.3e}")
        self.magnitude = magnitude


class SingularSystemError(GndlineError):
    def __init__(self, pivot_index: int, magnitude: float = 0.0):
        super().__init__(f"singular system: pivot {pivot_index} has magnitude {magnitude:.3e}")
        self.pivot_index = pivot_index
        self.magnitude = magnitude


class NearZeroDenominatorError(GndlineError):
    def __init__(self, quantity: str, magnitude: float):
        super().__init__(f"{quantity} denominator too small: {magnitude:.3e}")
        self.quantity = quantity
        self.magnitude = magnitude


class InconsistentExcitationError(GndlineError):
    """The nodal system has no solution for the given drive terms."""


class InfeasibleAttackError(GndlineError):
    """An attack designer cannot meet its target with the given parameters."""


class NoFeasibleCarrierError(InfeasibleAttackError):
    """No integer multiple of the ADC rate lies in the vulnerable band."""


class StageError(GndlineError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class FrequencyRowError(GndlineError):
    def __init__(self, frequency_hz: float, cause: Exception):
        super().__init__(f"row at {frequency_hz:.6g} Hz failed: {cause}")
        self.frequency_hz = frequency_hz
        self.cause = cause


class ScenarioError(GndlineError):
    """Scenario file could not be parsed or validated.

    ``location`` is a dotted key path (``coupling.z_g.r_ohm``) or
    ``line N column M`` for syntax errors.
    """

    def __init__(self, message: str, location: str = ""):
        text = f"{location}: {message}" if location else message
        super().__init__(text)
        self.location = location
