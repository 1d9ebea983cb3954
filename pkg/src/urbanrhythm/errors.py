"""Exception hierarchy shared by all pipeline stages."""


class UrbanRhythmError(Exception):
    """Base class for all package-specific errors."""


class DegenerateInput(UrbanRhythmError):
    """Too few samples to fit anything."""


class NonFiniteInput(UrbanRhythmError):
    """NaN or Inf encountered where finite values are required."""


class DimensionMismatch(UrbanRhythmError):
    """Operand shapes are incompatible."""


class EmptyInput(UrbanRhythmError):
    """No usable rows in the input."""


class SeriesTooShort(UrbanRhythmError):
    """State series shorter than one window."""


class BadK(UrbanRhythmError):
    """Requested cluster count outside [1, N]."""


class LengthMismatch(UrbanRhythmError):
    """Two aligned sequences have different lengths."""


class TooLargeForOracle(UrbanRhythmError):
    """Brute-force oracle refused an input it cannot enumerate quickly."""


class InvalidConfig(UrbanRhythmError):
    """Configuration values violate their invariants."""


class StageError(UrbanRhythmError):
    """Pipeline stage failure; carries the stage name."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
