"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A domain object or configuration violates a structural invariant."""


class CalibrationError(ValueError):
    """Input data is inconsistent with the calibration it claims to encode."""


class DimensionError(ValueError):
    """Requested Hilbert-space size exceeds the dense-solver cap."""


class StiffnessError(RuntimeError):
    """Adaptive integration underflowed its minimum step size."""


class ConfigError(ValueError):
    """Config file failed to parse or validate; message carries location."""
