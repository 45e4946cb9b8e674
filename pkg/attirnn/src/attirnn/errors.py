"""Exception types for the forecaster trainer."""


class AttIrnnError(Exception):
    """Base class for all trainer-specific failures."""


class TraceShorterThanWindow(AttIrnnError):
    """A source trace cannot supply even one T+H window."""


class TraceTooShort(AttIrnnError):
    """Forecast emission needs at least T observations."""


class DivergenceDetected(AttIrnnError):
    """Training loss became non-finite."""
