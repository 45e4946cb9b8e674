"""Exception types shared across the simulator."""


class SliceSimError(Exception):
    """Base class for all simulator errors."""


# --- RSL trace ingestion ---

class MalformedRow(SliceSimError):
    pass


class NonMonotonicTime(SliceSimError):
    pass


class GapInTrace(SliceSimError):
    pass


class EmptyTrace(SliceSimError):
    pass


# --- forecasting ---

class EmptyHistory(SliceSimError):
    pass


class TooFewSamples(SliceSimError):
    pass


class MissingHorizonStep(SliceSimError):
    pass


class NonPositiveVariance(SliceSimError):
    pass


class DuplicateRow(SliceSimError):
    pass


class DegenerateRow(SliceSimError):
    pass


class ForecastMissing(SliceSimError):
    pass


# --- slice generation ---

class TooFewFlows(SliceSimError):
    pass


class MissingService(SliceSimError):
    pass


class UnknownService(SliceSimError):
    pass


# --- oracle ---

class InstanceTooLarge(SliceSimError):
    pass


# --- cli ---

class ConfigError(SliceSimError):
    pass
