class DataError(ValueError):
    """Malformed or inconsistent input data."""


class EstimationError(RuntimeError):
    """EM could not produce a valid estimate (singular design, empty state, ...)."""
