"""Exception types shared across the toolkit."""


class DataFormatError(Exception):
    """A persisted file is malformed, has the wrong schema version, or is missing fields."""


class InfeasibleDesignError(ValueError):
    """No code parameters within the search budget satisfy the requested failure target."""


class GenerationFailureError(RuntimeError):
    """Rejection sampling exhausted its candidate budget (practically unreachable)."""
