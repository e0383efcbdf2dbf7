"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value violates its contract; message names the field."""


class EvaluationError(ValueError):
    """A validation-loss evaluation produced an unusable value."""


class DimensionError(ValueError):
    """Array dimensions do not match the established shape."""


class EmptyBufferError(ValueError):
    """An operation that needs stored transitions was called on an empty buffer."""


class DivergenceError(RuntimeError):
    """Training produced non-finite values; the offending update was skipped."""


class DegenerateReferenceError(ValueError):
    """Reference scores coincide, so normalized scores are undefined."""


class ReportError(RuntimeError):
    """Run results are missing or malformed at report time."""
