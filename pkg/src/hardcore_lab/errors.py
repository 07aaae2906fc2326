"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad input: malformed graph, parameter outside its precondition range."""


class SizeGuardError(ValidationError):
    """Instance too large for an exhaustive routine."""


class InvariantViolation(RuntimeError):
    """An internal guarantee was broken; this indicates a bug."""
