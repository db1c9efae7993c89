"""Exception types shared across the package."""


class InputError(ValueError):
    """Raised when user-supplied arrays or scalars violate a precondition."""


class ModelError(RuntimeError):
    """Raised when a numerical operation on the model fails irrecoverably.

    Carries the final jitter value when a Cholesky factorization gave up.
    """

    def __init__(self, message, jitter=None):
        super().__init__(message)
        self.jitter = jitter


class ConfigError(ValueError):
    """Raised for invalid experiment configurations; names the offending key."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
