"""Exception hierarchy shared by every module of the package."""


class FedBroadcastError(Exception):
    pass


class DomainError(FedBroadcastError, ValueError):
    """An argument mentions nodes outside the universe, or is otherwise ill-formed."""


class CapacityError(FedBroadcastError):
    """An exponential computation would exceed the configured size cap."""

    def __init__(self, message, size=None):
        super().__init__(message)
        self.size = size


class PreconditionError(FedBroadcastError):
    pass


class InvariantError(FedBroadcastError, AssertionError):
    """A property guaranteed by construction failed to hold. Always a bug."""


class ConfigError(FedBroadcastError):
    """A scenario or protocol configuration cannot be run."""


class ScenarioParseError(FedBroadcastError):
    def __init__(self, message, field=None):
        if field:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class EquivalenceError(FedBroadcastError, AssertionError):
    """A constructed execution does not reproduce the source history."""

    def __init__(self, message, diff=None):
        super().__init__(message)
        self.diff = diff
