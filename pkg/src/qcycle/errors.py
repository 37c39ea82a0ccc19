"""Exception types shared across the package."""


class QcycleError(Exception):
    """Base class for library errors."""


class DimensionError(QcycleError, ValueError):
    """Operands whose dimensions do not line up."""


class GraphError(QcycleError, ValueError):
    """Malformed graph, unknown vertex, or an operation needing a different graph shape."""


class CapExceededError(QcycleError):
    """An enumeration would exceed the configured size cap."""


class ModelError(QcycleError, ValueError):
    """A model that cannot be constructed or fails validation."""


class DocumentError(QcycleError, ValueError):
    """A model document that does not parse; ``location`` points at the field."""

    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location
        self.message = message


class InconsistentModelError(QcycleError):
    """Raised when a distribution is requested from a model with zero success probability."""
