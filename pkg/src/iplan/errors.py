"""Exception hierarchy shared across the pipeline."""


class IplanError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(IplanError):
    """An array or vector has the wrong shape or length."""


class CountOverflow(IplanError):
    """A per-type room count exceeds the registry maximum."""


class DomainError(IplanError):
    """A value lies outside the domain an operation accepts."""


class RegistryError(IplanError):
    """A type id or registry does not match the active registry."""


class NoFreeSpace(IplanError):
    """No admissible pixel remains for placing a room center."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class SequenceError(IplanError):
    """Two design-state sequences disagree in length or type order."""


class DataError(IplanError):
    """A corpus or problem instance is empty or unusable."""


class ParseError(IplanError):
    """A file does not conform to its schema."""

    def __init__(self, message: str, item: str | None = None):
        super().__init__(message if item is None else f"{item}: {message}")
        self.item = item


class VariantError(IplanError):
    """A session variant is missing a required input."""


class EditError(IplanError):
    """An edit operation is not valid for the current session phase."""


class NumericsError(IplanError):
    """A numerical routine produced a non-finite value."""


class CheckpointError(IplanError):
    """A checkpoint file is incompatible with the requested model."""


class ConfigError(IplanError):
    """A configuration file is malformed or has an unknown version."""
