"""Shared exception types."""


class VivoError(Exception):
    """Base class for all engine errors."""


class InvalidInput(VivoError):
    """An operation received data violating its preconditions."""


class InsufficientData(VivoError):
    """Not enough samples to perform the requested computation."""


class ConfigError(VivoError):
    """A document failed validation.

    Carries the full list of problems so callers can report everything at
    once instead of failing on the first field.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class UnresolvedTarget(ConfigError):
    """A parameter address does not resolve against the processing chain."""


class DigestMismatch(VivoError):
    """A session log's config digests do not match the supplied configs."""


class ReplayDivergence(VivoError):
    """Replaying a session log produced a trace differing from the recorded one."""
