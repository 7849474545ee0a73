"""Exception hierarchy shared by every pssclock module."""

from __future__ import annotations


class ClockError(Exception):
    """Base class for all pssclock errors."""


class DomainError(ClockError, ValueError):
    """An argument lies outside the domain of the function evaluated."""


class InvalidParameterError(ClockError, ValueError):
    """A family or experiment parameter violates its constraint."""


class FamilySpecError(ClockError):
    """A family specification string does not follow the grammar."""


class ConfigError(ClockError):
    """A run configuration is malformed or names an unknown key."""


class InconsistencyError(ClockError):
    """Two independent computations of the same quantity disagree."""


class ExtensionLimitError(ClockError):
    """A lazily extended path needed more extensions than allowed."""


class ResamplingError(ClockError):
    """Importance weights are too degenerate to resample from."""


class PrecisionError(ClockError):
    """A numerical derivative did not stabilise under Richardson refinement."""


class VerificationError(ClockError):
    """A numeric sweep found a violation of a claimed inequality."""


class NoSamplerError(ClockError):
    """No sampler exists for the requested law."""


class PreconditionError(ClockError, ValueError):
    """An operation was called outside its precondition."""
