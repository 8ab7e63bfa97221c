"""Exception types shared across the simulator modules."""


class WrapHapticsError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(WrapHapticsError, ValueError):
    """An argument violates an operation's precondition."""


class ConfigurationError(WrapHapticsError):
    """A required piece of wiring (channel, source, task) is missing."""


class StateError(WrapHapticsError):
    """Operation attempted in the wrong phase or on an unready object."""


class FitDegenerateError(WrapHapticsError):
    """Psychometric data carries no slope information (flat proportions)."""


class TrainingError(WrapHapticsError):
    """Ensemble training diverged (non-finite loss)."""
