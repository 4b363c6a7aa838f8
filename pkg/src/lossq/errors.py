"""Exception hierarchy shared by every lossq module."""


class LossqError(Exception):
    """Base class for all lossq failures."""


class ValidationError(LossqError, ValueError):
    """An input violates a documented constraint.

    ``field`` carries a dotted path (``model.nu``) when the error comes from
    configuration parsing.
    """

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class ConfigurationError(ValidationError):
    """The model parameters describe a system that cannot operate."""


class RegimeError(LossqError):
    """An operation was called outside the traffic regime it is valid for."""


class BracketError(RegimeError):
    """No sign change was found while bracketing a root."""


class IllConditionedError(LossqError):
    """A recurrence kernel is too close to degenerate to solve forward."""


class TruncationError(LossqError):
    """A series tail could not be pushed below tolerance within the hard cap."""


class UnsupportedOrderError(LossqError):
    """A transform derivative of this order has no closed form for the kind."""


class RunawaySimulationError(LossqError):
    """A simulated busy cycle exceeded the event cap."""


class DegenerateComparisonError(LossqError):
    """A z-score was requested for a mismatch with zero standard error."""
