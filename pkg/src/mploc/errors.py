"""Exception types shared across the package."""


class MplocError(ValueError):
    """Base class for all errors raised by this package."""


class ConfigurationError(MplocError):
    """A configuration object holds inconsistent or out-of-range values."""


class ValidationError(MplocError):
    """An input array or object violates a documented precondition."""


class DelayRangeError(MplocError):
    """A channel tap delay falls outside the representable delay grid."""


class DegenerateChannelError(MplocError):
    """A channel covariance carries no power where the operation needs it."""


class RankDeficiencyError(MplocError):
    """A Fisher information matrix is singular for the requested parameters."""
