"""Exception types shared across the package."""


class JoinPolicyError(Exception):
    """Base class for all package errors."""


class InvalidDistribution(JoinPolicyError):
    """Weights are negative, empty, or do not sum to one."""


class ZeroOverlap(JoinPolicyError):
    """The two sources share no common label (mu = 0)."""


class LabelOutOfRange(JoinPolicyError):
    """A label index falls outside the common support."""


class TraceTooShort(JoinPolicyError):
    """A trace does not cover the requested epoch."""


class StateExplosion(JoinPolicyError):
    """Reachable state set exceeded the configured cap."""


class HorizonTooLarge(JoinPolicyError):
    """Exhaustive enumeration was requested beyond its horizon cap."""


class NotErgodic(JoinPolicyError):
    """The embedded chain fails the single-recurrent-class/aperiodicity check."""


class TruncationInsufficient(JoinPolicyError):
    """Series truncation leaves a tail bound above the requested precision."""


class QuadratureFailure(JoinPolicyError):
    """Numerical integration could not reach the requested tolerance."""


class PreconditionViolated(JoinPolicyError):
    """An operation was called outside its stated domain of validity."""


class ConfigInvalid(JoinPolicyError):
    """An experiment configuration failed validation."""
