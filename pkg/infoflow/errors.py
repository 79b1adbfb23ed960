"""Exceptions raised by infoflow.

All errors derive from ValueError so that callers can keep catching the
built-in type for invalid inputs.
"""


class InfoflowError(ValueError):
    """Base class for all infoflow errors."""


class NotStochasticError(InfoflowError):
    """Matrix has a negative entry or a row that does not sum to 1."""


class NotPrimitiveError(InfoflowError):
    """Matrix is reducible or periodic."""


class DimensionMismatchError(InfoflowError):
    """Shapes or lengths of the inputs do not agree."""


class SingularSolveError(InfoflowError):
    """The equilibrium system has no unique positive solution."""


class ModeUnavailableError(InfoflowError):
    """A contraction mode does not apply to this channel."""


class NotNormalizedError(InfoflowError):
    """Vector is not a normalized likelihood vector."""


class SizeOverflowError(InfoflowError):
    """Tree would exceed the configured node cap."""


class MixedEquilibriaError(InfoflowError):
    """Channels on the same tree do not share their equilibrium."""


class MalformedSpecError(InfoflowError):
    """A tree, channel or settings document is not well formed."""


class UnknownChannelError(InfoflowError):
    """An edge refers to a channel name that is not defined."""


class EnumerationTooLargeError(InfoflowError):
    """Exhaustive pattern enumeration would exceed the configured cap."""


class StateOutOfRangeError(InfoflowError):
    """State is not in the alphabet {0, ..., K}."""


class PatternImpossibleError(InfoflowError):
    """Pattern has zero likelihood under every root state."""


class BadPriorError(InfoflowError):
    """Prior has a nonpositive entry or does not sum to 1."""


class SOutOfRangeError(InfoflowError):
    """Polynomial lemma argument outside the open interval (0, 2)."""


class EpsilonOutOfRangeError(InfoflowError):
    """Slack epsilon is nonpositive or too large for the requested bound."""
