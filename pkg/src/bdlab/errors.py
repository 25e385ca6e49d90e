"""Exception types shared across the library."""


class BdlabError(Exception):
    """Base class for all library errors."""


class DimensionError(BdlabError):
    """Shapes or lengths of the inputs do not match."""


class InvalidBoundError(BdlabError):
    """A candidate lattice bound has a negative entry."""


class ArityError(BdlabError):
    """An operation received an empty or wrongly sized collection."""


class ScaleError(BdlabError):
    """An enumeration would exceed the configured cap."""


class ContractError(BdlabError):
    """A documented precondition of an operation was violated."""


class ParameterError(BdlabError):
    """A numeric parameter is outside the regime the method supports."""


class RegimeError(ParameterError):
    """The requested parameters cannot certify the claim; adjust them."""


class MalformedProblemError(BdlabError):
    """An optimization problem contains NaN/inf or inconsistent bounds."""


class RankError(BdlabError):
    """Input functions are linearly dependent where independence is required."""


class RetryExhaustedError(BdlabError):
    """A randomized search hit its round cap; the seed is in the message."""


class InternalInvariantError(BdlabError):
    """A step the underlying counting argument guarantees has failed: a bug."""
