"""Exception hierarchy shared by every module of the package."""


class DHSICError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(DHSICError, ValueError):
    """Blocks, kernel specs or Gram matrices disagree in shape or count."""


class AllPointsIdentical(DHSICError, ValueError):
    """Every pairwise distance in a block is zero, so no bandwidth can be chosen."""


class GuardExceeded(DHSICError):
    """A combinatorial workload is larger than the configured cap.

    Attributes
    ----------
    count : int
        The size of the workload that was refused.
    cap : int
        The cap that was exceeded.
    """

    def __init__(self, message, count=None, cap=None):
        super().__init__(message)
        self.count = count
        self.cap = cap


class WrongArity(DHSICError, ValueError):
    """An operation restricted to a given number of variables got another."""


class DomainError(DHSICError, ValueError):
    """A probability or other bounded argument lies outside its domain."""


class SearchExhausted(DHSICError):
    """No permutation budget within the search bounds satisfies the target."""
