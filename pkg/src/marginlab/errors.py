"""Exception hierarchy shared across the package.

Every error raised on a bad input derives from :class:`MarginlabError`, so
callers (in particular the command-line layer) can map failure classes to
exit codes without string matching.
"""

from __future__ import annotations


class MarginlabError(Exception):
    """Base class for all package-specific errors."""


class DomainError(MarginlabError, ValueError):
    """A parameter is outside the mathematically meaningful range."""


class SizingError(DomainError):
    """A requested size works out to something unusable (zero rows, empty block)."""


class NotPositiveDefiniteError(DomainError):
    """A covariance matrix is not positive definite."""


class CapExceededError(MarginlabError):
    """An exhaustive operation was asked to exceed its enumeration cap."""


class UsageError(MarginlabError):
    """Command line was malformed (unknown flag, missing argument)."""
