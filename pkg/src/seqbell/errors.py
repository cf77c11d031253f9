"""Exception types shared across the package.

The CLI maps these onto process exit codes, so new error conditions should
reuse one of the classes below rather than raising bare ValueError.
"""


class SeqbellError(Exception):
    """Base class for all package errors."""


class DomainError(SeqbellError):
    """A numeric argument is outside its allowed range."""


class DegenerateBranchError(SeqbellError):
    """Conditioning on a measurement outcome of (near-)zero probability."""


class CertificationUndefinedError(SeqbellError):
    """The guessing bound is undefined (separable protocol state, beta = 2)."""


class ModelViolationError(SeqbellError):
    """Requested visibilities cannot be produced by the source noise model."""


class BracketingError(SeqbellError):
    """A root/threshold bracket does not straddle the criterion."""


class CountTableError(SeqbellError):
    """A coincidence-count table is malformed (message cites the row)."""


class InsufficientDataError(SeqbellError):
    """A count table has no events for a setting that the estimator needs."""
