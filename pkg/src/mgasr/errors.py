"""Exception hierarchy shared across the toolkit.

Exit-code mapping (see cli.main): UsageError -> 2, DataFormatError -> 3,
SearchFailure -> 4.
"""


class MgasrError(Exception):
    """Base class for all toolkit errors."""


class UsageError(MgasrError):
    """Bad arguments or an invalid configuration."""


class DataFormatError(MgasrError):
    """Malformed input file or inconsistent on-disk data."""


class FstError(MgasrError):
    """Structural problem with an Fst (validation, symbol tables)."""


class DeterminizeError(FstError):
    """State-expansion cap exceeded; input possibly non-determinizable."""


class SearchFailure(MgasrError):
    """Beam search lost all tokens."""

    def __init__(self, frame: int, message: str | None = None):
        self.frame = frame
        super().__init__(message or f"search failed: no surviving token at frame {frame}")
