"""Exception types shared across the solver stack."""


class BlockeigError(Exception):
    """Base class for all library errors."""


class DimensionError(BlockeigError):
    """Operands have incompatible shapes."""


class RankDeficiencyError(BlockeigError):
    """Cholesky QR hit a non-positive pivot; the block is numerically rank deficient.

    ``column`` is the index of the first offending column.
    """

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"rank deficiency detected at column {column}")


class ApplicabilityError(BlockeigError):
    """Input is outside the regime where the fast path is valid."""


class SingularGramError(BlockeigError):
    """Gram matrix of the trial basis is numerically singular."""


class ParseError(BlockeigError):
    """Malformed input file. ``line`` is the 1-based offending line number."""

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class UnsupportedFormatError(BlockeigError):
    """File is syntactically valid but not a format this library accepts."""
