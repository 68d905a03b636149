"""Exception hierarchy for scribeid.

Every domain error carries a short ``category`` string that the CLI prints
as its one-line diagnostic.  Plain ``ValueError`` is used for bad arguments
(wrong ranges, dimension mismatches) and ``OSError`` for I/O failures.
"""


class ScribeError(Exception):
    """Base class for all domain errors raised by this package."""

    category = "error"


class FormatError(ScribeError):
    """Unsupported or undecodable file content."""

    category = "format"


class LayoutError(ScribeError):
    """A synthetic page cannot accommodate the requested layout."""

    category = "layout"


class DataError(ScribeError):
    """Input data violates a precondition (too short, too few samples...)."""

    category = "data"


class FitError(ScribeError):
    """A model fit cannot proceed (rank deficiency, degenerate objective)."""

    category = "fit"


class NumericalError(ScribeError):
    """A numerical failure that must not be silently clamped."""

    category = "numerical"


class AlignmentError(ScribeError):
    """Forced alignment found no admissible path."""

    category = "alignment"


class ScoreError(ScribeError):
    """A unit (line / block-line) cannot be scored."""

    category = "score"


class TrainingError(ScribeError):
    """Writer model training failed."""

    category = "training"


class IdentificationError(ScribeError):
    """A page yields no scorable units."""

    category = "identification"


class ConfigError(ScribeError):
    """Configuration problem, including train/inference digest mismatch."""

    category = "config"
