"""Error hierarchy for the selection app.

Three families map onto the CLI exit codes:
- ConfigError    (2) - invalid run configuration or options
- DataError      (3) - unusable input data
- NumericalError (4) - a fit or score is mathematically undefined
"""


class SelectionError(Exception):
    """Base class for every error raised by the selection app."""

    exit_code = 1


class ConfigError(SelectionError):
    """Run configuration or command options are invalid."""

    exit_code = 2


class DataError(SelectionError):
    """Input data cannot be used as given."""

    exit_code = 3


class NumericalError(SelectionError):
    """A fit or a score is undefined for the supplied numbers."""

    exit_code = 4


# ---------- data ----------

class ParseError(DataError):
    """Malformed CSV content; `line` is the 1-based line in the file when known."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.detail = message
        self.line = line
        self.source = source
        if line is not None:
            message = f"line {line}: {message}"
        if source is not None:
            message = f"{source}: {message}"
        super().__init__(message)


class GapError(DataError):
    """Years are not consecutive."""


class NonPositiveCount(DataError):
    """A population count is zero or negative, so its logarithm does not exist."""


class LengthMismatch(DataError):
    """Design rows and response length disagree."""


class UnknownCovariate(DataError):
    """A model names a covariate the dataset does not contain."""


class AlignmentError(DataError):
    """A covariate series is not aligned with the years."""


class TooFewRows(DataError):
    """Not enough usable rows for the requested computation."""


class NoDerangement(DataError):
    """No derangement exists for fewer than two outcomes."""


# ---------- numerical ----------

class RankDeficient(NumericalError):
    """Design columns are collinear."""


class PerfectFit(NumericalError):
    """Residual sum of squares is zero to tolerance; the likelihood is unbounded."""


class LeverageOne(NumericalError):
    """An observation has leverage one; its Cook's distance is undefined."""


class SmallSample(NumericalError):
    """n - k - 1 < 1, so the AICc correction is undefined."""


class ZeroDensity(NumericalError):
    """Forecast density at the outcome is not positive; ignorance is infinite."""


class FoldPerfectFit(PerfectFit):
    """A leave-one-out fold fits its training rows perfectly."""


class FoldRankDeficient(RankDeficient):
    """A leave-one-out fold has a collinear training design."""
