"""Exception taxonomy.

Data problems (unusable files or input values) and numerical failures
(singular systems, overflow) live on separate branches so that callers --
the command line in particular -- can map them to distinct exit codes.
"""


class LogsaeError(Exception):
    """Base class for every error raised by this package."""


class DataError(LogsaeError):
    """A dataset or input value is unusable."""


class ParseError(DataError):
    """A file could not be parsed into areas; the message pinpoints where."""


class NonPositiveValue(DataError):
    """A raw-scale value that must be strictly positive is not."""


class NonPsdSigma(DataError):
    """A measurement-error covariance matrix is not symmetric PSD."""


class InsufficientAreas(DataError):
    """Too few areas for the requested computation."""


class NumericalError(LogsaeError):
    """A computation failed numerically."""


class DegenerateVariance(NumericalError):
    """Every variance component is zero, so shrinkage is undefined."""


class SingularMomentMatrix(NumericalError):
    """The weighted moment system is singular or numerically unsolvable."""


class PredictionOverflow(NumericalError):
    """An exponent left the representable double range.

    Results are reported as errors rather than silently saturated to 0 or
    inf, because a saturated prediction or variance term is meaningless.
    """
