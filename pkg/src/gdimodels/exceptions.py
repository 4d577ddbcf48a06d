"""Exception hierarchy for gdimodels.

Everything raised on purpose by this package derives from :class:`GdiError`,
so callers can catch one type at the CLI boundary.
"""


class GdiError(Exception):
    """Base class for all gdimodels errors."""


class SumNotOneError(GdiError, ValueError):
    """Community proportions do not sum to 1 within tolerance."""


class NegativeProportionError(GdiError, ValueError):
    """A community proportion is negative."""


class RichnessExceedsSpeciesError(GdiError, ValueError):
    """Requested richness level is larger than the species count."""


class CountExceedsSubsetsError(GdiError, ValueError):
    """More communities requested at a richness level than distinct subsets exist."""


class DesignParseError(GdiError, ValueError):
    """A design or dataset CSV could not be parsed; carries row/column context."""

    def __init__(self, message, row=None, column=None):
        loc = ""
        if row is not None:
            loc += f" (row {row}"
            loc += f", column {column})" if column is not None else ")"
        super().__init__(message + loc)
        self.row = row
        self.column = column


class NonPositiveThetaError(GdiError, ValueError):
    """The interaction exponent must be strictly positive."""


class SpeciesCountTooSmallError(GdiError, ValueError):
    """At least two species are needed for interaction terms."""


class MissingGroupingError(GdiError, ValueError):
    """The functional-group family needs a species-to-group assignment."""


class DimensionMismatchError(GdiError, ValueError):
    """Shapes of design, coefficients, or response do not agree."""


class NotNestedError(GdiError, ValueError):
    """F-test called on fits that are not strictly nested."""


class ZeroResidualDfError(GdiError, ValueError):
    """The full model leaves no residual degrees of freedom."""


class PerfectFitError(GdiError, ValueError):
    """Information criteria are undefined when the residual sum of squares is zero."""


class NoInteractionTermsError(GdiError, ValueError):
    """Theta estimation requires a family with at least one interaction column."""


class NoReplicationError(GdiError, ValueError):
    """Lack-of-fit testing needs replicated communities."""


class ConfigError(GdiError, ValueError):
    """A study configuration file is invalid; carries every violation found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid study configuration:\n" + "\n".join(f"  - {p}" for p in self.problems))
