"""Exception types shared across the package."""


class DomsplitError(Exception):
    """Base class for package-specific failures."""


class NumericalError(DomsplitError):
    """A numerical routine failed to converge or produced invalid output."""

    def __init__(self, message: str, label: str | None = None):
        super().__init__(message if label is None else f"{message} [{label}]")
        self.label = label


class SingularMatrixError(DomsplitError, ValueError):
    """Input matrix is singular, or numerically indistinguishable from singular."""


class IllDefinedSplittingError(DomsplitError):
    """The singular-value gap is too degenerate to define the requested splitting."""


class ConditioningError(DomsplitError):
    """A constructed basis is too ill-conditioned to trust."""


class DominationGateError(DomsplitError):
    """Multicone construction refused because the family is not certified dominated."""


class MulticoneConstructionError(DomsplitError):
    """Multicone construction failed; carries the (epsilon, component count) scan table."""

    def __init__(self, message: str, table: list[tuple[float, int]]):
        super().__init__(message)
        self.table = table
