"""Exception hierarchy for design-lab."""


class DesignLabError(Exception):
    """Base class for all errors raised by design-lab."""


class InvalidArgumentError(DesignLabError, ValueError):
    """An argument violates an operation's precondition."""


class OutOfTheoremDomainError(InvalidArgumentError):
    """A parameter lies outside the hypothesis of the bound being evaluated (e.g. δ ≥ 1/(2 d_A))."""


class ResourceLimitError(DesignLabError):
    """A requested tensor dimension exceeds the configured cap."""


class RankDeficiencyError(DesignLabError):
    """A bipartite state has Schmidt rank below d_A."""


class InvalidCurveError(DesignLabError):
    """A curve of operators degenerates (vanishing trace) where it is evaluated."""
