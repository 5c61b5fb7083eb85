"""Exception hierarchy for fujita-lab.

Domain errors (bad inputs, violated preconditions) subclass ``ValueError``;
numerical failures subclass ``RuntimeError``; unwritable output raises
``OutputError``.  The CLI maps all of them to exit code 2, the HTTP surface
to 422.
"""


class FujitaLabError(Exception):
    """Base class for every error raised by the lab."""


class DomainError(FujitaLabError, ValueError):
    """An argument lies outside the domain of the operation."""


class InvalidFieldError(DomainError):
    """A field holds non-finite samples or has the wrong shape."""


class UnsupportedDimensionError(DomainError):
    """The operation is only implemented for a subset of dimensions."""


class UndefinedExponentError(DomainError):
    """A critical exponent is undefined for the given (d, s)."""


class ParameterDomainError(DomainError):
    """p lies outside the range where the requested parameters exist."""


class RangeError(DomainError):
    """A radius or time range does not fit the grid or trajectory."""


class WindowError(DomainError):
    """A decay-fit window is unusable (norm underflow, boundary contamination)."""


class CutoffConstructionError(DomainError):
    """A capacity quotient is not integrable for the given cutoff."""


class ConfigError(DomainError):
    """An experiment config failed to parse or validate.

    ``issues`` holds ``(line, message)`` pairs; line is 0 when the problem
    is not tied to a specific line (e.g. a missing section).
    """

    def __init__(self, issues: list[tuple[int, str]]):
        self.issues = issues
        lines = [f"line {ln}: {msg}" if ln else msg for ln, msg in issues]
        super().__init__("invalid config:\n  " + "\n  ".join(lines))


class ContractionError(FujitaLabError, RuntimeError):
    """The Picard map failed to contract."""

    def __init__(self, ratio: float, iteration: int):
        self.ratio = ratio
        self.iteration = iteration
        super().__init__(
            f"Picard map is not a contraction: ratio {ratio:.6g} >= 1 "
            f"for 3 consecutive iterations (last iteration {iteration})"
        )


class ConvergenceError(FujitaLabError, RuntimeError):
    """An iteration exhausted its budget without meeting its tolerance."""


class FitError(FujitaLabError, RuntimeError):
    """Too few usable points for a least-squares fit."""


class NumericalOverflow(FujitaLabError, FloatingPointError):
    """A time step produced non-finite values."""


class ResolutionWarning(UserWarning):
    """The grid under-resolves a kernel or a solution."""


class OutputError(FujitaLabError, OSError):
    """A result file or its directory cannot be written."""
