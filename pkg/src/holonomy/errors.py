"""Exception hierarchy.

Configuration problems and numerical failures are kept apart so the CLI can
map them onto distinct exit codes.
"""


class HolonomyError(Exception):
    """Base class for all errors raised by the package."""


class SchemaError(HolonomyError, ValueError):
    """A parameter point does not match the schema of its family."""


class NonHermitianError(HolonomyError, ValueError):
    pass


class NumericalError(HolonomyError):
    """A computation could not be carried out to the requested accuracy."""


class OverlapError(NumericalError):
    """Consecutive frames are (nearly) orthogonal; the path is too coarse."""


class DegeneracyChangeError(NumericalError):
    """The selected eigenspace changed dimension along a path."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class NormDriftError(NumericalError):
    pass


class ClosureError(NumericalError):
    """A path or frame that must be closed is not."""


class ConfigError(HolonomyError):
    """Invalid job configuration; carries every problem found."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DegenerateStateError(HolonomyError, ValueError):
    """An Abelian connection was requested for a state inside a degenerate cluster."""
