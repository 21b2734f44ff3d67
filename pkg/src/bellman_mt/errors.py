"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the function."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to meet its tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NoRootError(ConvergenceError):
    """The equation has no root in the admissible bracket."""


class SectorError(DomainError):
    """A point lies outside the sector where a construction applies."""


class StepSizeError(DomainError):
    """A finite-difference stencil leaves the domain or touches a non-smooth set."""


class ClassificationAmbiguityError(RuntimeError):
    """A growth test could not separate sub- from supercritical behaviour."""
