"""Exception hierarchy shared across the package."""


class FoldlabError(Exception):
    """Base class for all package errors."""


class DomainError(FoldlabError, ValueError):
    """An argument lies outside the domain of an operation."""


class ModelError(FoldlabError, ValueError):
    """Invalid model construction or parameters."""


class ConfigError(FoldlabError, ValueError):
    """Invalid experiment configuration."""


class NumericalError(FoldlabError, RuntimeError):
    """A numerical procedure failed."""


class StiffnessError(NumericalError):
    """Step size underflow in the explicit integrator; retry with the implicit method."""


class EscapeError(NumericalError):
    """The orbit left the chart box before reaching the target section."""


class NoReturnError(NumericalError):
    """No return to the section within the allotted time."""


class SingularityError(NumericalError):
    """The orbit approached a singularity of the vector field."""


class DivergenceError(NumericalError):
    """Newton iteration did not converge."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class DegenerateFoldError(NumericalError):
    """Singular augmented Jacobian or failed nondegeneracy check."""


class NotFoundError(NumericalError):
    """A bracketed quantity (Hopf point, grazing value) was not found."""


class DerivativeUndefinedError(NumericalError):
    """A transition-map derivative does not exist (tangential arrival)."""
