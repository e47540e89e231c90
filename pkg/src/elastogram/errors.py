"""Exception types shared across the package."""


class ElastogramError(Exception):
    """Base class for all package-specific errors."""


class NonAlignedInterface(ElastogramError):
    """The requested interface height does not land on a grid row."""


class GridMismatch(ElastogramError):
    """Two fields that must share a grid do not."""


class MalformedHeader(ElastogramError):
    """Field file header is missing or cannot be parsed."""


class RowCountMismatch(ElastogramError):
    """Field file row count disagrees with its header."""


class NotInAdmissibleSet(ElastogramError):
    """Modulus values violate the admissible box constraints."""


class SingularSystem(ElastogramError):
    """The discrete system is singular (interior resonance in elastic mode)."""


class SolverDivergence(ElastogramError):
    """Linear solve finished but the residual check failed."""


class ZeroModulus(ElastogramError):
    """Dispersion relation evaluated at a zero modulus."""


class DegenerateTransmission(ElastogramError):
    """The 4x4 transmission system is singular."""


class DimensionMismatch(ElastogramError):
    """Parameter-vector length does not match the Jacobian."""


class BracketFailure(ElastogramError):
    """The step-size equation has no root inside the search bracket."""


class DegenerateResidual(ElastogramError):
    """Regularization-parameter search called with a zero residual."""


class NonFiniteStep(ElastogramError):
    """An iteration produced NaN or Inf."""


class InitialOutsideAdmissibleSet(ElastogramError):
    """Initial guess violates the admissible box constraints."""


class BallEscapesAdmissibleSet(ElastogramError):
    """A sampling ball around the base parameters leaves the admissible box."""


class NonGridColumn(ElastogramError):
    """Requested profile line does not coincide with a grid column."""


class LayoutMismatch(ElastogramError):
    """Recovered and reference parameter layouts differ."""


class ConfigError(ElastogramError):
    """Experiment configuration failed validation."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
