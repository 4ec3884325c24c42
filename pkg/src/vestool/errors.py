"""Exception hierarchy shared by every vestool module."""


class VesError(Exception):
    """Base class for all errors raised by vestool."""

    code = "E_VES"


class DomainError(VesError, ValueError):
    """An argument lies outside the domain where a formula is defined."""

    code = "E_DOMAIN"


class SingularityError(DomainError):
    """The substitution parameter is too close to the Cobb-Douglas limit rho = 0."""

    code = "E_SINGULAR"


class SingularDenominatorError(DomainError):
    """``1 - b - c`` vanishes, so the Hildebrand-Liu scale cannot be mapped."""

    code = "E_SINGULAR_DENOM"


class NonEconomicRegionError(DomainError):
    code = "E_NONECONOMIC"


class DegenerateCurvatureError(DomainError):
    code = "E_CURVATURE"


class NonInvertibleError(VesError):
    """No admissible parameter vector reproduces the given coefficients."""

    code = "E_NONINVERTIBLE"

    def __init__(self, message, best_residual=float("nan")):
        super().__init__(message)
        self.best_residual = best_residual


class AmbiguousRootsError(VesError):
    code = "E_AMBIGUOUS"

    def __init__(self, message, roots=()):
        super().__init__(message)
        self.roots = tuple(roots)


class RankDeficiencyError(VesError):
    code = "E_RANK"

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class InsufficientDataError(VesError):
    code = "E_INSUFFICIENT"


class IncomparableFitsError(VesError):
    code = "E_INCOMPARABLE"


class UndefinedSRMSEError(VesError):
    code = "E_SRMSE"


class SchemaError(VesError):
    code = "E_SCHEMA"


class EmptyInputError(VesError):
    code = "E_EMPTY"
