"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`NhitoError`.
The CLI maps the three families below onto its exit codes.
"""


class NhitoError(Exception):
    """Base class for all package errors."""


class ModelParseError(NhitoError, ValueError):
    """A model or experiment document could not be parsed.

    ``path`` is the dotted location of the offending key.
    """

    def __init__(self, path, message):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class ValidationError(NhitoError, ValueError):
    """A model produced a non-finite or otherwise invalid coefficient."""

    def __init__(self, message, where=None):
        self.where = where
        super().__init__(message if where is None else f"{message} at (s, x) = {where}")


class OutOfDomainError(NhitoError, ValueError):
    """Evaluation of a tabulated coefficient outside its grid."""


class HypothesisViolation(NhitoError):
    """A model does not satisfy the hypotheses an operation needs."""


class SectorViolatedError(HypothesisViolation):
    """The sector condition fails, so delta-type quantities are undefined."""


class NumericalFailure(NhitoError):
    """A numerical procedure did not reach its tolerance."""

    def __init__(self, message, error_estimate=None):
        self.error_estimate = error_estimate
        super().__init__(message)


class QuadratureError(NumericalFailure):
    pass


class RightDerivativeError(NumericalFailure):
    pass


class IllPosedFitError(NumericalFailure):
    pass
