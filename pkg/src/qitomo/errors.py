"""Exception hierarchy shared across the package."""


class QitomoError(Exception):
    """Base class for all package errors."""


class ValidationError(QitomoError, ValueError):
    """Input failed a structural or physical validity check."""


class InformationalCompletenessError(ValidationError):
    """A fiducial ensemble or probability matrix is rank deficient."""


class NumericalError(QitomoError, RuntimeError):
    """An iterative routine failed to converge.

    ``details`` carries whatever partial result the routine had (bounds,
    best iterate, iteration count) so callers can report it.
    """

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details
