"""Exception hierarchy shared by every modalfit module."""


class ModalFitError(Exception):
    """Base class for all modalfit errors."""


class DomainError(ModalFitError, ValueError):
    """Argument outside the domain of a distribution or special function."""


class ConstraintError(ModalFitError, ValueError):
    """Parameters violate a family restriction (inverse Gaussian: lambda > 3M)."""


class DataError(ModalFitError, ValueError):
    """Malformed or unusable input data."""


class MissingValueError(DataError):
    """A referenced column contains missing values."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(
            "missing values (NA) in column(s): " + ", ".join(self.columns)
            + "; no imputation is performed"
        )


class SupportViolation(DataError):
    """Response values fall outside the family's support."""


class BadCensoringColumn(DataError):
    """Censoring indicator is not a 0/1 vector of the right length."""


class RankDeficientError(DataError):
    """Design matrix does not have full column rank."""


class SingularHessianError(ModalFitError, ArithmeticError):
    """Observed information is not positive definite; no covariance."""


class CalibrationError(ModalFitError, RuntimeError):
    """Censoring-rate calibration could not bracket the target fraction."""


class ConfigError(ModalFitError, ValueError):
    """Invalid simulation configuration file."""
