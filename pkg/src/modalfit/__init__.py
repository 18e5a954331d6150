"""Parametric modal regression for right-censored data.

The conditional mode of the response, not its mean, is linked to the
covariates.  Five families are supported (gamma, beta, Weibull, lognormal
and inverse Gaussian), each reparameterized by its mode and one global
dispersion.

>>> import numpy as np
>>> from modalfit import Dataset, fit
>>> rng = np.random.default_rng(1)
>>> x = rng.uniform(size=200)
>>> X = np.column_stack([np.ones(200), x])
>>> y = rng.gamma(3.5, np.exp(0.8 + 0.3 * x) / 2.5)
>>> res = fit(Dataset(y, X), "gamma")
>>> bool(res.converged)
True
"""

__version__ = "0.1.0"

from .dists import FamilyParams, cdf, density, log_density, log_survival, quantile, sample, survival
from .errors import (BadCensoringColumn, CalibrationError, ConfigError, ConstraintError, DataError,
                     DomainError, MissingValueError, ModalFitError, RankDeficientError,
                     SingularHessianError, SupportViolation)
from .family import Family, Link
from .inference import (CoefTable, FitResult, coef_table, covariance, diagnostics_export,
                        dispersion_interval, fit, information_criteria, pseudo_r2,
                        quantile_residuals)
from .likelihood import Dataset, censored_loglik, loglik_gradient, observed_hessian
from .optim import OptimResult, OptimSettings, maximize
from .reparam import dispersion_map, native_params

__all__ = [
    "Family", "Link", "FamilyParams", "Dataset",
    "density", "log_density", "cdf", "survival", "log_survival", "quantile", "sample",
    "dispersion_map", "native_params",
    "censored_loglik", "loglik_gradient", "observed_hessian",
    "OptimSettings", "OptimResult", "maximize",
    "fit", "FitResult", "CoefTable", "covariance", "coef_table", "dispersion_interval",
    "information_criteria", "pseudo_r2", "quantile_residuals", "diagnostics_export",
    "ModalFitError", "DomainError", "ConstraintError", "DataError", "MissingValueError",
    "SupportViolation", "BadCensoringColumn", "RankDeficientError", "SingularHessianError",
    "CalibrationError", "ConfigError",
]
