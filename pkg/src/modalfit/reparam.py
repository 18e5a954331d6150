"""Closed-form maps from (mode, dispersion) to each family's native parameters.

The regression acts on the mode ``M`` through a link; every family then
carries one global dispersion ``phi > 0`` (optimized as ``psi = log phi``)
that is turned into the family's shape-like parameter by
:func:`dispersion_map`:

=========  =====================  =========================================
family     shape-like parameter   native parameters given M
=========  =====================  =========================================
gamma      alpha = 1/phi + 1      scale = M / (alpha - 1) = M * phi
beta       alpha = phi + 1        beta = (alpha - 1)/M - alpha + 2
weibull    k = phi + 1.01         scale = M * (k / (k - 1))**(1/k)
lognormal  sigma2 = phi           mu = log M + sigma2
invgauss   lambda = phi           mean = (1/M**2 - 3/(lambda M))**(-1/2)
=========  =====================  =========================================

Each map places the mode of the native density exactly at ``M``.  The
inverse Gaussian map needs ``lambda > 3 M``; anything else raises
:class:`~modalfit.errors.ConstraintError`.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import ConstraintError, DomainError
from .family import Family, Link

__all__ = [
    "Family", "Link", "WEIBULL_OFFSET",
    "GammaParams", "BetaParams", "WeibullParams", "LognormalParams", "InvGaussParams",
    "dispersion_map", "dispersion_from_shape", "native_params",
    "linear_predictor_to_mode", "mode_to_linear_predictor",
]

# k = phi + 1.01 keeps the Weibull shape away from the k -> 1 boundary
WEIBULL_OFFSET = 1.01


class GammaParams(NamedTuple):
    shape: np.ndarray
    scale: np.ndarray


class BetaParams(NamedTuple):
    alpha: np.ndarray
    beta: np.ndarray


class WeibullParams(NamedTuple):
    shape: np.ndarray
    scale: np.ndarray


class LognormalParams(NamedTuple):
    mu: np.ndarray
    sigma2: np.ndarray


class InvGaussParams(NamedTuple):
    mean: np.ndarray
    shape: np.ndarray


NativeParams = GammaParams | BetaParams | WeibullParams | LognormalParams | InvGaussParams


def dispersion_map(family, phi):
    """Shape-like parameter implied by the global dispersion ``phi``."""
    family = Family.coerce(family)
    phi = np.asarray(phi, dtype=float)
    if np.any(~(phi > 0)):
        raise DomainError("dispersion must be positive")
    return _shape(family, phi)


def _shape(family: Family, phi):
    if family is Family.GAMMA:
        return 1.0 / phi + 1.0
    if family is Family.BETA:
        return phi + 1.0
    if family is Family.WEIBULL:
        return phi + WEIBULL_OFFSET
    return phi  # lognormal sigma^2, inverse Gaussian lambda


def dispersion_from_shape(family, shape):
    """Inverse of :func:`dispersion_map`."""
    family = Family.coerce(family)
    shape = np.asarray(shape, dtype=float)
    if family is Family.GAMMA:
        phi = 1.0 / (shape - 1.0)
    elif family is Family.BETA:
        phi = shape - 1.0
    elif family is Family.WEIBULL:
        phi = shape - WEIBULL_OFFSET
    else:
        phi = shape
    if np.any(~(phi > 0)):
        raise DomainError(f"shape {shape} is not reachable for {family.value}")
    return phi


def _native(family: Family, mode, phi):
    """Unchecked mapping; inputs are assumed valid and broadcastable."""
    s = _shape(family, phi)
    if family is Family.GAMMA:
        return GammaParams(s, mode * phi)
    if family is Family.BETA:
        return BetaParams(s, (s - 1.0) / mode - s + 2.0)
    if family is Family.WEIBULL:
        return WeibullParams(s, mode * (s / (s - 1.0)) ** (1.0 / s))
    if family is Family.LOGNORMAL:
        return LognormalParams(np.log(mode) + s, s)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = (1.0 / mode ** 2 - 3.0 / (s * mode)) ** -0.5
    return InvGaussParams(mean, s)


def check_mode(family, mode) -> np.ndarray:
    family = Family.coerce(family)
    mode = np.asarray(mode, dtype=float)
    lo, hi = family.mode_domain
    if np.any(~((mode > lo) & (mode < hi))):
        raise DomainError(f"mode outside the {family.value} mode domain {family.mode_domain}")
    return mode


def native_params(family, mode, phi) -> NativeParams:
    """Native parameters whose distribution has its mode at ``mode``.

    ``mode`` and ``phi`` broadcast against each other.
    """
    family = Family.coerce(family)
    mode = check_mode(family, mode)
    phi = np.asarray(phi, dtype=float)
    if np.any(~(phi > 0)):
        raise DomainError("dispersion must be positive")
    if family is Family.INVGAUSS and np.any(phi <= 3.0 * mode):
        raise ConstraintError("inverse Gaussian requires lambda > 3 * mode")
    return _native(family, mode, phi)


def linear_predictor_to_mode(link, eta):
    """Conditional mode ``g^{-1}(eta)``."""
    return Link.coerce(link).inverse(eta)


def mode_to_linear_predictor(link, mode):
    return Link.coerce(link)(mode)
