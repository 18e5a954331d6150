"""Asymptotic inference and diagnostics for fitted modal regressions.

The covariance of ``(gamma, psi)`` is the inverse observed information
``[-H]^{-1}``.  Coefficient tests are Wald tests against the normal
distribution; the dispersion interval is built on the ``psi = log phi``
scale and exponentiated.  Residuals are randomized quantile residuals:
for a censored unit the probability integral transform is drawn uniformly
on ``[F(y), 1]``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import special
from .dists import _log_cdf_sf
from .errors import SingularHessianError
from .family import Family, Link
from .likelihood import Dataset
from .optim import OptimResult, OptimSettings, maximize

__all__ = [
    "FitResult", "CoefTable", "Diagnostics", "DegenerateFitWarning",
    "fit", "covariance", "coef_table", "dispersion_interval",
    "information_criteria", "pseudo_r2", "quantile_residuals", "diagnostics_export",
    "RESIDUAL_CLAMP",
]

#: uniform draws are clamped to [RESIDUAL_CLAMP, 1 - RESIDUAL_CLAMP]
RESIDUAL_CLAMP = 1e-7


class DegenerateFitWarning(RuntimeWarning):
    """A summary statistic is undefined for this fit (e.g. constant fitted modes)."""


@dataclass
class FitResult:
    """Everything a fit produces.

    ``vcov_full`` covers ``(gamma, log phi)``; it is ``None`` when the
    observed information is not positive definite (``vcov_available`` is
    then False and Wald summaries raise :class:`SingularHessianError`).
    """

    coefficients: np.ndarray
    dispersion: float
    vcov_full: np.ndarray | None
    fitted_modes: np.ndarray
    residuals: np.ndarray
    loglik: float
    n: int
    family: Family
    link: Link
    cens: np.ndarray
    names: list[str]
    optim: OptimResult
    n_par: int = field(init=False)

    def __post_init__(self):
        self.n_par = self.coefficients.size + 1

    @property
    def vcov_beta(self) -> np.ndarray | None:
        if self.vcov_full is None:
            return None
        p = self.coefficients.size
        return self.vcov_full[:p, :p]

    @property
    def vcov_available(self) -> bool:
        return self.vcov_full is not None

    @property
    def log_dispersion(self) -> float:
        return float(np.log(self.dispersion))

    @property
    def converged(self) -> bool:
        return self.optim.converged

    @property
    def theta(self) -> np.ndarray:
        return np.append(self.coefficients, self.log_dispersion)


@dataclass
class CoefTable:
    names: list[str]
    estimate: np.ndarray
    std_error: np.ndarray
    z: np.ndarray
    p_value: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float

    def rows(self):
        for i, name in enumerate(self.names):
            yield (name, float(self.estimate[i]), float(self.std_error[i]), float(self.z[i]),
                   float(self.p_value[i]), float(self.lower[i]), float(self.upper[i]))


@dataclass
class Diagnostics:
    """Plot-ready diagnostic records.

    ``points`` holds ``(fitted_mode, residual, censored)`` per unit in data
    order; ``qq`` holds ``(theoretical, sample, censored)`` sorted by
    residual, with plotting positions ``(i - 0.5) / n``.
    """

    points: list[tuple[float, float, int]]
    qq: list[tuple[float, float, int]]


def covariance(optres: OptimResult | np.ndarray) -> np.ndarray:
    """``[-H]^{-1}`` through a Cholesky factorization of ``-H``."""
    H = optres.hessian if isinstance(optres, OptimResult) else np.asarray(optres, dtype=float)
    if not np.all(np.isfinite(H)):
        raise SingularHessianError("observed Hessian has non-finite entries")
    info = -0.5 * (H + H.T)
    try:
        L = np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        raise SingularHessianError("observed information is not positive definite") from None
    Linv = np.linalg.solve(L, np.eye(L.shape[0]))
    return Linv.T @ Linv


def _z_crit(level: float) -> float:
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    return float(special.normal_quantile(1.0 - (1.0 - level) / 2.0))


def _require_vcov(fit: FitResult) -> np.ndarray:
    if fit.vcov_full is None:
        raise SingularHessianError("covariance unavailable: observed information not positive definite")
    return fit.vcov_full


def coef_table(fit: FitResult, level: float = 0.95) -> CoefTable:
    """Wald table: estimate, SE, z, two-sided normal p-value, CI."""
    vcov = _require_vcov(fit)
    p = fit.coefficients.size
    se = np.sqrt(np.diag(vcov)[:p])
    est = fit.coefficients
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, est / se, np.where(est == 0, 0.0, np.sign(est) * np.inf))
    pval = 2.0 * special.normal_cdf(-np.abs(z))
    zc = _z_crit(level)
    return CoefTable(list(fit.names), est.copy(), se, z, np.minimum(pval, 1.0),
                     est - zc * se, est + zc * se, level)


def dispersion_interval(fit: FitResult, level: float = 0.95) -> tuple[float, float]:
    """``exp(psi_hat -/+ z * SE(psi_hat))``."""
    vcov = _require_vcov(fit)
    se = float(np.sqrt(vcov[-1, -1]))
    zc = _z_crit(level)
    psi = fit.log_dispersion
    return float(np.exp(psi - zc * se)), float(np.exp(psi + zc * se))


def information_criteria(fit: FitResult) -> tuple[float, float]:
    """``(AIC, BIC)`` with ``n_par = p + 1``."""
    aic = -2.0 * fit.loglik + 2.0 * fit.n_par
    bic = -2.0 * fit.loglik + np.log(fit.n) * fit.n_par
    return float(aic), float(bic)


def pseudo_r2(fit: FitResult, data: Dataset) -> float:
    """Squared Pearson correlation of ``y`` with the fitted modes.

    All units enter, censored ones at their censoring value.  Returns 0 and
    emits :class:`DegenerateFitWarning` when either vector is constant.
    """
    y = data.y
    m = fit.fitted_modes
    yc = y - y.mean()
    mc = m - m.mean()
    denom = np.sqrt(np.dot(yc, yc) * np.dot(mc, mc))
    if not denom > 0:
        warnings.warn("pseudo-R2 undefined: constant fitted modes or response",
                      DegenerateFitWarning, stacklevel=2)
        return 0.0
    r = float(np.dot(yc, mc) / denom)
    return min(1.0, r * r)


def quantile_residuals(fit: FitResult, data: Dataset, rng: np.random.Generator) -> np.ndarray:
    """Randomized quantile residuals ``Phi^{-1}(u_i)``.

    ``u_i = F(y_i)`` for observed units; for censored units one uniform draw
    on ``[F(y_i), 1]`` is taken from ``rng`` in data order.  All ``u_i`` are
    clamped to ``[1e-7, 1 - 1e-7]``.
    """
    family = fit.family
    log_f, _ = _log_cdf_sf(family, fit.fitted_modes, fit.dispersion, data.y)
    u = np.exp(log_f)
    cens = data.cens == 1
    if np.any(cens):
        lo = u[cens]
        u[cens] = lo + (1.0 - lo) * rng.random(int(cens.sum()))
    u = np.clip(u, RESIDUAL_CLAMP, 1.0 - RESIDUAL_CLAMP)
    return special.normal_quantile(u)


def diagnostics_export(fit: FitResult, data: Dataset) -> Diagnostics:
    r = fit.residuals
    points = [(float(m), float(e), int(c)) for m, e, c in zip(fit.fitted_modes, r, data.cens)]
    order = np.argsort(r, kind="stable")
    n = r.size
    theo = special.normal_quantile((np.arange(1, n + 1) - 0.5) / n)
    qq = [(float(t), float(r[i]), int(data.cens[i])) for t, i in zip(np.atleast_1d(theo), order)]
    return Diagnostics(points, qq)


def fit(data: Dataset, family, link=None, settings: OptimSettings | None = None,
        rng: np.random.Generator | int | None = 0) -> FitResult:
    """Fit a censored modal regression and assemble a :class:`FitResult`.

    ``rng`` (a generator or a seed) drives the randomization of censored
    residuals only; estimates do not depend on it.
    """
    family = Family.coerce(family)
    link = Link.coerce(link or family.default_link)
    opt = maximize(data, family, link, settings)
    try:
        vcov = covariance(opt)
    except SingularHessianError:
        warnings.warn("observed information not positive definite; covariance unavailable",
                      DegenerateFitWarning, stacklevel=2)
        vcov = None
    coef = opt.theta[:-1].copy()
    phi = float(np.exp(opt.theta[-1]))
    modes = link.inverse(data.X @ coef)
    result = FitResult(coefficients=coef, dispersion=phi, vcov_full=vcov, fitted_modes=modes,
                       residuals=np.empty(0), loglik=float(opt.loglik), n=data.n, family=family,
                       link=link, cens=data.cens.copy(), names=list(data.names), optim=opt)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    result.residuals = quantile_residuals(result, data, rng)
    return result
