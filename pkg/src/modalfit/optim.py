"""BFGS maximization of the censored log-likelihood.

The start point is the OLS fit of ``g(y)`` on ``X`` with ``psi = 0``; the
search runs over the unconstrained ``(gamma, psi)`` with inverse-Hessian
BFGS updates and a strong-Wolfe line search.  Scores are central finite
differences.  After termination the observed Hessian is recomputed by
finite differences of the score at the optimum; the BFGS matrix is never
used for inference.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import RankDeficientError
from .family import Family, Link
from .likelihood import FD_STEP, INFEASIBLE, Dataset, loglik_and_gradient, observed_hessian

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimSettings:
    reltol: float = 1e-10
    max_iter: int = 2000
    c1: float = 1e-4
    c2: float = 0.9
    fd_step: float = FD_STEP
    gradtol: float = 1e-8
    max_ls_evals: int = 40

    def __post_init__(self):
        if not self.reltol > 0:
            raise ValueError("reltol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("Wolfe constants need 0 < c1 < c2 < 1")


@dataclass
class OptimResult:
    theta: np.ndarray
    loglik: float
    grad_norm: float
    iterations: int
    converged: bool
    hessian: np.ndarray
    message: str
    n_evals: int = 0
    hessian_ok: bool = field(init=False)

    def __post_init__(self):
        ok = bool(np.all(np.isfinite(self.hessian)))
        if ok:
            ok = bool(np.all(np.linalg.eigvalsh(-self.hessian) > 0))
        self.hessian_ok = ok


def initialize(data: Dataset, family, link=None) -> np.ndarray:
    """OLS start for ``gamma`` on ``g(y)`` (censored rows included), ``psi = 0``."""
    family = Family.coerce(family)
    link = Link.coerce(link or family.default_link)
    data.check_support(family)
    if np.linalg.matrix_rank(data.X) < data.p:
        raise RankDeficientError("design matrix is not of full column rank")
    coef, *_ = np.linalg.lstsq(data.X, link(data.y), rcond=None)
    return np.append(coef, 0.0)


class _Objective:
    """Negated log-likelihood with +inf on infeasible points; counts evaluations."""

    def __init__(self, data, family, link, rel):
        self.data, self.family, self.link, self.rel = data, family, link, rel
        self.n_evals = 0

    def __call__(self, x):
        self.n_evals += 1
        ll, g = loglik_and_gradient(self.data, self.family, self.link, x, self.rel)
        if ll <= INFEASIBLE or not np.all(np.isfinite(g)):
            return np.inf, np.full_like(x, np.nan)
        return -ll, -g


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic interpolating (a, fa, da), (b, fb, db), or None."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    rad = d1 * d1 - da * db
    if rad < 0:
        return None
    d2 = np.sign(b - a) * np.sqrt(rad)
    denom = db - da + 2.0 * d2
    if denom == 0:
        return None
    return b - (b - a) * (db + d2 - d1) / denom


def line_search(fg, x, f0, g0, p, alpha0, c1=1e-4, c2=0.9, max_evals=40):
    """Strong-Wolfe line search (bracketing phase plus zoom).

    Returns ``(alpha, f, g)`` or ``None`` when no acceptable step was found.
    Infeasible trial points (``f = inf``) are treated as overshooting.
    """
    dphi0 = float(g0 @ p)
    evals = 0

    def phi(alpha):
        nonlocal evals
        evals += 1
        f, g = fg(x + alpha * p)
        d = float(g @ p) if np.isfinite(f) else np.nan
        return f, g, d

    def zoom(lo, f_lo, d_lo, g_lo, hi, f_hi, d_hi):
        while evals < max_evals:
            trial = None
            if np.isfinite(f_hi) and np.isfinite(d_hi):
                trial = _cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi)
            width = hi - lo
            if trial is None or not (min(lo, hi) + 0.1 * abs(width) <= trial <= max(lo, hi) - 0.1 * abs(width)):
                trial = lo + 0.5 * width
            f, g, d = phi(trial)
            if not np.isfinite(f) or f > f0 + c1 * trial * dphi0 or f >= f_lo:
                hi, f_hi, d_hi = trial, f, d
            else:
                if abs(d) <= -c2 * dphi0:
                    return trial, f, g
                if d * (hi - lo) >= 0:
                    hi, f_hi, d_hi = lo, f_lo, d_lo
                lo, f_lo, d_lo, g_lo = trial, f, d, g
            if abs(hi - lo) <= 1e-14 * max(1.0, abs(lo)):
                break
        # Armijo holds at lo whenever lo > 0
        return (lo, f_lo, g_lo) if lo > 0 else None

    a_prev, f_prev, d_prev, g_prev = 0.0, f0, dphi0, g0
    alpha = alpha0
    while evals < max_evals:
        f, g, d = phi(alpha)
        if not np.isfinite(f) or f > f0 + c1 * alpha * dphi0 or (a_prev > 0 and f >= f_prev):
            return zoom(a_prev, f_prev, d_prev, g_prev, alpha, f, d)
        if abs(d) <= -c2 * dphi0:
            return alpha, f, g
        if d >= 0:
            return zoom(alpha, f, d, g, a_prev, f_prev, d_prev)
        a_prev, f_prev, d_prev, g_prev = alpha, f, d, g
        alpha *= 2.0
    return None


def bfgs_minimize(fg, x0, settings: OptimSettings = OptimSettings()):
    """Minimize with BFGS; ``fg(x)`` returns ``(f, grad)``, ``f = inf`` when infeasible.

    Stops when the decrease over one iteration is at most
    ``reltol * (|f| + reltol)``, or the gradient sup-norm falls below
    ``gradtol * max(1, |f|)``, or after ``max_iter`` iterations.
    Returns ``(x, f, g, iterations, converged, message)``.
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = fg(x)
    if not np.isfinite(f):
        return x, f, g, 0, False, "infeasible starting point"
    d = x.size
    eye = np.eye(d)
    H = eye.copy()
    fresh = True
    it = 0
    while it < settings.max_iter:
        gnorm = float(np.max(np.abs(g)))
        if gnorm < settings.gradtol * max(1.0, abs(f)):
            return x, f, g, it, True, "gradient below tolerance"
        p = -H @ g
        if not float(g @ p) < 0:
            H, fresh = eye.copy(), True
            p = -g
        alpha0 = min(1.0, 1.0 / gnorm) if fresh else 1.0
        found = line_search(fg, x, f, g, p, alpha0, settings.c1, settings.c2, settings.max_ls_evals)
        if found is None:
            if not fresh:
                H, fresh = eye.copy(), True
                continue
            return x, f, g, it, False, "line search failed"
        alpha, f_new, g_new = found
        it += 1
        s = alpha * p
        yv = g_new - g
        sy = float(s @ yv)
        if sy > np.finfo(float).eps * np.linalg.norm(s) * np.linalg.norm(yv):
            if fresh:
                # initial scaling before the first update
                H = (sy / float(yv @ yv)) * eye
            rho = 1.0 / sy
            Hy = H @ yv
            H = (H - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                 + (rho * rho * float(yv @ Hy) + rho) * np.outer(s, s))
            fresh = False
        decrease = f - f_new
        x, f, g = x + s, f_new, g_new
        if abs(decrease) <= settings.reltol * (abs(f) + settings.reltol):
            return x, f, g, it, True, "relative reduction below reltol"
    gnorm = float(np.max(np.abs(g)))
    return x, f, g, it, gnorm < settings.gradtol * max(1.0, abs(f)), "iteration limit reached"


def _newton_polish(obj, data, family, link, x, f, g, H, settings, steps=3):
    """Refine a converged BFGS point with guarded Newton steps.

    The reltol stop leaves the iterate ``O(sqrt(reltol))`` from the maximizer
    on flat likelihoods; a Newton step on the observed Hessian removes most of
    that.  A step is kept only if it does not lower the log-likelihood.
    """
    for _ in range(steps):
        if not np.all(np.isfinite(H)):
            break
        try:
            L = np.linalg.cholesky(-0.5 * (H + H.T))
        except np.linalg.LinAlgError:
            break
        # obj minimizes -loglik, so g is minus the score
        step = -np.linalg.solve(L.T, np.linalg.solve(L, g))
        x_new = x + step
        f_new, g_new = obj(x_new)
        if not (np.isfinite(f_new) and f_new <= f):
            break
        small = np.max(np.abs(step)) <= 1e-12 * max(1.0, float(np.max(np.abs(x))))
        x, f, g = x_new, f_new, g_new
        H = observed_hessian(data, family, link, x, settings.fd_step)
        if small:
            break
    return x, f, g, H


def maximize(data: Dataset, family, link=None, settings: OptimSettings | None = None,
             start=None) -> OptimResult:
    """Maximum-likelihood fit of ``(gamma, psi)``.

    Non-convergence is reported through ``converged=False`` rather than
    raised; ``hessian_ok`` is False when ``-H`` is not positive definite.
    """
    family = Family.coerce(family)
    link = Link.coerce(link or family.default_link)
    settings = settings or OptimSettings()
    data.check_support(family)
    x0 = initialize(data, family, link) if start is None else np.asarray(start, dtype=float)
    obj = _Objective(data, family, link, settings.fd_step)
    f0, _ = obj(x0)
    if not np.isfinite(f0) and start is None and family is Family.INVGAUSS:
        # raise lambda until the OLS modes satisfy lambda > 3 M
        mode = link.inverse(data.X @ x0[:-1])
        x0[-1] = np.log(3.0 * float(np.max(mode))) + 1.0
    x, f, g, it, converged, message = bfgs_minimize(obj, x0, settings)
    H = observed_hessian(data, family, link, x, settings.fd_step)
    if converged:
        x, f, g, H = _newton_polish(obj, data, family, link, x, f, g, H, settings)
    grad_norm = float(np.max(np.abs(g))) if np.all(np.isfinite(g)) else np.inf
    if not converged:
        logger.warning("BFGS did not converge: %s (|grad|=%.3g)", message, grad_norm)
    return OptimResult(theta=x, loglik=-f, grad_norm=grad_norm, iterations=it,
                       converged=converged, hessian=H, message=message, n_evals=obj.n_evals)
