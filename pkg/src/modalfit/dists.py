"""Mode-parameterized distributions.

Every function takes a :class:`Family`, a :class:`FamilyParams` holding the
mode ``M`` and the global dispersion ``phi`` (see :mod:`modalfit.reparam`
for how ``phi`` becomes a native shape), and broadcasts over arrays.

>>> p = FamilyParams(mode=1.0, dispersion=0.5)
>>> float(survival("lognormal", p, np.exp(0.5)))
0.5
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import special
from .errors import ConstraintError, DomainError
from .family import Family
from .reparam import _native, check_mode

__all__ = [
    "Family", "FamilyParams",
    "log_density", "density", "cdf", "survival", "log_cdf", "log_survival",
    "quantile", "sample", "mean",
]

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class FamilyParams:
    """Mode ``M`` (inside the family's mode domain) and dispersion ``phi > 0``."""

    mode: float | np.ndarray
    dispersion: float | np.ndarray


def _validated(family, params: FamilyParams):
    family = Family.coerce(family)
    mode = check_mode(family, params.mode)
    phi = np.asarray(params.dispersion, dtype=float)
    if np.any(~(phi > 0)) or np.any(~np.isfinite(phi)):
        raise DomainError("dispersion must be positive and finite")
    if family is Family.INVGAUSS and np.any(phi <= 3.0 * mode):
        raise ConstraintError("inverse Gaussian requires lambda > 3 * mode")
    return family, mode, phi


def _check_y(family: Family, y, closed: bool = False) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    lo, hi = family.mode_domain
    ok = (y >= lo) & (y <= hi) if closed else (y > lo) & (y < hi)
    if np.any(~ok):
        where = "closure of the support" if closed else "support"
        raise DomainError(f"y outside the {where} of {family.value} {family.mode_domain}")
    return y


def _scalar(out):
    out = np.asarray(out)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# unchecked kernels (used directly by the likelihood)
# ---------------------------------------------------------------------------

def _logpdf(family: Family, mode, phi, y):
    p = _native(family, mode, phi)
    if family is Family.GAMMA:
        a, scale = p
        return (a - 1.0) * np.log(y) - y / scale - a * np.log(scale) - special.log_gamma(a)
    if family is Family.BETA:
        a, b = p
        return ((a - 1.0) * np.log(y) + (b - 1.0) * np.log1p(-y)
                - special.log_beta(a, b))
    if family is Family.WEIBULL:
        k, lam = p
        z = y / lam
        return np.log(k) - np.log(lam) + (k - 1.0) * np.log(z) - z ** k
    if family is Family.LOGNORMAL:
        mu, s2 = p
        ly = np.log(y)
        return -0.5 * (_LOG_2PI + np.log(s2)) - ly - (ly - mu) ** 2 / (2.0 * s2)
    mu, lam = p
    return (0.5 * (np.log(lam) - _LOG_2PI - 3.0 * np.log(y))
            - lam * (y - mu) ** 2 / (2.0 * mu ** 2 * y))


def _log_cdf_sf(family: Family, mode, phi, y):
    """``(log F(y), log S(y))`` for y strictly inside the support."""
    p = _native(family, mode, phi)
    if family is Family.GAMMA:
        a, scale = p
        return special.log_incomplete_gamma(a, y / scale)
    if family is Family.BETA:
        a, b = p
        return special.log_incomplete_beta(a, b, y)
    if family is Family.WEIBULL:
        k, lam = p
        z = (y / lam) ** k
        return np.log(-np.expm1(-z)), -z
    if family is Family.LOGNORMAL:
        mu, s2 = p
        w = (np.log(y) - mu) / np.sqrt(s2)
        return special.log_normal_cdf(w), special.log_normal_cdf(-w)
    mu, lam = p
    r = np.sqrt(lam / y)
    a = r * (y / mu - 1.0)
    b = r * (y / mu + 1.0)
    # second term carries exp(2 lambda / mu); keep it in log space
    t2 = 2.0 * lam / mu + special.log_normal_cdf(-b)
    log_f = np.logaddexp(special.log_normal_cdf(a), t2)
    t1 = special.log_normal_cdf(-a)
    with np.errstate(invalid="ignore", divide="ignore"):
        log_s = t1 + np.log1p(-np.exp(t2 - t1))
    return np.minimum(log_f, 0.0), log_s


def _logsf(family: Family, mode, phi, y):
    return _log_cdf_sf(family, mode, phi, y)[1]


# ---------------------------------------------------------------------------
# public, validated API
# ---------------------------------------------------------------------------

def log_density(family, params: FamilyParams, y):
    """log f(y | M, phi)."""
    family, mode, phi = _validated(family, params)
    y = _check_y(family, y)
    return _scalar(_logpdf(family, mode, phi, y))


def density(family, params: FamilyParams, y):
    return _scalar(np.exp(log_density(family, params, y)))


def _tails(family, params, y):
    family, mode, phi = _validated(family, params)
    y = _check_y(family, y, closed=True)
    mode, phi, y = np.broadcast_arrays(mode, phi, y)
    log_f = np.empty(y.shape)
    log_s = np.empty(y.shape)
    lo, hi = family.mode_domain
    at_lo = y <= lo
    at_hi = y >= hi
    log_f[at_lo], log_s[at_lo] = -np.inf, 0.0
    log_f[at_hi], log_s[at_hi] = 0.0, -np.inf
    inner = ~at_lo & ~at_hi
    if np.any(inner):
        lf, ls = _log_cdf_sf(family, mode[inner], phi[inner], y[inner])
        log_f[inner], log_s[inner] = lf, ls
    return log_f, log_s


def log_cdf(family, params: FamilyParams, y):
    return _scalar(_tails(family, params, y)[0])


def log_survival(family, params: FamilyParams, y):
    """log S(y), computed from the complementary special functions."""
    return _scalar(_tails(family, params, y)[1])


def cdf(family, params: FamilyParams, y):
    """F(y | M, phi); y may sit on the support boundary."""
    return _scalar(np.exp(_tails(family, params, y)[0]))


def survival(family, params: FamilyParams, y):
    """S(y) = 1 - F(y), accurate when S is tiny."""
    return _scalar(np.exp(_tails(family, params, y)[1]))


def mean(family, params: FamilyParams):
    """Analytic mean of the mode-parameterized distribution."""
    family, mode, phi = _validated(family, params)
    p = _native(family, mode, phi)
    if family is Family.GAMMA:
        return _scalar(p.shape * p.scale)
    if family is Family.BETA:
        return _scalar(p.alpha / (p.alpha + p.beta))
    if family is Family.WEIBULL:
        return _scalar(p.scale * np.exp(special.log_gamma(1.0 + 1.0 / p.shape)))
    if family is Family.LOGNORMAL:
        return _scalar(np.exp(p.mu + 0.5 * p.sigma2))
    return _scalar(p.mean)


# ---------------------------------------------------------------------------
# quantile
# ---------------------------------------------------------------------------

def quantile(family, params: FamilyParams, p):
    """Inverse cdf.

    Closed form for Weibull and lognormal; safeguarded Newton on the cdf
    (bisection fallback) for gamma, beta and inverse Gaussian.
    """
    family, mode, phi = _validated(family, params)
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0) & (p < 1))):
        raise DomainError("quantile requires 0 < p < 1")
    mode, phi, p = np.broadcast_arrays(mode, phi, p)
    nat = _native(family, mode, phi)
    if family is Family.WEIBULL:
        k, lam = nat
        return _scalar(lam * (-np.log1p(-p)) ** (1.0 / k))
    if family is Family.LOGNORMAL:
        mu, s2 = nat
        return _scalar(np.exp(mu + np.sqrt(s2) * special.normal_quantile(p)))
    return _scalar(_invert(family, mode.ravel(), phi.ravel(), p.ravel()).reshape(p.shape))


def _invert(family: Family, mode, phi, p, max_iter: int = 300):
    n = p.size
    upper = p > 0.5
    # g(y) = F(y) - p below the median, (1 - p) - S(y) above; both increase in y
    target = np.where(upper, np.log1p(-p), np.log(p))

    def g(idx, y):
        lf, ls = _log_cdf_sf(family, mode[idx], phi[idx], y)
        val = np.where(upper[idx], np.exp(target[idx]) - np.exp(ls), np.exp(lf) - np.exp(target[idx]))
        return val, np.exp(_logpdf(family, mode[idx], phi[idx], y))

    lo = np.zeros(n)
    bounded = family is Family.BETA
    hi = np.ones(n) if bounded else np.maximum(2.0 * mode, 1.0)
    if not bounded:
        grow = np.arange(n)
        while grow.size:
            val, _ = g(grow, hi[grow])
            short = val < 0
            lo[grow[short]] = hi[grow[short]]
            hi[grow[short]] *= 4.0
            grow = grow[short]
    y = np.clip(mode, lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo))
    active = np.arange(n)
    for _ in range(max_iter):
        if active.size == 0:
            break
        yy = y[active]
        val, dens = g(active, yy)
        scale = np.exp(target[active])
        done = np.abs(val) <= 1e-14 * scale
        neg = val < 0
        lo[active[neg]] = yy[neg]
        hi[active[~neg]] = yy[~neg]
        with np.errstate(divide="ignore", invalid="ignore"):
            step = yy - val / dens
        a_lo, a_hi = lo[active], hi[active]
        bad = ~np.isfinite(step) | (step <= a_lo) | (step >= a_hi)
        mid = np.where(a_lo > 0, np.sqrt(a_lo * a_hi), 0.5 * (a_lo + a_hi))
        new = np.where(bad, mid, step)
        narrow = (a_hi - a_lo) <= 4.0 * special.EPS * a_hi
        y[active] = np.where(done, yy, new)
        active = active[~(done | narrow)]
    return y


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def _standard_gamma(rng: np.random.Generator, a: np.ndarray) -> np.ndarray:
    """Marsaglia-Tsang squeeze; shapes below one use the U**(1/a) boost."""
    out = np.empty(a.shape)
    boost = a < 1.0
    aa = np.where(boost, a + 1.0, a)
    d = aa - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    pending = np.arange(a.size)
    while pending.size:
        m = pending.size
        x = rng.standard_normal(m)
        u = rng.random(m)
        v = (1.0 + c[pending] * x) ** 3
        pos = v > 0
        vv = np.where(pos, v, 1.0)
        with np.errstate(divide="ignore"):
            accept = pos & ((u < 1.0 - 0.0331 * x ** 4)
                            | (np.log(u) < 0.5 * x * x + d[pending] * (1.0 - vv + np.log(vv))))
        out[pending[accept]] = d[pending[accept]] * vv[accept]
        pending = pending[~accept]
    if np.any(boost):
        out[boost] *= rng.random(int(boost.sum())) ** (1.0 / a[boost])
    return out


def sample(family, params: FamilyParams, rng: np.random.Generator, n: int | None = None):
    """Draw from the mode-parameterized distribution.

    With array-valued ``params`` one draw is made per element; ``n`` then
    must be omitted or equal to that size.  Deterministic given ``rng``.
    """
    family, mode, phi = _validated(family, params)
    shape = np.broadcast(mode, phi).shape
    if n is not None:
        if n < 1:
            raise ValueError("n must be >= 1")
        if shape not in ((), (n,)):
            raise ValueError(f"n={n} does not match parameter shape {shape}")
        shape = (n,)
    mode = np.broadcast_to(mode, shape).ravel()
    phi = np.broadcast_to(phi, shape).ravel()
    size = mode.size
    nat = _native(family, mode, phi)

    if family is Family.GAMMA:
        a, scale = nat
        y = _standard_gamma(rng, a) * scale
    elif family is Family.BETA:
        a, b = nat
        x1 = _standard_gamma(rng, a)
        x2 = _standard_gamma(rng, b)
        y = x1 / (x1 + x2)
        # keep draws strictly inside (0, 1)
        y = np.clip(y, np.finfo(float).tiny, np.nextafter(1.0, 0.0))
    elif family is Family.WEIBULL:
        k, lam = nat
        u = 1.0 - rng.random(size)  # (0, 1]
        y = lam * (-np.log(u)) ** (1.0 / k)
    elif family is Family.LOGNORMAL:
        mu, s2 = nat
        y = np.exp(mu + np.sqrt(s2) * rng.standard_normal(size))
    else:
        mu, lam = nat
        nu = rng.standard_normal(size)
        w = nu * nu
        x = mu + mu * mu * w / (2.0 * lam) - mu / (2.0 * lam) * np.sqrt(4.0 * mu * lam * w + (mu * w) ** 2)
        u = rng.random(size)
        y = np.where(u <= mu / (mu + x), x, mu * mu / x)
    return y.reshape(shape)
