"""Special functions needed by the five mode-parameterized families.

Everything here is vectorized over broadcastable numpy arrays and works in
float64.  The incomplete gamma and beta routines also return log values of
both tails so that log-survival stays accurate far into the right tail.

Algorithms:

* log-gamma: Lanczos approximation (g = 7, nine coefficients) with the
  reflection formula below 1/2.
* incomplete gamma: power series for ``x < a + 1`` and a continued fraction
  (modified Lentz) otherwise; Temme's uniform asymptotic expansion for
  shapes of 1e4 and above, where the iterations would need O(sqrt(a)) terms.
* incomplete beta: continued fraction with the symmetry swap at
  ``x > (a + 1) / (a + b + 2)``.
* normal cdf: the C library ``erfc`` (via :mod:`math`) on the smaller tail,
  and the asymptotic Mills-ratio series once ``erfc`` would underflow.
* normal quantile: Acklam's rational approximation followed by one Halley
  refinement step.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

EPS = np.finfo(float).eps
TINY = 1e-300
MAX_ITER = 100_000
# incomplete gamma switches to the uniform asymptotic expansion above this shape
LARGE_SHAPE = 1e4

_LANCZOS_G = 7.0
_LANCZOS = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _lanczos(x):
    # valid for x >= 0.5
    z = x - 1.0
    acc = np.full_like(z, _LANCZOS[0])
    for i in range(1, len(_LANCZOS)):
        acc = acc + _LANCZOS[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * np.log(t) - t + np.log(acc)


def log_gamma(a):
    """log Gamma(a) for a > 0."""
    a = np.asarray(a, dtype=float)
    if np.any(~(a > 0)):
        raise DomainError("log_gamma requires a > 0")
    out = np.empty_like(a)
    big = a >= 0.5
    out[big] = _lanczos(a[big])
    small = ~big
    if np.any(small):
        s = a[small]
        out[small] = np.log(np.pi / np.sin(np.pi * s)) - _lanczos(1.0 - s)
    return out[()] if out.ndim == 0 else out


def log_beta(a, b):
    """log B(a, b) for a, b > 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b)


# ---------------------------------------------------------------------------
# incomplete gamma
# ---------------------------------------------------------------------------

def _gamma_series(a, x):
    """log of sum_{k>=0} x^k / (a (a+1) ... (a+k)) times a; i.e. log(a*S)."""
    total = np.ones_like(a)
    term = np.ones_like(a)
    ap = a.copy()
    active = np.arange(a.size)
    for _ in range(MAX_ITER):
        if active.size == 0:
            break
        ap[active] += 1.0
        term[active] *= x[active] / ap[active]
        total[active] += term[active]
        done = np.abs(term[active]) < np.abs(total[active]) * EPS
        active = active[~done]
    return np.log(total)


def _gamma_contfrac(a, x):
    """log of the Lentz continued fraction for Q(a, x) without prefactor."""
    b = x + 1.0 - a
    c = np.full_like(a, 1.0 / TINY)
    d = 1.0 / b
    h = d.copy()
    active = np.arange(a.size)
    i = 0
    while active.size and i < MAX_ITER:
        i += 1
        aa = a[active]
        an = -i * (i - aa)
        b[active] += 2.0
        dd = an * d[active] + b[active]
        dd = np.where(np.abs(dd) < TINY, TINY, dd)
        cc = b[active] + an / c[active]
        cc = np.where(np.abs(cc) < TINY, TINY, cc)
        dd = 1.0 / dd
        delta = dd * cc
        d[active] = dd
        c[active] = cc
        h[active] *= delta
        done = np.abs(delta - 1.0) < EPS
        active = active[~done]
    return np.log(h)


def _gamma_temme(a, x):
    """Uniform asymptotic expansion (two terms) for large ``a``.

    Returns ``(log P, log Q)``; relative error is O(a**-2.5).
    """
    lam = x / a
    dm = lam - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = np.sign(dm) * np.sqrt(2.0 * (dm - np.log(lam)))
        c0 = 1.0 / dm - 1.0 / eta
        c1 = 1.0 / eta ** 3 - 1.0 / dm ** 3 - 1.0 / dm ** 2 - 1.0 / (12.0 * dm)
    near = np.abs(dm) < 1e-2
    e = eta[near]
    c0[near] = -1.0 / 3.0 + e / 12.0 - 2.0 * e ** 2 / 135.0 + e ** 3 / 864.0
    c1[near] = -1.0 / 540.0 - e / 288.0 + e ** 2 / 378.0
    half = 0.5 * a * eta * eta
    corr = (c0 + c1 / a) / np.sqrt(2.0 * np.pi * a)
    root = eta * np.sqrt(a)
    upper = eta > 0
    log_p = np.empty_like(a)
    log_q = np.empty_like(a)
    # exponent-scaled brackets: Q = exp(-half) * (Phi(-root) e^half + corr), P analogous
    lq = -half[upper] + np.log(np.exp(log_normal_cdf(-root[upper]) + half[upper]) + corr[upper])
    log_q[upper] = lq
    log_p[upper] = np.log1p(-np.exp(lq))
    lp = -half[~upper] + np.log(np.exp(log_normal_cdf(root[~upper]) + half[~upper]) - corr[~upper])
    log_p[~upper] = lp
    log_q[~upper] = np.log1p(-np.exp(lp))
    return log_p, log_q


def log_incomplete_gamma(a, x):
    """Return ``(log P(a, x), log Q(a, x))`` for a > 0, x >= 0.

    ``P`` is the regularized lower incomplete gamma function and
    ``Q = 1 - P`` the upper one.  Whichever tail is computed directly keeps
    full relative accuracy; the other one is obtained through ``log1p``.
    """
    a, x = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    if np.any(~(a > 0)) or np.any(~(x >= 0)):
        raise DomainError("incomplete gamma requires a > 0 and x >= 0")
    shape = a.shape
    a = a.ravel().copy()
    x = x.ravel().copy()
    log_p = np.empty_like(a)
    log_q = np.empty_like(a)

    zero = x == 0.0
    log_p[zero], log_q[zero] = -np.inf, 0.0
    inf = np.isinf(x)
    log_p[inf], log_q[inf] = 0.0, -np.inf

    finite = ~zero & ~inf
    big = finite & (a >= LARGE_SHAPE)
    if np.any(big):
        log_p[big], log_q[big] = _gamma_temme(a[big], x[big])
    finite &= ~big
    ser = finite & (x < a + 1.0)
    cf = finite & ~ser
    if np.any(ser):
        aa, xx = a[ser], x[ser]
        lp = _gamma_series(aa, xx) + aa * np.log(xx) - xx - log_gamma(aa + 1.0)
        lp = np.minimum(lp, 0.0)
        log_p[ser] = lp
        log_q[ser] = np.log1p(-np.exp(lp))
    if np.any(cf):
        aa, xx = a[cf], x[cf]
        lq = _gamma_contfrac(aa, xx) + aa * np.log(xx) - xx - log_gamma(aa)
        lq = np.minimum(lq, 0.0)
        log_q[cf] = lq
        log_p[cf] = np.log1p(-np.exp(lq))
    return log_p.reshape(shape), log_q.reshape(shape)


def regularized_incomplete_gamma(a, x):
    """Regularized lower incomplete gamma P(a, x)."""
    log_p, _ = log_incomplete_gamma(a, x)
    out = np.exp(log_p)
    return out[()] if out.ndim == 0 else out


def regularized_upper_incomplete_gamma(a, x):
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    _, log_q = log_incomplete_gamma(a, x)
    out = np.exp(log_q)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# incomplete beta
# ---------------------------------------------------------------------------

def _beta_contfrac(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(a)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < TINY, TINY, d)
    d = 1.0 / d
    h = d.copy()
    active = np.arange(a.size)
    m = 0
    while active.size and m < MAX_ITER:
        m += 1
        m2 = 2.0 * m
        aa_, bb_, xx_ = a[active], b[active], x[active]
        num = m * (bb_ - m) * xx_ / ((qam[active] + m2) * (aa_ + m2))
        dd = 1.0 + num * d[active]
        dd = np.where(np.abs(dd) < TINY, TINY, dd)
        cc = 1.0 + num / c[active]
        cc = np.where(np.abs(cc) < TINY, TINY, cc)
        dd = 1.0 / dd
        hh = h[active] * dd * cc
        num = -(aa_ + m) * (qab[active] + m) * xx_ / ((aa_ + m2) * (qap[active] + m2))
        dd = 1.0 + num * dd
        dd = np.where(np.abs(dd) < TINY, TINY, dd)
        cc = 1.0 + num / cc
        cc = np.where(np.abs(cc) < TINY, TINY, cc)
        dd = 1.0 / dd
        delta = dd * cc
        hh = hh * delta
        d[active] = dd
        c[active] = cc
        h[active] = hh
        done = np.abs(delta - 1.0) < EPS
        active = active[~done]
    return np.log(h)


def log_incomplete_beta(a, b, x):
    """Return ``(log I_x(a, b), log(1 - I_x(a, b)))`` for a, b > 0, 0 <= x <= 1."""
    a, b, x = np.broadcast_arrays(
        np.asarray(a, dtype=float), np.asarray(b, dtype=float), np.asarray(x, dtype=float)
    )
    if np.any(~(a > 0)) or np.any(~(b > 0)) or np.any(~((x >= 0) & (x <= 1))):
        raise DomainError("incomplete beta requires a, b > 0 and 0 <= x <= 1")
    shape = a.shape
    a, b, x = a.ravel().copy(), b.ravel().copy(), x.ravel().copy()
    log_i = np.empty_like(a)
    log_j = np.empty_like(a)

    lo = x == 0.0
    hi = x == 1.0
    log_i[lo], log_j[lo] = -np.inf, 0.0
    log_i[hi], log_j[hi] = 0.0, -np.inf

    inner = ~lo & ~hi
    if np.any(inner):
        aa, bb, xx = a[inner], b[inner], x[inner]
        front = (aa * np.log(xx) + bb * np.log1p(-xx)
                 - log_beta(aa, bb))
        direct = xx < (aa + 1.0) / (aa + bb + 2.0)
        li = np.empty_like(aa)
        lj = np.empty_like(aa)
        if np.any(direct):
            s = direct
            v = front[s] + _beta_contfrac(aa[s], bb[s], xx[s]) - np.log(aa[s])
            v = np.minimum(v, 0.0)
            li[s] = v
            lj[s] = np.log1p(-np.exp(v))
        if np.any(~direct):
            s = ~direct
            v = front[s] + _beta_contfrac(bb[s], aa[s], 1.0 - xx[s]) - np.log(bb[s])
            v = np.minimum(v, 0.0)
            lj[s] = v
            li[s] = np.log1p(-np.exp(v))
        log_i[inner] = li
        log_j[inner] = lj
    return log_i.reshape(shape), log_j.reshape(shape)


def regularized_incomplete_beta(a, b, x):
    """Regularized incomplete beta function I_x(a, b)."""
    log_i, _ = log_incomplete_beta(a, b, x)
    out = np.exp(log_i)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# normal distribution
# ---------------------------------------------------------------------------

_erfc = np.frompyfunc(math.erfc, 1, 1)
# below this, erfc underflows and the asymptotic (Mills ratio) series takes over
_DEEP_TAIL = -30.0


def _log_mills_tail(z):
    """log Phi(z) for z << 0 from the asymptotic series of the Mills ratio."""
    inv = 1.0 / (z * z)
    total = np.ones_like(z)
    term = np.ones_like(z)
    for k in range(1, 9):
        term = -term * (2 * k - 1) * inv
        total += term
    return -0.5 * z * z - np.log(_SQRT_2PI) - np.log(-z) + np.log(total)


def log_normal_cdf(z):
    """log Phi(z), accurate in both tails."""
    z = np.asarray(z, dtype=float)
    if np.any(np.isnan(z)):
        raise DomainError("normal cdf of NaN")
    flat = z.ravel()
    out = np.empty_like(flat)
    deep = flat < _DEEP_TAIL
    out[deep] = _log_mills_tail(flat[deep])
    rest = ~deep
    # 2 * (lower tail) = erfc(|z| / sqrt 2), computed without cancellation
    with np.errstate(divide="ignore"):
        tail = np.log(0.5 * _erfc(np.abs(flat[rest]) / math.sqrt(2.0)).astype(float))
    out[rest] = np.where(flat[rest] < 0, tail, np.log1p(-np.exp(tail)))
    out = out.reshape(z.shape)
    return out[()] if out.ndim == 0 else out


def normal_cdf(z):
    """Standard normal cdf Phi(z)."""
    out = np.exp(log_normal_cdf(z))
    return out[()] if np.ndim(out) == 0 else out


def normal_pdf(z):
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * z * z) / _SQRT_2PI


_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def _acklam_lower(p):
    """Rational approximation of Phi^{-1}(p) for 0 < p <= 1/2."""
    out = np.empty_like(p)
    tail = p < _P_LOW
    if np.any(tail):
        q = np.sqrt(-2.0 * np.log(p[tail]))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        out[tail] = num / den
    mid = ~tail
    if np.any(mid):
        q = p[mid] - 0.5
        r = q * q
        num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        out[mid] = num / den
    return out


def normal_quantile(p):
    """Standard normal quantile Phi^{-1}(p) for 0 < p < 1."""
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0) & (p < 1))):
        raise DomainError("normal_quantile requires 0 < p < 1")
    shape = p.shape
    p = p.ravel()
    upper = p > 0.5
    # work in the lower tail so that small upper-tail masses keep precision
    tail_p = np.where(upper, 1.0 - p, p)
    x = _acklam_lower(tail_p)
    # one Halley step on Phi(x) - tail_p
    log_cdf = log_normal_cdf(x)
    e = np.exp(log_cdf) - tail_p
    u = e * _SQRT_2PI * np.exp(0.5 * x * x)
    x = x - u / (1.0 + 0.5 * x * u)
    out = np.where(upper, -x, x).reshape(shape)
    return out[()] if out.ndim == 0 else out
