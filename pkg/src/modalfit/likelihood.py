"""Right-censored log-likelihood over the unconstrained vector (gamma, psi).

Observed units contribute ``log f(y | M, phi)``, censored units
``log S(y | M, phi)``, with ``M = g^{-1}(X gamma)`` and ``phi = exp(psi)``.

All entry points accept either one parameter vector of length ``p + 1`` or a
``(k, p + 1)`` stack of them; a stack is evaluated in a single vectorized
pass, which is how gradients and Hessians are computed cheaply.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dists import _log_cdf_sf, _logpdf
from .errors import BadCensoringColumn, DataError, MissingValueError, RankDeficientError, SupportViolation
from .family import Family, Link

#: returned instead of -inf so that line searches can back off
SENTINEL = -1e10
#: anything at or below this is an infeasible evaluation
INFEASIBLE = -1e9

# inverse Gaussian soft barrier on lambda > 3 M: kappa * tau * softplus((3M - lambda) / tau)
PENALTY_KAPPA = 1e6
PENALTY_TAU = 1e-3

# evaluations with |psi| beyond this are treated as infeasible
PSI_BOUND = 25.0

FD_STEP = np.finfo(float).eps ** (1.0 / 3.0)


@dataclass
class Dataset:
    """Response ``y``, right-censoring flags ``cens`` (1 = censored) and design ``X``.

    ``X`` must already contain the intercept column.  Construction validates
    shapes, missing values, the 0/1 coding of ``cens`` and the column rank
    of ``X``; the response support is checked against a family at fit time.
    """

    y: np.ndarray
    X: np.ndarray
    cens: np.ndarray | None = None
    names: list[str] = field(default_factory=list)
    response_name: str = "y"

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        self.X = X
        n = self.y.size
        if self.cens is None:
            self.cens = np.zeros(n, dtype=np.int8)
        cens = np.asarray(self.cens, dtype=float).ravel()

        missing = []
        if np.any(np.isnan(self.y)):
            missing.append(self.response_name)
        names = self.names or (["(Intercept)"] + [f"x{j}" for j in range(1, X.shape[1])])
        missing += [names[j] if j < len(names) else f"x{j}"
                    for j in range(X.shape[1]) if np.any(np.isnan(X[:, j]))]
        if np.any(np.isnan(cens)):
            missing.append("cens")
        if missing:
            raise MissingValueError(missing)
        if X.shape[0] != n:
            raise DataError(f"X has {X.shape[0]} rows but y has {n} values")
        if cens.size != n:
            raise BadCensoringColumn(f"cens has {cens.size} values but y has {n}")
        if np.any((cens != 0) & (cens != 1)):
            raise BadCensoringColumn("censoring indicator must contain only 0 and 1")
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} column names for {X.shape[1]} columns")
        if np.any(~np.isfinite(X)) or np.any(~np.isfinite(self.y)):
            raise DataError("non-finite values in y or X")
        if np.linalg.matrix_rank(X) < X.shape[1]:
            raise RankDeficientError("design matrix is not of full column rank")
        self.cens = cens.astype(np.int8)
        self.names = list(names)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def censored(self) -> np.ndarray:
        return self.cens == 1

    def check_support(self, family) -> None:
        family = Family.coerce(family)
        bad = ~family.in_support(self.y)
        if np.any(bad):
            idx = np.flatnonzero(bad)[:5]
            raise SupportViolation(
                f"{int(bad.sum())} response value(s) outside the {family.value} support "
                f"{family.mode_domain}, e.g. rows {idx.tolist()}"
            )

    def concat(self, other: "Dataset") -> "Dataset":
        return Dataset(np.concatenate([self.y, other.y]), np.vstack([self.X, other.X]),
                       np.concatenate([self.cens, other.cens]), self.names, self.response_name)


def split_params(theta):
    """``(gamma, psi)`` views of a parameter vector or stack."""
    theta = np.asarray(theta, dtype=float)
    return theta[..., :-1], theta[..., -1]


def censored_loglik(data: Dataset, family, link, theta):
    """Censored log-likelihood at ``theta = (gamma, psi)``.

    Returns a float for a single vector, an array of length ``k`` for a
    ``(k, p + 1)`` stack.  Infeasible points (mode outside its domain, a
    violated inverse Gaussian restriction, non-finite terms) give
    ``SENTINEL`` minus the squared constraint violation.
    """
    family = Family.coerce(family)
    link = Link.coerce(link)
    data.check_support(family)
    theta = np.asarray(theta, dtype=float)
    single = theta.ndim == 1
    theta = np.atleast_2d(theta)
    if theta.shape[1] != data.p + 1:
        raise ValueError(f"theta must have length {data.p + 1}")
    out = _loglik_stack(data, family, link, theta)
    return float(out[0]) if single else out


def _loglik_stack(data: Dataset, family: Family, link: Link, theta: np.ndarray) -> np.ndarray:
    k = theta.shape[0]
    gamma, psi = theta[:, :-1], theta[:, -1]
    out = np.full(k, SENTINEL)

    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        eta = gamma @ data.X.T
        mode = link.inverse(eta)
        phi = np.exp(psi)
    lo, hi = family.mode_domain
    ok = (np.all(np.isfinite(theta), axis=1) & (np.abs(psi) <= PSI_BOUND)
          & np.all((mode > lo) & (mode < hi), axis=1))

    violation = np.zeros(k)
    if family is Family.INVGAUSS:
        gap = 3.0 * mode - phi[:, None]
        with np.errstate(invalid="ignore"):
            violation = np.sum(np.where(gap >= 0, gap, 0.0) ** 2, axis=1)
        violation = np.where(np.isfinite(violation), violation, 1e300)
        ok &= np.all(gap < 0, axis=1)

    if np.any(ok):
        rows = np.flatnonzero(ok)
        M = mode[rows]
        ph = phi[rows][:, None]
        obs = data.cens == 0
        total = np.zeros(rows.size)
        with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
            if np.any(obs):
                total += np.sum(_logpdf(family, M[:, obs], ph, data.y[obs]), axis=1)
            if np.any(~obs):
                ym = np.broadcast_to(data.y[~obs], (rows.size, int((~obs).sum())))
                total += np.sum(_log_cdf_sf(family, M[:, ~obs], ph, ym)[1], axis=1)
            if family is Family.INVGAUSS:
                z = (3.0 * M - ph) / PENALTY_TAU
                total -= PENALTY_KAPPA * PENALTY_TAU * np.sum(np.logaddexp(0.0, z), axis=1)
        total = np.where(np.isfinite(total), total, SENTINEL)
        out[rows] = total
    out = np.where(ok, out, SENTINEL - violation)
    return out


def fd_steps(theta, rel: float = FD_STEP) -> np.ndarray:
    """Per-coordinate central-difference steps ``rel * max(1, |theta_j|)``.

    Steps are rounded so that ``theta_j + h_j`` is exactly representable.
    """
    theta = np.asarray(theta, dtype=float)
    h = rel * np.maximum(1.0, np.abs(theta))
    return (theta + h) - theta


def loglik_and_gradient(data: Dataset, family, link, theta, rel: float = FD_STEP):
    """Log-likelihood and central-difference score in one batched evaluation.

    Gradient components whose stencil touches an infeasible point are NaN,
    which the optimizer treats as a failed trial.
    """
    family = Family.coerce(family)
    link = Link.coerce(link)
    data.check_support(family)
    theta = np.asarray(theta, dtype=float)
    d = theta.size
    h = fd_steps(theta, rel)
    stack = np.repeat(theta[None, :], 2 * d + 1, axis=0)
    idx = np.arange(d)
    stack[1 + idx, idx] += h
    stack[1 + d + idx, idx] -= h
    vals = _loglik_stack(data, family, link, stack)
    plus, minus = vals[1:d + 1], vals[d + 1:]
    grad = (plus - minus) / (2.0 * h)
    grad[(plus <= INFEASIBLE) | (minus <= INFEASIBLE)] = np.nan
    return float(vals[0]), grad


def loglik_gradient(data: Dataset, family, link, theta, rel: float = FD_STEP) -> np.ndarray:
    """Central finite-difference score with steps ``cbrt(eps) * max(1, |theta_j|)``."""
    return loglik_and_gradient(data, family, link, theta, rel)[1]


def observed_hessian(data: Dataset, family, link, theta, rel: float = FD_STEP) -> np.ndarray:
    """Hessian of the log-likelihood by central differences of the score.

    Symmetrized as ``(H + H.T) / 2``.
    """
    family = Family.coerce(family)
    link = Link.coerce(link)
    theta = np.asarray(theta, dtype=float)
    d = theta.size
    h = fd_steps(theta, rel)
    idx = np.arange(d)
    # centers theta +/- h_j e_j, each with its own 2d-point gradient stencil
    centers = np.repeat(theta[None, :], 2 * d, axis=0)
    centers[idx, idx] += h
    centers[d + idx, idx] -= h
    stack = []
    steps = []
    for c in centers:
        hc = fd_steps(c, rel)
        s = np.repeat(c[None, :], 2 * d, axis=0)
        s[idx, idx] += hc
        s[d + idx, idx] -= hc
        stack.append(s)
        steps.append(hc)
    vals = _loglik_stack(data, family, link, np.vstack(stack)).reshape(2 * d, 2 * d)
    if np.any(vals <= INFEASIBLE):
        return np.full((d, d), np.nan)
    steps = np.asarray(steps)
    grads = (vals[:, :d] - vals[:, d:]) / (2.0 * steps)
    H = (grads[:d] - grads[d:]) / (2.0 * h[:, None])
    return 0.5 * (H + H.T)
