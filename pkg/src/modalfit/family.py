"""Family and link tags."""

from __future__ import annotations

import enum

import numpy as np


class Link(str, enum.Enum):
    """Link tying the conditional mode to the linear predictor."""

    LOG = "log"
    LOGIT = "logit"

    def __call__(self, mode):
        """Forward link g(M) -> eta."""
        mode = np.asarray(mode, dtype=float)
        if self is Link.LOG:
            return np.log(mode)
        return np.log(mode) - np.log1p(-mode)

    def inverse(self, eta):
        """Inverse link g^{-1}(eta) -> M; the logistic branch never overflows."""
        eta = np.asarray(eta, dtype=float)
        if self is Link.LOG:
            return np.exp(eta)
        # exp(-|eta|) is at most 1, so neither branch can overflow
        e = np.exp(-np.abs(eta))
        return np.where(eta >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

    @classmethod
    def coerce(cls, value: "Link | str") -> "Link":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown link {value!r}; expected one of "
                             f"{', '.join(m.value for m in cls)}") from None


class Family(str, enum.Enum):
    """The five supported mode-parameterized families."""

    GAMMA = "gamma"
    BETA = "beta"
    WEIBULL = "weibull"
    LOGNORMAL = "lognormal"
    INVGAUSS = "invgauss"

    @property
    def mode_domain(self) -> tuple[float, float]:
        return (0.0, 1.0) if self is Family.BETA else (0.0, np.inf)

    @property
    def default_link(self) -> Link:
        return Link.LOGIT if self is Family.BETA else Link.LOG

    def in_support(self, y) -> np.ndarray:
        """Elementwise test for the open support of the response."""
        y = np.asarray(y, dtype=float)
        lo, hi = self.mode_domain
        return (y > lo) & (y < hi)

    @classmethod
    def coerce(cls, value: "Family | str") -> "Family":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown family {value!r}; expected one of "
                             f"{', '.join(m.value for m in cls)}") from None
