import numpy as np
import pytest
from hypothesis import settings
from scipy import stats

from modalfit.family import Family

settings.register_profile("modalfit", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("modalfit")

ALL_FAMILIES = list(Family)

# one representative (mode, dispersion) per family, valid for every family
TYPICAL = {
    Family.GAMMA: (2.0, 0.4),
    Family.BETA: (0.3, 2.0),
    Family.WEIBULL: (1.5, 1.49),
    Family.LOGNORMAL: (1.0, 0.5),
    Family.INVGAUSS: (0.5, 5.0),
}


def scipy_dist(family, mode, phi):
    """Independent scipy distribution for (mode, phi), with the maps worked by hand."""
    family = Family.coerce(family)
    if family is Family.GAMMA:
        return stats.gamma(a=1.0 / phi + 1.0, scale=mode * phi)
    if family is Family.BETA:
        a = phi + 1.0
        return stats.beta(a, (a - 1.0) / mode - a + 2.0)
    if family is Family.WEIBULL:
        k = phi + 1.01
        return stats.weibull_min(k, scale=mode * (k / (k - 1.0)) ** (1.0 / k))
    if family is Family.LOGNORMAL:
        return stats.lognorm(s=np.sqrt(phi), scale=np.exp(np.log(mode) + phi))
    lam = phi
    mu = (1.0 / mode ** 2 - 3.0 / (lam * mode)) ** -0.5
    return stats.invgauss(mu / lam, scale=lam)


_ACCEPTANCE = {}


def record_acceptance(number, passed, detail):
    _ACCEPTANCE[number] = (bool(passed), detail)


@pytest.fixture
def acceptance():
    return record_acceptance


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
