import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from modalfit.errors import ConstraintError, DomainError
from modalfit.family import Family, Link
from modalfit.reparam import (dispersion_from_shape, dispersion_map, linear_predictor_to_mode,
                              mode_to_linear_predictor, native_params)


@pytest.mark.parametrize("family,phi,shape", [
    ("gamma", 0.4, 3.5),
    ("weibull", 1.49, 2.5),
    ("beta", 2.0, 3.0),
    ("lognormal", 0.5, 0.5),
    ("invgauss", 5.0, 5.0),
])
def test_dispersion_map_study_values(family, phi, shape):
    assert dispersion_map(family, phi) == pytest.approx(shape, rel=1e-14)
    assert dispersion_from_shape(family, shape) == pytest.approx(phi, rel=1e-14)


def test_native_params_examples():
    assert native_params("gamma", 2.0, 0.4).scale == pytest.approx(0.8)
    assert native_params("beta", 0.5, 2.0).beta == pytest.approx(3.0)
    assert native_params("weibull", 1.0, 2.0 - 1.01).scale == pytest.approx(1.414214, abs=1e-6)
    assert native_params("lognormal", 1.0, 0.5).mu == pytest.approx(0.5)
    assert native_params("invgauss", 1.0, 5.0).mean == pytest.approx(1.581139, abs=1e-6)


def test_invgauss_restriction():
    with pytest.raises(ConstraintError):
        native_params("invgauss", 1.0, 3.0)


def test_bad_inputs():
    with pytest.raises(DomainError):
        dispersion_map("gamma", 0.0)
    with pytest.raises(DomainError):
        native_params("beta", 1.0, 2.0)
    with pytest.raises(DomainError):
        native_params("gamma", -1.0, 2.0)


def test_link_examples():
    assert linear_predictor_to_mode("log", 0.0) == 1.0
    assert linear_predictor_to_mode("logit", 0.0) == 0.5
    ref = float(1 / (1 + mpmath.exp(mpmath.mpf("1.1"))))
    assert linear_predictor_to_mode("logit", -1.1) == pytest.approx(ref, rel=1e-14)
    assert round(ref, 6) == 0.249740


def test_logit_inverse_no_overflow():
    eta = np.array([-700.0, -40.0, 0.0, 40.0, 700.0])
    with np.errstate(all="raise"):
        m = Link.LOGIT.inverse(eta)
    assert np.all(np.isfinite(m))
    assert m[-1] == 1.0 and m[0] > 0


@given(st.floats(-30, 30))
def test_link_round_trip(eta):
    for link in Link:
        m = linear_predictor_to_mode(link, eta)
        if link is Link.LOGIT and not 0 < m < 1:
            continue
        back = float(mode_to_linear_predictor(link, m))
        # logit loses relative precision where M rounds near 1
        tol = 1e-12 * max(1.0, abs(eta)) if link is Link.LOG or eta < 5 else 1e-12 * np.exp(eta)
        assert back == pytest.approx(eta, abs=tol)


@given(st.floats(1.0001, 50), st.floats(1e-4, 1 - 1e-4))
def test_beta_second_shape_above_one(alpha, mode):
    p = native_params("beta", mode, alpha - 1.0)
    assert p.beta > 1.0
    assert p.beta - 1.0 == pytest.approx((alpha - 1.0) * (1 - mode) / mode, rel=1e-10)


@pytest.mark.parametrize("family", list(Family))
def test_dispersion_map_strictly_monotone(family):
    phi = np.geomspace(1e-3, 1e3, 200)
    d = np.diff(dispersion_map(family, phi))
    assert np.all(d < 0) if family is Family.GAMMA else np.all(d > 0)


@given(st.floats(0.05, 20), st.floats(0.05, 5))
def test_gamma_scale_conventions_agree(mode, phi):
    p = native_params("gamma", mode, phi)
    assert p.scale == pytest.approx(mode / (p.shape - 1.0), rel=1e-12)
