import math
import warnings

import numpy as np
import pytest
from scipy import stats

from modalfit import dists, special
from modalfit.dists import FamilyParams
from modalfit.errors import SingularHessianError
from modalfit.family import Family, Link
from modalfit.inference import (DegenerateFitWarning, FitResult, coef_table, covariance,
                                diagnostics_export, dispersion_interval, fit, information_criteria,
                                pseudo_r2, quantile_residuals)
from modalfit.likelihood import Dataset
from modalfit.optim import OptimResult

Z975 = 1.959964


def fake_fit(coef, vcov, loglik=0.0, n=10, family=Family.GAMMA, phi=1.0, modes=None):
    coef = np.asarray(coef, dtype=float)
    d = coef.size + 1
    opt = OptimResult(np.append(coef, math.log(phi)), loglik, 0.0, 1, True, -np.eye(d), "ok")
    modes = np.ones(n) if modes is None else np.asarray(modes, dtype=float)
    return FitResult(coef, phi, None if vcov is None else np.asarray(vcov, dtype=float), modes,
                     np.zeros(n), loglik, n, family, family.default_link, np.zeros(n, np.int8),
                     [f"b{j}" for j in range(coef.size)], opt)


def censored_gamma(n, seed, frac=0.25):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.uniform(size=(n, 2))])
    Y = dists.sample("gamma", FamilyParams(np.exp(X @ [0.8, 0.3, 0.15]), 0.4), rng)
    W = rng.exponential(1 / 0.08, n) if frac else np.full(n, np.inf)
    return Dataset(np.minimum(Y, W), X, (Y > W).astype(int))


def test_covariance_identity():
    np.testing.assert_array_equal(covariance(-np.eye(3)), np.eye(3))


def test_covariance_indefinite():
    with pytest.raises(SingularHessianError):
        covariance(np.diag([-1.0, 2.0]))
    with pytest.raises(SingularHessianError):
        covariance(np.full((2, 2), np.nan))


def test_lognormal_intercept_only_covariance():
    rng = np.random.default_rng(21)
    n = 500
    y = dists.sample("lognormal", FamilyParams(2.0, 0.5), rng, n)
    res = fit(Dataset(y, np.ones((n, 1))), "lognormal")
    g0, phi = res.coefficients[0], res.dispersion
    r = np.log(y) - g0 - phi
    H = np.array([[-n / phi, np.sum(-1 - r / phi)],
                  [np.sum(-1 - r / phi), np.sum(-phi - r - r ** 2 / (2 * phi))]])
    np.testing.assert_allclose(res.optim.hessian, H, rtol=1e-4)
    np.testing.assert_allclose(res.vcov_full, np.linalg.inv(-H), rtol=1e-4)
    # at the maximizer the information reduces to var(g0) = phi (2 phi + 1) / n
    assert res.vcov_full[0, 0] == pytest.approx(phi * (2 * phi + 1) / n, rel=1e-4)


def test_coef_table_reference_values():
    t = coef_table(fake_fit([Z975, 0.0], np.eye(3)))
    assert t.p_value[0] == pytest.approx(0.05, abs=1e-6)
    assert t.z[1] == 0.0 and t.p_value[1] == 1.0
    np.testing.assert_allclose(t.upper - t.estimate, t.estimate - t.lower)
    assert t.upper[0] - t.estimate[0] == pytest.approx(Z975, abs=1e-6)


def test_coef_table_needs_covariance():
    with pytest.raises(SingularHessianError):
        coef_table(fake_fit([1.0], None))


def test_dispersion_interval():
    lo, hi = dispersion_interval(fake_fit([0.0], np.eye(2)))
    assert lo == pytest.approx(math.exp(-Z975), rel=1e-6) and hi == pytest.approx(math.exp(Z975), rel=1e-6)
    assert lo == pytest.approx(0.1408, abs=1e-4) and hi == pytest.approx(7.099, abs=1e-3)
    f = fake_fit([0.0], np.diag([1.0, 0.0]), phi=2.5)
    assert dispersion_interval(f) == (2.5, 2.5)


def test_information_criteria():
    aic, bic = information_criteria(fake_fit([0.0, 0.0], np.eye(3), loglik=-9.746, n=40))
    assert round(aic, 2) == 25.49 and round(bic, 2) == 30.56
    aic, bic = information_criteria(fake_fit(np.empty(0), np.eye(1), loglik=0.0, n=1))
    assert aic == 2.0
    f = fake_fit(np.empty(0), np.eye(1), loglik=0.0)
    f.n = math.e
    assert information_criteria(f)[1] == pytest.approx(1.0)
    aic, _ = information_criteria(fake_fit([0.0, 0.0], np.eye(3), loglik=-12.076, n=40))
    assert round(aic, 2) == 30.15


def test_bic_exceeds_aic_beyond_e_squared():
    for n in (8, 40, 1000):
        aic, bic = information_criteria(fake_fit([0.0], np.eye(2), loglik=-3.0, n=n))
        assert bic > aic


def test_pseudo_r2():
    y = np.array([1.0, 2.0, 3.0, 5.0])
    data = Dataset(y, np.ones((4, 1)))
    assert pseudo_r2(fake_fit([0.0], np.eye(2), n=4, modes=y), data) == pytest.approx(1.0)
    with pytest.warns(DegenerateFitWarning):
        assert pseudo_r2(fake_fit([0.0], np.eye(2), n=4), data) == 0.0
    res = fit(censored_gamma(200, 1), "gamma")
    assert 0.0 <= pseudo_r2(res, censored_gamma(200, 1)) <= 1.0


def test_residual_at_median_is_zero():
    y = np.array([math.exp(0.5)])  # lognormal median for M = 1, phi = 0.5
    f = fake_fit([0.0], np.eye(2), n=1, family=Family.LOGNORMAL, phi=0.5)
    r = quantile_residuals(f, Dataset(y, np.ones((1, 1))), np.random.default_rng(0))
    assert abs(r[0]) < 1e-12


def test_residual_clamp():
    ref = float(stats.norm.isf(1e-7))
    assert round(ref, 3) == 5.199
    f = fake_fit([0.0], np.eye(2), n=1, family=Family.WEIBULL, phi=1.0)
    # F(y) = 1 - 1e-9 at y = scale * (-log 1e-9)**(1/k), censored
    k = 2.01
    lam = (k / (k - 1)) ** (1 / k)
    y = lam * (-math.log(1e-9)) ** (1 / k)
    data = Dataset([y], np.ones((1, 1)), [1])
    r = quantile_residuals(f, data, np.random.default_rng(1))
    assert r[0] == pytest.approx(ref, rel=1e-9)


def test_residual_determinism_and_censored_only_randomness():
    data = censored_gamma(300, 2)
    res = fit(data, "gamma")
    a = quantile_residuals(res, data, np.random.default_rng(5))
    b = quantile_residuals(res, data, np.random.default_rng(5))
    c = quantile_residuals(res, data, np.random.default_rng(6))
    assert np.array_equal(a, b)
    obs = data.cens == 0
    assert np.array_equal(a[obs], c[obs])
    assert np.all(a[~obs] != c[~obs])


def test_pit_uniform_under_true_model():
    rng = np.random.default_rng(77)
    n = 5000
    X = np.column_stack([np.ones(n), rng.uniform(size=n)])
    modes = np.exp(X @ [0.8, 0.3])
    y = dists.sample("weibull", FamilyParams(modes, 1.49), rng)
    u = dists.cdf("weibull", FamilyParams(modes, 1.49), y)
    assert stats.kstest(u, "uniform").pvalue > 0.01


def test_diagnostics_export():
    data = censored_gamma(120, 3)
    res = fit(data, "gamma")
    diag = diagnostics_export(res, data)
    assert len(diag.points) == data.n and len(diag.qq) == data.n
    assert [c for _, _, c in diag.points] == data.cens.tolist()
    theo = np.array([t for t, _, _ in diag.qq])
    np.testing.assert_allclose(theo, special.normal_quantile((np.arange(1, 121) - 0.5) / 120))
    sample = [s for _, s, _ in diag.qq]
    assert sample == sorted(sample)
    order = np.argsort(res.residuals, kind="stable")
    assert [c for _, _, c in diag.qq] == data.cens[order].tolist()


def test_fit_result_invariants():
    data = censored_gamma(300, 4)
    res = fit(data, "gamma")
    assert res.n_par == 4
    v = res.vcov_full
    np.testing.assert_array_equal(v, v.T)
    assert np.all(np.linalg.eigvalsh(v) >= 0) and np.all(np.diag(v) >= 0)
    assert np.all(res.fitted_modes > 0)
    assert res.vcov_beta.shape == (3, 3)
    assert res.link is Link.LOG


def test_fit_without_covariance_is_flagged(monkeypatch):
    import modalfit.inference as inf

    def broken(_):
        raise SingularHessianError("forced")

    monkeypatch.setattr(inf, "covariance", broken)
    data = censored_gamma(60, 5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = inf.fit(data, "gamma")
    assert res.vcov_full is None and not res.vcov_available and res.vcov_beta is None
    with pytest.raises(SingularHessianError):
        dispersion_interval(res)
