import csv
import json

import numpy as np
import pytest

from modalfit.errors import CalibrationError, ConfigError
from modalfit.family import Family
from modalfit.simstudy import (DGPS, ReplicationRecord, SimScenario, StudyConfig, calibrate_censoring,
                               default_grid, export_study, generate_covariates, run_scenario,
                               simulate_data, summarize, worker_count)


def test_dgp_dispersions_match_study_shapes():
    assert SimScenario("gamma", 50, 0, 1, 0).dispersion == pytest.approx(0.4)
    assert SimScenario("weibull", 50, 0, 1, 0).dispersion == pytest.approx(1.49)
    assert SimScenario("beta", 50, 0, 1, 0).dispersion == pytest.approx(2.0)
    assert SimScenario("lognormal", 50, 0, 1, 0).dispersion == pytest.approx(0.5)
    assert SimScenario("invgauss", 50, 0, 1, 0).dispersion == pytest.approx(5.0)
    assert SimScenario("beta", 50, 0, 1, 0).gamma == (-1.1, 0.3, 0.2)


def test_scenario_validation():
    with pytest.raises(ConfigError):
        SimScenario("gamma", 50, 1.0, 10, 0)
    with pytest.raises(ConfigError):
        SimScenario("gamma", 50, 0.1, 0, 0)


@pytest.mark.parametrize("family", list(Family))
def test_covariates(family):
    X = generate_covariates(family, 100_000, np.random.default_rng(1))
    lo, hi = DGPS[family].covariate_range
    assert np.all(X[:, 0] == 1)
    assert np.all((X[:, 1:] >= lo) & (X[:, 1:] <= hi))
    se = (hi - lo) / np.sqrt(12 * 100_000)
    assert np.all(np.abs(X[:, 1:].mean(axis=0) - (lo + hi) / 2) < 4 * se)
    again = generate_covariates(family, 10, np.random.default_rng(1))
    assert np.array_equal(again, generate_covariates(family, 10, np.random.default_rng(1)))


def test_no_censoring_at_zero_target():
    sc = SimScenario("gamma", 200, 0.0, 1, 0)
    data = simulate_data(sc, np.random.default_rng(0), None)
    assert data.cens.sum() == 0


def test_calibration_monotone_and_errors():
    r10 = calibrate_censoring("gamma", (0.8, 0.3, 0.15), 0.4, 0.10, seed=1)
    r25 = calibrate_censoring("gamma", (0.8, 0.3, 0.15), 0.4, 0.25, seed=1)
    assert r25 > r10
    with pytest.raises(CalibrationError):
        calibrate_censoring("gamma", (0.8, 0.3, 0.15), 0.4, 0.0)


def test_realized_censoring_gamma_ten_percent():
    sc = SimScenario("gamma", 100, 0.10, 1000, 5)
    rate = calibrate_censoring(sc.family, sc.gamma, sc.dispersion, 0.10, sc.seed)
    fracs = [simulate_data(sc, np.random.default_rng([5, b]), rate).cens.mean() for b in range(1000)]
    assert abs(np.mean(fracs) - 0.10) <= 0.01


def test_beta_censoring_uses_same_mechanism():
    sc = SimScenario("beta", 400, 0.25, 1, 3)
    rate = calibrate_censoring(sc.family, sc.gamma, sc.dispersion, 0.25, 3)
    data = simulate_data(sc, np.random.default_rng(0), rate)
    assert 0.15 < data.cens.mean() < 0.35
    assert np.all((data.y > 0) & (data.y < 1))


def test_summarize_invariants_and_failures():
    sc = SimScenario("gamma", 100, 0.0, 100, 0)
    good = ReplicationRecord(0, True, [0.9, 0.2, 0.1], [0.7, 0.0, -0.1], [1.1, 0.4, 0.3], 0.5,
                             (0.3, 0.6), 0.0)
    bad = ReplicationRecord(1, False, [np.nan] * 3, [np.nan] * 3, [np.nan] * 3, np.nan,
                            (np.nan, np.nan), 0.0, "failed")
    m = summarize(sc, [good] * 97 + [bad] * 3)
    assert m.n_success == 97 and m.n_failed == 3 and m.failed
    assert m.coverage == [1.0, 1.0, 1.0]
    assert all(r >= abs(b) for r, b in zip(m.rmse, m.bias))
    assert summarize(sc, [good] * 98 + [bad] * 2).failed is False


def test_run_scenario_metrics():
    res = run_scenario(SimScenario("weibull", 50, 0.25, 40, 11), workers=1)
    m = res.metrics
    assert m.n_success + m.n_failed == 40 and m.n_success <= 40
    assert all(0 <= c <= 1 for c in m.coverage)
    assert all(r >= abs(b) for r, b in zip(m.rmse, m.bias))
    assert abs(m.censored_fraction - 0.25) < 0.05
    assert [r.rep for r in res.records] == list(range(40))


def test_worker_count_independence(tmp_path):
    sc = SimScenario("lognormal", 40, 0.10, 12, 3)
    one = run_scenario(sc, workers=1)
    two = run_scenario(sc, workers=2)
    a = export_study([one], tmp_path / "a")
    b = export_study([two], tmp_path / "b")
    for name in a:
        assert a[name].read_bytes() == b[name].read_bytes()


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("MODALFIT_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("MODALFIT_THREADS", "x")
    with pytest.raises(ConfigError):
        worker_count()


def test_default_grid_shape_and_export(tmp_path):
    grid = default_grid(B=1, seed=1)
    assert len(grid) == 75
    assert len({s.scenario_id for s in grid}) == 75
    results = [run_scenario(s, workers=1) for s in grid]
    paths = export_study(results, tmp_path)
    with open(paths["coverage.csv"]) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 225
    assert all(0.0 <= float(r["coverage"]) <= 1.0 for r in rows)
    assert len(json.loads(paths["results.json"].read_text())) == 75


def test_config_parsing():
    cfg = StudyConfig.from_json('{"families": ["gamma"], "n": [25, 50], "censoring": [0, 0.1], '
                                '"B": 5, "seed": 3}')
    assert len(cfg.scenarios()) == 4
    with pytest.raises(ConfigError, match=r"cfg.json:2:"):
        StudyConfig.from_json('{"families": ["gamma"],\n "n": [25,, 50]}', "cfg.json")
    with pytest.raises(ConfigError, match=r"families\[1\]"):
        StudyConfig.from_json('{"families": ["gamma", "poisson"]}')
    with pytest.raises(ConfigError, match="'B'"):
        StudyConfig.from_json('{"B": "many"}')
    with pytest.raises(ConfigError, match="unknown field"):
        StudyConfig.from_json('{"reps": 3}')
