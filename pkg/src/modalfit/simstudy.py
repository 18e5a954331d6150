"""Monte Carlo harness for the finite-sample behaviour of the modal MLE.

A scenario fixes a family, its data-generating process, a sample size ``n``
and a target censoring fraction.  Each replication redraws covariates,
event times and exponential censoring times, fits the model and records
the estimates with their 95% Wald intervals.  Replication seeds come from
``SeedSequence([master, crc32(scenario_id), rep])``, so results do not
depend on execution order or on the number of worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .dists import FamilyParams, sample
from .errors import CalibrationError, ConfigError, ModalFitError
from .family import Family
from .inference import coef_table, dispersion_interval, fit
from .likelihood import Dataset
from .reparam import dispersion_from_shape

__all__ = [
    "DGP", "DGPS", "SimScenario", "ReplicationRecord", "SimMetrics", "ScenarioResult",
    "StudyConfig", "generate_covariates", "simulate_data", "calibrate_censoring",
    "run_replication", "run_scenario", "run_study", "summarize", "export_study",
    "default_grid", "worker_count",
    "PILOT_SIZE", "CALIBRATION_TOL", "FAILURE_LIMIT",
]

PILOT_SIZE = 50_000
CALIBRATION_TOL = 0.002
LOG_RATE_BRACKET = (-20.0, 20.0)
#: a scenario is flagged as failed when more than this share of replications fail
FAILURE_LIMIT = 0.02
SAMPLE_SIZES = (25, 50, 100, 200, 400)
CENSORING_LEVELS = (0.0, 0.10, 0.25)
PARAM_NAMES = ("gamma0", "gamma1", "gamma2")


@dataclass(frozen=True)
class DGP:
    """Coefficients, native shape and covariate range of one family's DGP."""

    gamma: tuple[float, float, float]
    shape: float
    covariate_range: tuple[float, float]


DGPS = {
    Family.GAMMA: DGP((0.8, 0.3, 0.15), 3.5, (0.0, 1.0)),
    Family.WEIBULL: DGP((0.8, 0.3, 0.15), 2.5, (0.0, 1.0)),
    Family.LOGNORMAL: DGP((0.8, 0.3, 0.15), 0.5, (0.0, 1.0)),
    Family.BETA: DGP((-1.1, 0.3, 0.2), 3.0, (-1.0, 1.0)),
    Family.INVGAUSS: DGP((-2.0, 0.3, 0.15), 5.0, (0.0, 1.0)),
}


@dataclass(frozen=True)
class SimScenario:
    """One cell of the study grid.

    ``dispersion`` is the internal ``phi`` (not the native shape); both it
    and ``gamma`` default to the family's DGP.
    """

    family: Family
    n: int
    censoring: float
    B: int
    seed: int
    gamma: tuple[float, ...] | None = None
    dispersion: float | None = None

    def __post_init__(self):
        family = Family.coerce(self.family)
        object.__setattr__(self, "family", family)
        dgp = DGPS[family]
        if self.gamma is None:
            object.__setattr__(self, "gamma", dgp.gamma)
        else:
            object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
        if self.dispersion is None:
            object.__setattr__(self, "dispersion", float(dispersion_from_shape(family, dgp.shape)))
        if len(self.gamma) != 3:
            raise ConfigError("gamma must have three entries (intercept and two slopes)")
        if not 0.0 <= self.censoring < 1.0:
            raise ConfigError("censoring fraction must lie in [0, 1)")
        if self.B < 1:
            raise ConfigError("B must be at least 1")
        if self.n < 4:
            raise ConfigError("n must be at least 4")
        if not self.dispersion > 0:
            raise ConfigError("dispersion must be positive")

    @property
    def scenario_id(self) -> str:
        return f"{self.family.value}-n{self.n}-pc{round(self.censoring * 100):02d}"


@dataclass
class ReplicationRecord:
    rep: int
    success: bool
    estimates: list[float]
    ci_lower: list[float]
    ci_upper: list[float]
    dispersion: float
    dispersion_ci: tuple[float, float]
    censored_fraction: float
    message: str = ""


@dataclass
class SimMetrics:
    """Aggregates over the successful replications of one scenario."""

    scenario_id: str
    family: str
    n: int
    censoring: float
    B: int
    n_success: int
    n_failed: int
    failed: bool
    bias: list[float]
    rmse: list[float]
    coverage: list[float]
    dispersion_bias: float
    dispersion_rmse: float
    dispersion_coverage: float
    censored_fraction: float
    censoring_rate: float | None


@dataclass
class ScenarioResult:
    scenario: SimScenario
    metrics: SimMetrics
    records: list[ReplicationRecord] = field(repr=False)


def worker_count() -> int:
    """Worker processes allowed by ``MODALFIT_THREADS`` (default 1)."""
    raw = os.environ.get("MODALFIT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"MODALFIT_THREADS must be an integer, got {raw!r}") from None


def generate_covariates(family, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n x 3`` design: intercept plus two iid uniforms on the family's range."""
    lo, hi = DGPS[Family.coerce(family)].covariate_range
    return np.column_stack([np.ones(n), rng.uniform(lo, hi, size=(n, 2))])


def _event_times(family: Family, gamma, phi, X, rng):
    mode = family.default_link.inverse(X @ np.asarray(gamma, dtype=float))
    return sample(family, FamilyParams(mode, phi), rng)


def simulate_data(scenario: SimScenario, rng: np.random.Generator,
                  rate: float | None = None) -> Dataset:
    """One censored sample: ``(min(Y, W), 1{Y > W})`` with ``W ~ Exp(rate)``."""
    X = generate_covariates(scenario.family, scenario.n, rng)
    Y = _event_times(scenario.family, scenario.gamma, scenario.dispersion, X, rng)
    if rate is None:
        return Dataset(Y, X, names=["(Intercept)", "x1", "x2"])
    W = rng.exponential(1.0 / rate, size=scenario.n)
    cens = (Y > W).astype(np.int8)
    return Dataset(np.minimum(Y, W), X, cens, names=["(Intercept)", "x1", "x2"])


def calibrate_censoring(family, gamma, dispersion, target: float,
                        seed: int = 0, pilot_size: int = PILOT_SIZE) -> float:
    """Exponential censoring rate giving censored fraction ``target`` on a pilot.

    The pilot draws ``pilot_size`` covariate rows and event times once and
    reuses one set of unit exponentials, so the censored fraction is
    monotone in the rate.  Bisection runs on ``log rate`` over
    ``[-20, 20]`` until the fraction is within 0.002 of ``target``.
    """
    family = Family.coerce(family)
    if not 0.0 < target < 1.0:
        raise CalibrationError("calibration needs a target fraction in (0, 1)")
    key = (family, tuple(float(g) for g in gamma), float(dispersion), float(target), int(seed),
           int(pilot_size))
    return _calibrate_cached(*key)


@lru_cache(maxsize=None)
def _calibrate_cached(family, gamma, dispersion, target, seed, pilot_size):
    tag = zlib.crc32(f"pilot:{family.value}".encode())
    rng = np.random.default_rng(np.random.SeedSequence([seed, tag]))
    X = generate_covariates(family, pilot_size, rng)
    Y = _event_times(family, gamma, dispersion, X, rng)
    E = rng.exponential(size=pilot_size)

    def fraction(log_rate):
        return float(np.mean(E / np.exp(log_rate) < Y))

    lo, hi = LOG_RATE_BRACKET
    f_lo, f_hi = fraction(lo), fraction(hi)
    if not f_lo <= target <= f_hi:
        raise CalibrationError(
            f"target censoring {target} outside the attainable range [{f_lo:.4f}, {f_hi:.4f}]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = fraction(mid)
        if abs(f_mid - target) <= CALIBRATION_TOL:
            return float(np.exp(mid))
        if f_mid < target:
            lo = mid
        else:
            hi = mid
    raise CalibrationError(f"bisection did not reach tolerance for target {target}")


def _rate_for(scenario: SimScenario) -> float | None:
    if scenario.censoring == 0:
        return None
    return calibrate_censoring(scenario.family, scenario.gamma, scenario.dispersion,
                               scenario.censoring, scenario.seed)


def _replication_rng(scenario: SimScenario, rep: int) -> np.random.Generator:
    tag = zlib.crc32(scenario.scenario_id.encode())
    return np.random.default_rng(np.random.SeedSequence([scenario.seed, tag, rep]))


def run_replication(scenario: SimScenario, rep: int, rate: float | None) -> ReplicationRecord:
    rng = _replication_rng(scenario, rep)
    nan3 = [float("nan")] * 3
    cfrac = float("nan")
    try:
        data = simulate_data(scenario, rng, rate)
        cfrac = float(np.mean(data.cens))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = fit(data, scenario.family, rng=rng)
        if not res.converged:
            raise ModalFitError(res.optim.message)
        table = coef_table(res, 0.95)
        phi_ci = dispersion_interval(res, 0.95)
    except (ModalFitError, ArithmeticError, ValueError) as exc:
        return ReplicationRecord(rep, False, nan3, nan3, nan3, float("nan"),
                                 (float("nan"), float("nan")), cfrac, f"{type(exc).__name__}: {exc}")
    return ReplicationRecord(rep, True, table.estimate.tolist(), table.lower.tolist(),
                             table.upper.tolist(), res.dispersion, phi_ci, cfrac)


def _run_chunk(args):
    scenario, reps, rate = args
    logging.getLogger("modalfit").setLevel(logging.ERROR)
    return [run_replication(scenario, r, rate) for r in reps]


def summarize(scenario: SimScenario, records: list[ReplicationRecord],
              rate: float | None = None) -> SimMetrics:
    ok = [r for r in records if r.success]
    n_ok = len(ok)
    truth = np.asarray(scenario.gamma)
    phi0 = scenario.dispersion
    nan3 = [float("nan")] * 3
    if n_ok:
        est = np.array([r.estimates for r in ok])
        lo = np.array([r.ci_lower for r in ok])
        hi = np.array([r.ci_upper for r in ok])
        err = est - truth
        bias = err.mean(axis=0).tolist()
        rmse = np.sqrt(np.mean(err ** 2, axis=0)).tolist()
        cover = np.mean((lo <= truth) & (truth <= hi), axis=0).tolist()
        phis = np.array([r.dispersion for r in ok])
        phi_ci = np.array([r.dispersion_ci for r in ok])
        d_bias = float(np.mean(phis - phi0))
        d_rmse = float(np.sqrt(np.mean((phis - phi0) ** 2)))
        d_cover = float(np.mean((phi_ci[:, 0] <= phi0) & (phi0 <= phi_ci[:, 1])))
    else:
        bias, rmse, cover = nan3, nan3, nan3
        d_bias = d_rmse = d_cover = float("nan")
    fracs = [r.censored_fraction for r in records if np.isfinite(r.censored_fraction)]
    n_failed = len(records) - n_ok
    return SimMetrics(
        scenario_id=scenario.scenario_id, family=scenario.family.value, n=scenario.n,
        censoring=scenario.censoring, B=scenario.B, n_success=n_ok, n_failed=n_failed,
        failed=n_failed > FAILURE_LIMIT * len(records),
        bias=bias, rmse=rmse, coverage=cover,
        dispersion_bias=d_bias, dispersion_rmse=d_rmse, dispersion_coverage=d_cover,
        censored_fraction=float(np.mean(fracs)) if fracs else float("nan"),
        censoring_rate=rate,
    )


def run_scenario(scenario: SimScenario, workers: int | None = None) -> ScenarioResult:
    """Run all ``B`` replications and aggregate them in replication order."""
    workers = worker_count() if workers is None else max(1, int(workers))
    rate = _rate_for(scenario)
    reps = list(range(scenario.B))
    if workers == 1 or scenario.B < 2:
        records = _run_chunk((scenario, reps, rate))
    else:
        chunks = [reps[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_run_chunk, [(scenario, c, rate) for c in chunks])
            records = sorted((r for part in parts for r in part), key=lambda r: r.rep)
    metrics = summarize(scenario, records, rate)
    if metrics.failed:
        logging.getLogger(__name__).warning(
            "scenario %s: %d of %d replications failed", scenario.scenario_id,
            metrics.n_failed, scenario.B)
    return ScenarioResult(scenario, metrics, records)


def run_study(scenarios, workers: int | None = None, progress=None) -> list[ScenarioResult]:
    results = []
    for i, sc in enumerate(scenarios, 1):
        results.append(run_scenario(sc, workers))
        if progress is not None:
            progress(i, len(scenarios), results[-1].metrics)
    return results


def default_grid(B: int = 1000, seed: int = 20240601) -> list[SimScenario]:
    """All 75 scenarios: five families x five sample sizes x three censoring levels."""
    return [SimScenario(f, n, pc, B, seed)
            for f in (Family.LOGNORMAL, Family.GAMMA, Family.WEIBULL, Family.BETA, Family.INVGAUSS)
            for pc in CENSORING_LEVELS for n in SAMPLE_SIZES]


@dataclass
class StudyConfig:
    """Parsed study configuration (JSON object).

    Keys: ``families`` (list of names), ``n`` (list of ints), ``censoring``
    (list of fractions in [0, 1)), ``B`` (int) and ``seed`` (int).  Missing
    keys take the default grid's values.
    """

    families: list[str]
    n: list[int]
    censoring: list[float]
    B: int
    seed: int

    @classmethod
    def from_json(cls, text: str, source: str = "<config>") -> "StudyConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{source}: top level must be a JSON object")
        unknown = set(raw) - {"families", "n", "censoring", "B", "seed"}
        if unknown:
            raise ConfigError(f"{source}: unknown field(s) {sorted(unknown)}")
        families = raw.get("families", [f.value for f in DGPS])
        n = raw.get("n", list(SAMPLE_SIZES))
        cens = raw.get("censoring", list(CENSORING_LEVELS))
        B = raw.get("B", 1000)
        seed = raw.get("seed", 20240601)
        if not isinstance(families, list) or not families:
            raise ConfigError(f"{source}: field 'families' must be a non-empty list")
        for i, f in enumerate(families):
            try:
                Family.coerce(f)
            except ValueError:
                raise ConfigError(f"{source}: field 'families[{i}]': unknown family {f!r}") from None
        for name, vals, kind in (("n", n, int), ("censoring", cens, (int, float))):
            if not isinstance(vals, list) or not vals:
                raise ConfigError(f"{source}: field {name!r} must be a non-empty list")
            for i, v in enumerate(vals):
                if isinstance(v, bool) or not isinstance(v, kind):
                    raise ConfigError(f"{source}: field '{name}[{i}]' has invalid value {v!r}")
        for name, v in (("B", B), ("seed", seed)):
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{source}: field {name!r} must be an integer")
        return cls([Family.coerce(f).value for f in families], list(n), [float(c) for c in cens],
                   B, seed)

    def scenarios(self) -> list[SimScenario]:
        return [SimScenario(f, n, pc, self.B, self.seed)
                for f in self.families for pc in self.censoring for n in self.n]


def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def export_study(results: list[ScenarioResult], out_dir) -> dict[str, Path]:
    """Write ``coverage.csv``, ``rmse.csv``, ``errors.csv`` and ``results.json``.

    Numbers are written with ``repr`` so the bytes depend only on the
    results, which are themselves a function of the master seed.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cov_rows, rmse_rows, err_rows = [], [], []
    for res in results:
        m = res.metrics
        for j, name in enumerate(PARAM_NAMES):
            cov_rows.append([m.family, name, _fmt(m.censoring), m.n, _fmt(m.coverage[j])])
            rmse_rows.append([m.family, name, _fmt(m.censoring), m.n, _fmt(m.bias[j]), _fmt(m.rmse[j])])
        rmse_rows.append([m.family, "phi", _fmt(m.censoring), m.n, _fmt(m.dispersion_bias),
                          _fmt(m.dispersion_rmse)])
        truth = res.scenario.gamma
        for r in res.records:
            if r.success:
                err_rows.append([m.scenario_id, r.rep]
                                + [_fmt(e - t) for e, t in zip(r.estimates, truth)])
    files = {
        "coverage.csv": _csv_text(["family", "parameter", "censoring", "n", "coverage"], cov_rows),
        "rmse.csv": _csv_text(["family", "parameter", "censoring", "n", "bias", "rmse"], rmse_rows),
        "errors.csv": _csv_text(["scenario", "rep", *PARAM_NAMES], err_rows),
        "results.json": json.dumps([asdict(r.metrics) for r in results], indent=2, sort_keys=True) + "\n",
    }
    paths = {}
    for name, text in files.items():
        path = out / name
        path.write_bytes(text.encode("utf-8"))
        paths[name] = path
    return paths
