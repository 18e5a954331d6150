"""Command-line front end.

Subcommands::

    modalfit fit       --data FILE --response COL [--cens COL] [--covariates A,B] --family F
    modalfit compare   --data FILE --response COL ... --families weibull,gamma
    modalfit simulate  [--config FILE] [--out-dir DIR]
    modalfit motorette [--out-dir DIR]

``--transform COL:FUNC`` (repeatable) applies ``log``, ``log10`` or
``arrhenius`` (``1000 / (x + 273.2)``) to a column before fitting.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import re
import sys
import warnings
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (BadCensoringColumn, CalibrationError, ConfigError, ConstraintError, DataError,
                     DomainError, MissingValueError, ModalFitError, SingularHessianError,
                     SupportViolation)
from .family import Family
from .inference import (FitResult, coef_table, diagnostics_export, dispersion_interval, fit,
                        information_criteria, pseudo_r2)
from .likelihood import Dataset
from .simstudy import StudyConfig, default_grid, export_study, run_study

__all__ = ["main", "RunReport", "read_csv", "build_dataset", "TRANSFORMS", "EXIT_CODES"]

EXIT_OK = 0
EXIT_CODES = {
    "not_converged": 1,
    "usage": 2,
    MissingValueError: 3,
    SupportViolation: 4,
    BadCensoringColumn: 5,
    DataError: 6,
    ConfigError: 7,
    ConstraintError: 8,
    DomainError: 8,
    SingularHessianError: 9,
    CalibrationError: 10,
    ModalFitError: 11,
    OSError: 12,
}

NA_TOKENS = frozenset({"", "na", "nan", "n/a", "null", "none", "."})
_NUMBER = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")

TRANSFORMS = {
    "log": ("log({})", np.log),
    "log10": ("log10({})", np.log10),
    "arrhenius": ("arrhenius({})", lambda x: 1000.0 / (x + 273.2)),
}

MOTORETTE_FAMILIES = ("weibull", "gamma", "lognormal", "invgauss")


def exit_code_for(exc: BaseException) -> int:
    for cls in type(exc).__mro__:
        if cls in EXIT_CODES:
            return EXIT_CODES[cls]
    return EXIT_CODES[ModalFitError]


# ---------------------------------------------------------------------------
# input
# ---------------------------------------------------------------------------

def read_csv(path) -> dict[str, list[str]]:
    """Raw CSV columns keyed by header name (UTF-8, comma-separated)."""
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    cols = {h: [] for h in header}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"{path}: line {lineno} has {len(row)} fields, header has {len(header)}")
        for h, cell in zip(header, row):
            cols[h].append(cell.strip())
    return cols


def _numeric(name: str, cells: list[str]) -> np.ndarray:
    """Parse a column with a locale-independent number grammar; NA becomes NaN."""
    out = np.empty(len(cells))
    for i, cell in enumerate(cells):
        if cell.lower() in NA_TOKENS:
            out[i] = np.nan
        elif _NUMBER.fullmatch(cell):
            out[i] = float(cell)
        else:
            raise DataError(f"row {i + 2}, column {name!r}: non-numeric value {cell!r}")
    return out


def _parse_transform(spec: str) -> tuple[str, str]:
    col, sep, func = spec.rpartition(":")
    if not sep or not col or func not in TRANSFORMS:
        raise DataError(f"bad --transform {spec!r}; expected COL:FUNC with FUNC in "
                        f"{', '.join(TRANSFORMS)}")
    return col, func


def build_dataset(cols: dict[str, list[str]], response: str, covariates: list[str],
                  cens: str | None = None, transforms: list[str] = ()) -> Dataset:
    """Assemble a :class:`Dataset` with an intercept from named CSV columns.

    Any missing value in a referenced column halts with
    :class:`MissingValueError` naming every offending column.
    """
    used = [response, *covariates] + ([cens] if cens else [])
    absent = [c for c in used if c not in cols]
    if absent:
        raise DataError(f"column(s) not found: {', '.join(absent)}; available: {', '.join(cols)}")
    values = {c: _numeric(c, cols[c]) for c in dict.fromkeys(used)}
    missing = [c for c in values if np.any(np.isnan(values[c]))]
    if missing:
        raise MissingValueError(missing)
    labels = {c: c for c in values}
    for spec in transforms:
        col, func = _parse_transform(spec)
        if col not in values:
            raise DataError(f"--transform refers to unused column {col!r}")
        label, f = TRANSFORMS[func]
        with np.errstate(divide="ignore", invalid="ignore"):
            new = f(values[col])
        if not np.all(np.isfinite(new)):
            raise DataError(f"transform {func} produced non-finite values in column {col!r}")
        values[col] = new
        labels[col] = label.format(labels[col])
    c = values[cens] if cens else None
    if c is not None and np.any((c != 0) & (c != 1)):
        raise BadCensoringColumn(f"censoring column {cens!r} must contain only 0 and 1")
    n = len(values[response])
    X = np.column_stack([np.ones(n)] + [values[v] for v in covariates])
    names = ["(Intercept)"] + [labels[v] for v in covariates]
    return Dataset(values[response], X, c, names=names, response_name=labels[response])


def motorette_csv() -> Path:
    return Path(str(resources.files("modalfit") / "data" / "motorette.csv"))


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class RunReport:
    """Machine-readable summary of one fit; JSON round trip is lossless."""

    family: str
    link: str
    response: str
    n: int
    n_censored: int
    level: float
    coefficients: list[dict]
    dispersion: float
    dispersion_ci: list[float] | None
    loglik: float
    aic: float
    bic: float
    pseudo_r2: float
    converged: bool
    iterations: int
    message: str
    covariance_available: bool
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls(**json.loads(text))


def make_report(res: FitResult, data: Dataset, level: float, caught: list[str]) -> RunReport:
    aic, bic = information_criteria(res)
    notes = list(caught)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        r2 = pseudo_r2(res, data)
    notes += [str(x.message) for x in w]
    if res.vcov_available:
        t = coef_table(res, level)
        coefs = [dict(zip(("name", "estimate", "std_error", "z", "p_value", "lower", "upper"), row))
                 for row in t.rows()]
        dci = list(dispersion_interval(res, level))
    else:
        coefs = [{"name": nm, "estimate": float(e), "std_error": None, "z": None,
                  "p_value": None, "lower": None, "upper": None}
                 for nm, e in zip(res.names, res.coefficients)]
        dci = None
    return RunReport(family=res.family.value, link=res.link.value, response=data.response_name,
                     n=res.n, n_censored=int(data.cens.sum()), level=level, coefficients=coefs,
                     dispersion=res.dispersion, dispersion_ci=dci, loglik=res.loglik, aic=aic,
                     bic=bic, pseudo_r2=r2, converged=res.converged,
                     iterations=res.optim.iterations, message=res.optim.message,
                     covariance_available=res.vcov_available, warnings=notes)


def _g(x, width=11, prec=5) -> str:
    return f"{'NA':>{width}}" if x is None else f"{x:>{width}.{prec}g}"


def format_summary(rep: RunReport) -> str:
    lines = [
        f"Modal regression ({rep.family}, {rep.link} link) for {rep.response}",
        f"n = {rep.n}, censored = {rep.n_censored} ({100.0 * rep.n_censored / rep.n:.1f}%)",
        "",
        f"{'':<22}{'Estimate':>11}{'Std.Err':>11}{'z':>11}{'Pr(>|z|)':>11}"
        f"{'lower':>11}{'upper':>11}",
    ]
    for c in rep.coefficients:
        lines.append(f"{c['name']:<22}" + "".join(
            _g(c[k]) for k in ("estimate", "std_error", "z", "p_value", "lower", "upper")))
    ci = ("unavailable" if rep.dispersion_ci is None
          else f"[{rep.dispersion_ci[0]:.5g}, {rep.dispersion_ci[1]:.5g}]")
    lines += [
        "",
        f"dispersion phi = {rep.dispersion:.6g}, {100 * rep.level:g}% CI {ci}",
        f"log-likelihood = {rep.loglik:.6f}   AIC = {rep.aic:.4f}   BIC = {rep.bic:.4f}",
        f"pseudo-R2 = {rep.pseudo_r2:.4f} (all units, censored at their censoring values)",
        f"converged: {'yes' if rep.converged else 'no'} after {rep.iterations} iterations "
        f"({rep.message})",
    ]
    lines += [f"warning: {w}" for w in rep.warnings]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# SVG plots
# ---------------------------------------------------------------------------

def _svg_scatter(points, title: str, xlabel: str, ylabel: str, reference: str) -> str:
    """Minimal standalone scatter plot; censored points drawn as open triangles."""
    W, H, pad = 480, 360, 50
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys + [0.0]), max(ys + [0.0])
    if reference == "diagonal":
        y0, y1 = min(y0, x0), max(y1, x1)
        x0, x1 = y0, y1
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (W - 2 * pad)

    def sy(v):
        return H - pad - (v - y0) / (y1 - y0) * (H - 2 * pad)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<rect x="{pad}" y="{pad}" width="{W - 2 * pad}" height="{H - 2 * pad}" '
           'fill="none" stroke="black"/>',
           f'<text x="{W / 2}" y="{pad / 2}" text-anchor="middle" font-size="14">{title}</text>',
           f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle">{xlabel}</text>',
           f'<text x="14" y="{H / 2}" text-anchor="middle" '
           f'transform="rotate(-90 14 {H / 2})">{ylabel}</text>']
    for v, anchor in ((x0, "start"), (x1, "end")):
        out.append(f'<text x="{sx(v):.1f}" y="{H - pad + 15}" text-anchor="{anchor}">{v:.3g}</text>')
    for v in (y0, y1):
        out.append(f'<text x="{pad - 4}" y="{sy(v):.1f}" text-anchor="end">{v:.3g}</text>')
    if reference == "diagonal":
        out.append(f'<line x1="{sx(x0):.1f}" y1="{sy(x0):.1f}" x2="{sx(x1):.1f}" y2="{sy(x1):.1f}" '
                   'stroke="grey" stroke-dasharray="4"/>')
    else:
        out.append(f'<line x1="{pad}" y1="{sy(0.0):.1f}" x2="{W - pad}" y2="{sy(0.0):.1f}" '
                   'stroke="grey" stroke-dasharray="4"/>')
    for x, y, c in points:
        px, py = sx(x), sy(y)
        if c:
            out.append(f'<path d="M{px:.1f},{py - 4:.1f} L{px + 4:.1f},{py + 3:.1f} '
                       f'L{px - 4:.1f},{py + 3:.1f} Z" fill="none" stroke="firebrick"/>')
        else:
            out.append(f'<circle cx="{px:.1f}" cy="{py:.1f}" r="3" fill="steelblue"/>')
    out.append(f'<text x="{W - pad}" y="{pad - 6}" text-anchor="end" font-size="10">'
               'filled: observed, open triangle: censored</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_artifacts(res: FitResult, data: Dataset, rep: RunReport, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "summary.txt").write_text(format_summary(rep), encoding="utf-8")
    (out_dir / "report.json").write_text(rep.to_json(), encoding="utf-8")
    diag = diagnostics_export(res, data)
    _write_csv(out_dir / "fitted.csv", ["row", "y", "cens", "fitted_mode", "residual"],
               [[i + 1, repr(float(y)), int(c), repr(m), repr(r)]
                for i, (y, (m, r, c)) in enumerate(zip(data.y, diag.points))])
    _write_csv(out_dir / "qq.csv", ["theoretical", "sample", "cens"],
               [[repr(t), repr(s), c] for t, s, c in diag.qq])
    (out_dir / "residuals.svg").write_text(
        _svg_scatter(diag.points, "Residuals vs fitted modes", "fitted mode",
                     "quantile residual", "zero"), encoding="utf-8")
    (out_dir / "qq.svg").write_text(
        _svg_scatter(diag.qq, "Normal Q-Q plot", "theoretical quantile", "sample quantile",
                     "diagonal"), encoding="utf-8")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _fit_with_notes(data: Dataset, family, seed: int):
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        res = fit(data, family, rng=seed)
    return res, [str(x.message) for x in w]


def _load(args) -> Dataset:
    covs = [c.strip() for c in args.covariates.split(",") if c.strip()] if args.covariates else []
    return build_dataset(read_csv(args.data), args.response, covs, args.cens, args.transform or [])


def cmd_fit(args) -> int:
    data = _load(args)
    res, notes = _fit_with_notes(data, args.family, args.seed)
    rep = make_report(res, data, args.level, notes)
    sys.stdout.write(format_summary(rep))
    if args.out_dir:
        write_artifacts(res, data, rep, Path(args.out_dir))
    if not res.vcov_available:
        return EXIT_CODES[SingularHessianError]
    return EXIT_OK if res.converged else EXIT_CODES["not_converged"]


def compare_families(data: Dataset, families, seed: int = 0) -> list[dict]:
    """Fit every family to ``data``; failures become rows with an ``error`` entry."""
    rows = []
    for fam in families:
        fam = Family.coerce(fam)
        try:
            res, _ = _fit_with_notes(data, fam, seed)
            aic, bic = information_criteria(res)
            rows.append({"family": fam.value, "coefficients": res.coefficients.tolist(),
                         "dispersion": res.dispersion, "loglik": res.loglik, "aic": aic,
                         "bic": bic, "converged": res.converged, "error": None})
        except ModalFitError as exc:
            rows.append({"family": fam.value, "coefficients": None, "dispersion": None,
                         "loglik": None, "aic": None, "bic": None, "converged": False,
                         "error": f"{type(exc).__name__}: {exc}"})
    ok = [r for r in rows if r["aic"] is not None and math.isfinite(r["aic"])]
    best = min(ok, key=lambda r: r["aic"])["family"] if ok else None
    for r in rows:
        r["best"] = r["family"] == best
    return rows


def format_comparison(rows, names) -> str:
    head = f"{'family':<11}" + "".join(f"{n:>18}" for n in names)
    head += f"{'phi':>12}{'loglik':>12}{'AIC':>11}{'BIC':>11}"
    lines = [head]
    for r in rows:
        if r["error"]:
            lines.append(f"{r['family']:<11}failed: {r['error']}")
            continue
        line = f"{r['family']:<11}" + "".join(f"{c:>18.6f}" for c in r["coefficients"])
        line += f"{r['dispersion']:>12.5g}{r['loglik']:>12.4f}{r['aic']:>11.3f}{r['bic']:>11.3f}"
        lines.append(line + ("  <- lowest AIC" if r["best"] else ""))
    return "\n".join(lines) + "\n"


def _write_comparison(rows, names, text, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "compare.txt").write_text(text, encoding="utf-8")
    (out_dir / "compare.json").write_text(
        json.dumps({"names": names, "rows": rows}, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_compare(args) -> int:
    data = _load(args)
    families = [f.strip() for f in args.families.split(",") if f.strip()]
    for f in families:
        Family.coerce(f)
    rows = compare_families(data, families, args.seed)
    text = format_comparison(rows, data.names)
    sys.stdout.write(text)
    if args.out_dir:
        _write_comparison(rows, data.names, text, Path(args.out_dir))
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_CODES["not_converged"]


def cmd_simulate(args) -> int:
    if args.config:
        path = Path(args.config)
        cfg = StudyConfig.from_json(path.read_text(encoding="utf-8"), str(path))
        scenarios = cfg.scenarios()
    else:
        scenarios = default_grid()

    def progress(i, total, m):
        print(f"[{i}/{total}] {m.scenario_id}: {m.n_success}/{m.B} ok, censored "
              f"{m.censored_fraction:.3f}, coverage "
              + " ".join(f"{c:.3f}" for c in m.coverage), flush=True)

    results = run_study(scenarios, progress=progress)
    paths = export_study(results, args.out_dir)
    print("wrote " + ", ".join(str(p) for p in paths.values()))
    return EXIT_OK if not any(r.metrics.failed for r in results) else EXIT_CODES["not_converged"]


def cmd_motorette(args) -> int:
    """Bundled motorette data: log10 hours on the Arrhenius temperature."""
    cols = read_csv(motorette_csv())
    data = build_dataset(cols, "hours", ["temp"], "cens", ["hours:log10", "temp:arrhenius"])
    rows = compare_families(data, MOTORETTE_FAMILIES, args.seed)
    text = format_comparison(rows, data.names)
    sys.stdout.write(text)
    if args.out_dir:
        out = Path(args.out_dir)
        _write_comparison(rows, data.names, text, out)
        res, notes = _fit_with_notes(data, "weibull", args.seed)
        write_artifacts(res, data, make_report(res, data, 0.95, notes), out / "weibull")
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_CODES["not_converged"]


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _level(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError("level must lie in (0, 1)")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="modalfit", description="Censored modal regression")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def data_args(sp):
        sp.add_argument("--data", required=True, help="CSV file with a header row")
        sp.add_argument("--response", required=True)
        sp.add_argument("--cens", help="0/1 column, 1 = right censored (default: none)")
        sp.add_argument("--covariates", default="", help="comma-separated column names")
        sp.add_argument("--transform", action="append", metavar="COL:FUNC",
                        help=f"FUNC in {{{','.join(TRANSFORMS)}}}; repeatable")
        sp.add_argument("--seed", type=int, default=0, help="seed for residual randomization")
        sp.add_argument("--out-dir")

    f = sub.add_parser("fit", help="fit one family")
    data_args(f)
    f.add_argument("--family", required=True, choices=[m.value for m in Family])
    f.add_argument("--level", type=_level, default=0.95)
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("compare", help="fit several families and compare AIC/BIC")
    data_args(c)
    c.add_argument("--families", default=",".join(MOTORETTE_FAMILIES))
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("simulate", help="run the Monte Carlo study")
    s.add_argument("--config", help="JSON scenario config (default: the full 75-scenario grid)")
    s.add_argument("--out-dir", default="simulation")
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("motorette", help="compare families on the bundled motorette data")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out-dir")
    m.set_defaults(func=cmd_motorette)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ModalFitError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, ModalFitError) or isinstance(exc, OSError):
            return exit_code_for(exc)
        return EXIT_CODES[DataError]


if __name__ == "__main__":
    sys.exit(main())
