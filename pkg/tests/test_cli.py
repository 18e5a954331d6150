import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from modalfit.cli import EXIT_CODES, RunReport, build_dataset, main, motorette_csv, read_csv
from modalfit.errors import DataError, MissingValueError


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


@pytest.fixture
def gamma_csv(tmp_path):
    rng = np.random.default_rng(0)
    n = 80
    x = rng.uniform(size=n)
    y = rng.gamma(3.5, np.exp(0.8 + 0.3 * x) / 2.5)
    c = (rng.random(n) < 0.2).astype(int)
    lines = ["y,x,c"] + [f"{float(a)!r},{float(b)!r},{d}" for a, b, d in zip(y, x, c)]
    return write(tmp_path / "d.csv", "\n".join(lines) + "\n")


def test_fit_writes_artifacts(gamma_csv, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["fit", "--data", gamma_csv, "--response", "y", "--cens", "c", "--covariates", "x",
                 "--family", "gamma", "--out-dir", str(out)])
    assert code == 0
    assert "log-likelihood" in capsys.readouterr().out
    for name in ("summary.txt", "report.json", "fitted.csv", "qq.csv", "residuals.svg", "qq.svg"):
        assert (out / name).exists()
    for svg in ("residuals.svg", "qq.svg"):
        root = ET.parse(out / svg).getroot()
        assert root.tag.endswith("svg")
    assert len((out / "fitted.csv").read_text().splitlines()) == 81


def test_report_round_trip(gamma_csv, tmp_path):
    out = tmp_path / "out"
    main(["fit", "--data", gamma_csv, "--response", "y", "--covariates", "x", "--family", "weibull",
          "--out-dir", str(out)])
    text = (out / "report.json").read_text()
    rep = RunReport.from_json(text)
    assert rep.to_json() == text
    raw = json.loads(text)
    assert rep.loglik == raw["loglik"] and rep.coefficients[1]["estimate"] == raw["coefficients"][1]["estimate"]


def test_missing_cens_column_same_as_zeros(tmp_path, gamma_csv):
    text = open(gamma_csv).read().splitlines()
    zeros = [text[0] + ",z"] + [line + ",0" for line in text[1:]]
    path = write(tmp_path / "z.csv", "\n".join(zeros) + "\n")
    a, b = tmp_path / "a", tmp_path / "b"
    main(["fit", "--data", path, "--response", "y", "--covariates", "x", "--family", "gamma",
          "--out-dir", str(a)])
    main(["fit", "--data", path, "--response", "y", "--covariates", "x", "--cens", "z",
          "--family", "gamma", "--out-dir", str(b)])
    assert (a / "report.json").read_text() == (b / "report.json").read_text()


def test_missing_values_halt(tmp_path, capsys):
    path = write(tmp_path / "na.csv", "y,x,w\n1.0,0.1,1\n2.0,NA,2\n3.0,0.3,\n")
    code = main(["fit", "--data", path, "--response", "y", "--covariates", "x,w", "--family", "gamma"])
    assert code == EXIT_CODES[MissingValueError]
    err = capsys.readouterr().err
    assert "x" in err and "w" in err


def test_non_numeric_cell_reports_position(tmp_path):
    path = write(tmp_path / "bad.csv", "y,x\n1.0,0.1\n2.0,1,5\n")
    with pytest.raises(DataError, match="line 3"):
        build_dataset(read_csv(path), "y", ["x"])
    path = write(tmp_path / "bad2.csv", "y,x\n1.0,0.1\n2.0,abc\n")
    with pytest.raises(DataError, match=r"row 3, column 'x'"):
        build_dataset(read_csv(path), "y", ["x"])
    path = write(tmp_path / "bad3.csv", "y,x\n1.0,\"1,5\"\n2.0,0.2\n")
    with pytest.raises(DataError, match="non-numeric"):
        build_dataset(read_csv(path), "y", ["x"])


def test_exit_codes(tmp_path):
    support = write(tmp_path / "s.csv", "y,x\n-1.0,0.1\n2.0,0.2\n3.0,0.5\n")
    assert main(["fit", "--data", support, "--response", "y", "--covariates", "x",
                 "--family", "gamma"]) == 4
    badc = write(tmp_path / "c.csv", "y,x,c\n1.0,0.1,2\n2.0,0.2,0\n3.0,0.5,1\n")
    assert main(["fit", "--data", badc, "--response", "y", "--cens", "c", "--covariates", "x",
                 "--family", "gamma"]) == 5
    assert main(["fit", "--data", support, "--response", "nope", "--family", "gamma"]) == 6
    assert main(["fit", "--data", str(tmp_path / "absent.csv"), "--response", "y",
                 "--family", "gamma"]) == 12
    with pytest.raises(SystemExit) as exc:
        main(["fit", "--data", support, "--response", "y", "--family", "poisson"])
    assert exc.value.code == 2
    codes = [v for k, v in EXIT_CODES.items() if k not in ("not_converged",)]
    assert 0 not in codes


def test_transforms():
    cols = read_csv(motorette_csv())
    data = build_dataset(cols, "hours", ["temp"], "cens", ["hours:log10", "temp:arrhenius"])
    assert data.names == ["(Intercept)", "arrhenius(temp)"]
    assert data.response_name == "log10(hours)"
    assert data.X[0, 1] == pytest.approx(1000 / (150 + 273.2))
    assert data.y[0] == pytest.approx(np.log10(8064))
    with pytest.raises(DataError):
        build_dataset(cols, "hours", ["temp"], "cens", ["temp:sqrt"])


def test_motorette_data_shape():
    data = build_dataset(read_csv(motorette_csv()), "hours", ["temp"], "cens")
    assert data.n == 40 and int(data.cens.sum()) == 23
    assert sorted(set(data.X[:, 1])) == [150, 170, 190, 220]


def test_compare_motorette(capsys, tmp_path):
    assert main(["motorette", "--out-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert len(lines) == 5 and "lowest AIC" in lines[1] and lines[1].startswith("weibull")
    rows = json.loads((tmp_path / "compare.json").read_text())["rows"]
    aic = {r["family"]: r["aic"] for r in rows}
    assert aic["weibull"] < aic["gamma"] < aic["lognormal"] < aic["invgauss"]
    ll = {r["family"]: r["loglik"] for r in rows}
    assert ll["lognormal"] == pytest.approx(-12.303, abs=5e-4)
    assert (tmp_path / "weibull" / "qq.svg").exists()


def test_compare_single_family(gamma_csv, capsys):
    assert main(["compare", "--data", gamma_csv, "--response", "y", "--covariates", "x",
                 "--families", "gamma"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 2


def test_compare_reports_failures_inline(tmp_path, capsys):
    # responses above 1 are outside the beta support; the other row still appears
    path = write(tmp_path / "d.csv", "y,x\n1.5,0.1\n2.5,0.4\n0.7,0.3\n3.1,0.9\n1.2,0.5\n")
    code = main(["compare", "--data", path, "--response", "y", "--covariates", "x",
                 "--families", "gamma,beta"])
    out = capsys.readouterr().out
    assert "beta" in out and "failed" in out and "lowest AIC" in out
    assert code == EXIT_CODES["not_converged"]


def test_simulate_smoke_and_determinism(tmp_path, capsys):
    cfg = write(tmp_path / "cfg.json", json.dumps(
        {"families": ["gamma"], "n": [30], "censoring": [0.0, 0.25], "B": 1, "seed": 4}))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", cfg, "--out-dir", str(a)]) == 0
    assert main(["simulate", "--config", cfg, "--out-dir", str(b)]) == 0
    for name in ("coverage.csv", "rmse.csv", "errors.csv", "results.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert "[2/2]" in capsys.readouterr().out


def test_simulate_bad_config(tmp_path, capsys):
    cfg = write(tmp_path / "cfg.json", '{"families": ["gamma"],\n "B": -}')
    assert main(["simulate", "--config", cfg, "--out-dir", str(tmp_path)]) == 7
    assert "cfg.json:2:" in capsys.readouterr().err
