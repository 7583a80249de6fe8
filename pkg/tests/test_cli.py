import csv
import math
import subprocess
import sys

import numpy as np
import pytest

from tunesel.cli import main
from tunesel.dataset import Dataset, save_table
from tunesel.mc import DgpSpec, simulate_dataset


@pytest.fixture
def series_csv(tmp_path):
    path = tmp_path / "d.csv"
    save_table(simulate_dataset(DgpSpec("sin2pi", 150), 3), path)
    return path


@pytest.fixture
def lasso_csv(tmp_path):
    rng = np.random.default_rng(2)
    X = rng.standard_normal((90, 6))
    y = X[:, 0] + rng.standard_normal(90)
    path = tmp_path / "h.csv"
    save_table(Dataset(X, y, cluster=np.repeat(np.arange(30), 3),
                       col_names=tuple(f"x{j}" for j in range(6))), path)
    return path


def read_kv(path):
    return dict(line.split(" = ", 1) for line in path.read_text().splitlines())


def test_select_k_mallows(series_csv, tmp_path):
    out = tmp_path / "r.txt"
    code = main(["select-k", "--method", "mallows", "--data", str(series_csv), "--y", "y",
                 "--kmax", "auto", "--seed", "7", "--out", str(out)])
    assert code == 0
    kv = read_kv(out)
    assert kv["kmax"] == "6"
    assert 1 <= int(kv["chosen_k"]) <= 6
    assert all(f"criterion[{k}]" in kv for k in range(1, 7))


def test_select_lambda_echoes_auto_alpha(lasso_csv, tmp_path):
    out = tmp_path / "r.csv"
    code = main(["select-lambda", "--rule", "bcch", "--data", str(lasso_csv), "--y", "y",
                 "--x", "x0,x1,x2,x3,x4,x5", "--alpha", "auto", "--out", str(out)])
    assert code == 0
    rows = dict(csv.reader(out.open()))
    assert rows["alpha"] == f"{0.1 / math.log(90):.6g}"
    assert float(rows["lambda"]) > 0


@pytest.mark.parametrize("rule,extra", [
    ("brt", ["--sigma", "1"]), ("bootstrap", []), ("sure", []), ("cv", ["--grid-size", "10"]),
    ("cluster", ["--cluster", "cluster"]), ("quantile", ["--S", "2000"]),
])
def test_every_rule_runs(lasso_csv, tmp_path, rule, extra):
    out = tmp_path / "r.txt"
    args = ["select-lambda", "--rule", rule, "--data", str(lasso_csv), "--y", "y",
            "--out", str(out)] + extra
    if rule != "cluster":
        args += ["--x", "x0,x1,x2,x3,x4,x5"]
    assert main(args) == 0
    assert float(read_kv(out)["lambda"]) > 0


@pytest.mark.parametrize("method", ["stein", "lepski", "validation", "vfold", "loo", "aggregation"])
def test_every_series_method_runs(series_csv, tmp_path, method):
    out = tmp_path / "r.txt"
    assert main(["select-k", "--method", method, "--data", str(series_csv), "--y", "y",
                 "--out", str(out)]) == 0
    assert read_kv(out)["method"] == method


def test_fit_series_and_lasso(series_csv, lasso_csv, tmp_path):
    out = tmp_path / "a.txt"
    assert main(["fit-series", "--data", str(series_csv), "--y", "y", "--k", "3",
                 "--out", str(out)]) == 0
    assert abs(float(read_kv(out)["leverage_sum"]) - 3) < 1e-5
    assert main(["lasso", "--data", str(lasso_csv), "--y", "y", "--x", "x0,x1",
                 "--lambda", "0.1", "--out", str(out)]) == 0
    assert "beta[x0]" in read_kv(out)


def test_byte_identical_and_precision(lasso_csv, tmp_path):
    args = ["select-lambda", "--rule", "bootstrap", "--data", str(lasso_csv), "--y", "y",
            "--x", "x0,x1,x2", "--seed", "4"]
    a, b, c = tmp_path / "a.txt", tmp_path / "b.txt", tmp_path / "c.txt"
    main(args + ["--out", str(a)])
    main(args + ["--out", str(b)])
    main(args + ["--out", str(c), "--full-precision"])
    assert a.read_bytes() == b.read_bytes()
    short, full = read_kv(a)["lambda"], read_kv(c)["lambda"]
    assert len(short.replace(".", "").lstrip("0")) <= 6
    assert f"{float(full):.6g}" == short


def test_simulate_table_and_dataset(tmp_path):
    out = tmp_path / "report.csv"
    args = ["simulate", "--table1", "--reps", "2", "--seed", "1", "--f", "sin2pi", "--n", "60",
            "--B", "500", "--out", str(out)]
    assert main(args) == 0
    first = out.read_bytes()
    assert main(args + ["--jobs", "2"]) == 0
    assert out.read_bytes() == first
    assert out.with_suffix(".txt").exists()
    assert sum(1 for _ in csv.DictReader(out.open())) == 4 * 2 * 4
    d = tmp_path / "d.csv"
    assert main(["simulate", "--f", "expexp", "--n", "30", "--seed", "2", "--out", str(d)]) == 0
    assert len(d.read_text().splitlines()) == 31


def test_exit_codes(lasso_csv, tmp_path, capsys):
    assert main(["select-lambda", "--rule", "nope", "--data", str(lasso_csv), "--y", "y"]) == 2
    assert main([]) == 2
    assert main(["select-lambda", "--rule", "bcch", "--data", str(tmp_path / "x.csv"),
                 "--y", "y"]) == 1
    assert "no such file" in capsys.readouterr().err
    assert main(["select-lambda", "--rule", "brt", "--data", str(lasso_csv), "--y", "y"]) == 1
    assert main(["simulate", "--out", str(tmp_path / "o.csv")]) == 1


def test_module_entry_point(lasso_csv):
    proc = subprocess.run([sys.executable, "-m", "tunesel", "lasso", "--data", str(lasso_csv),
                           "--y", "y", "--x", "x0", "--lambda", "5"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "beta[x0] = 0" in proc.stdout
