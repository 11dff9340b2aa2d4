import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from jointggm import __version__
from jointggm.cli import main, parse_signs
from jointggm.data import EdgeSet, PrecisionSet, read_json
from jointggm.errors import ValidationError
from jointggm.nodewise import fits_from_json

LAM = ["--lambda-reps", "2000"]


def _simulate(out, *extra):
    args = ["simulate", "--k", "2", "--p", "16", "--n", "60", "--seed", "7", "--out", str(out), *extra]
    assert main(args) == 0
    return [str(out / "class_0.csv"), str(out / "class_1.csv")]


def _listed(manifest_path):
    return set(read_json(manifest_path)["outputs"])


def test_simulate_artifacts_and_determinism(tmp_path):
    _simulate(tmp_path / "a")
    _simulate(tmp_path / "b")
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == ["class_0.csv", "class_1.csv", "edges.json", "manifest.json", "truth.json"]
    for name in names:
        if name != "manifest.json":
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    man = read_json(tmp_path / "a" / "manifest.json")
    assert man["command"] == "simulate" and man["seed"] == 7 and man["version"] == __version__
    assert _listed(tmp_path / "a" / "manifest.json") == {str(tmp_path / "a" / n) for n in names}
    truth = PrecisionSet.from_json(read_json(tmp_path / "a" / "truth.json"))
    assert truth.k == 2 and truth.p == 16
    assert len(EdgeSet.from_json(read_json(tmp_path / "a" / "edges.json"))) == 2 * 28


def test_simulate_model2_laplace(tmp_path):
    assert main(["simulate", "--model", "II", "--noise", "laplace", "--k", "5", "--p", "48", "--n", "100",
                 "--seed", "7", "--out", str(tmp_path)]) == 0
    assert read_json(tmp_path / "manifest.json")["config"]["noise"] == "laplace"
    assert len(list(tmp_path.glob("class_*.csv"))) == 5


def test_pipeline(tmp_path):
    paths = _simulate(tmp_path / "sim")
    fits_path = tmp_path / "fits.json"
    assert main(["fit", *paths, *LAM, "--out", str(fits_path)]) == 0
    obj = read_json(fits_path)
    assert obj["p"] == 16 and obj["k"] == 2 and obj["lambda"] > 0 and obj["not_converged"] == []
    assert str(fits_path) in _listed(tmp_path / "fits.manifest.json")

    assert main(["test", "--fits", str(fits_path), "--out", str(tmp_path / "t")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "t" / "results.csv")))
    assert len(rows) == 16 * 15 // 2 and set(rows[0]) == {"a", "b", "statistic", "critical", "reject"}

    assert main(["test", "--fits", str(fits_path), "--kind", "linfun", "--signs", "++", "--recover",
                 "--rho", "1", "--out", str(tmp_path / "t2")]) == 0
    EdgeSet.from_json(read_json(tmp_path / "t2" / "edges.json"))
    assert _listed(tmp_path / "t2" / "manifest.json") == {
        str(p) for p in (tmp_path / "t2").iterdir()
    }

    est_path = tmp_path / "est.json"
    assert main(["estimate", "--fits", str(fits_path), "--alpha", "0.05", "--out", str(est_path)]) == 0
    assert PrecisionSet.from_json(read_json(est_path)).p == 16

    val = _simulate(tmp_path / "val", "--seed", "8")
    assert main(["tune-alpha", "--fits", str(fits_path), "--validation", *val, "--grid", "0.01", "0.1",
                 "--out", str(tmp_path / "tune")]) == 0
    assert read_json(tmp_path / "tune" / "tuning.json")["alpha"] in (0.01, 0.1)

    assert main(["evaluate", "--truth", str(tmp_path / "sim" / "truth.json"), "--estimate", str(est_path),
                 "--fits", str(fits_path), "--out", str(tmp_path / "ev")]) == 0
    metrics = {r["metric"]: float(r["value"]) for r in csv.DictReader(open(tmp_path / "ev" / "metrics.csv"))}
    assert {"l1", "l2", "lF", "l2_mean", "fpr_theoretical", "fnr_empirical", "roc_area"} <= set(metrics)
    assert 0 <= metrics["roc_area"] <= 1


def test_fit_lambda_override_and_k1(tmp_path):
    rng = np.random.default_rng(0)
    path = tmp_path / "x.csv"
    np.savetxt(path, rng.standard_normal((30, 4)), delimiter=",", header="a,b,c,d", comments="")
    out = tmp_path / "fits.json"
    assert main(["fit", str(path), "--lambda", "0.37", "--out", str(out)]) == 0
    obj = read_json(out)
    assert obj["lambda"] == 0.37 and obj["k"] == 1
    assert all(f.lambda_used == 0.37 for f in fits_from_json(obj))
    assert obj["node_names"] == ["a", "b", "c", "d"]


def test_exit_codes(tmp_path, capsys):
    assert main(["simulate", "--p", "50", "--out", str(tmp_path / "s")]) == 2
    assert "multiple" in capsys.readouterr().err
    assert main(["fit", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "f.json")]) == 2
    # a duplicated column makes the node regressions interpolate
    x = np.random.default_rng(1).standard_normal((6, 3))
    x[:, 1] = x[:, 0]
    path = tmp_path / "dup.csv"
    np.savetxt(path, x, delimiter=",", header="a,b,c", comments="")
    code = main(["fit", str(path), "--lambda", "1e-3", "--tol", "0", "--max-iter", "50000",
                 "--out", str(tmp_path / "f.json")])
    assert code == 3
    assert "node 0" in capsys.readouterr().err


def test_parse_signs():
    assert parse_signs("++-") == (1, 1, -1)
    assert parse_signs("+,+,-", 3) == (1, 1, -1)
    assert parse_signs("1,-1") == (1, -1)
    assert parse_signs(None) is None
    with pytest.raises(ValidationError):
        parse_signs("+x")
    with pytest.raises(ValidationError):
        parse_signs("++", 3)


def test_replicate_single_rep_and_determinism(tmp_path):
    args = ["replicate", "--table", "1", "--setting", "1", "--p", "16", "--reps", "1", "--seed", "3", *LAM]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    for name in ("table1.csv", "table1_reps.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = list(csv.DictReader(open(tmp_path / "a" / "table1.csv")))
    assert list(rows[0])[:6] == ["model", "setting", "method", "metric", "mean", "se"]
    assert {r["method"] for r in rows} == {"THP-phi1", "THP-phi2"}
    assert {r["metric"] for r in rows} == {"fpr_theoretical", "fnr_theoretical", "fnr_empirical", "roc_area"}
    assert all(math.isnan(float(r["se"])) for r in rows)
    assert _listed(tmp_path / "a" / "manifest.json") == {str(p) for p in (tmp_path / "a").iterdir()}


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "jointggm", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip() == __version__
