import math

import numpy as np
import pytest

from jointggm.hgsl import LambdaConfig
from jointggm.replicate import (
    METHODS,
    flatten_records,
    replicate,
    run_replication,
    run_spec,
    summarize,
)

FAST = LambdaConfig(reps=2000)


def test_run_spec_tables():
    s = run_spec(2, 1)
    assert (s.model, s.k, s.p, s.n, s.task) == ("II", 5, 48, 200, "test")
    s = run_spec(3, 3, noise="laplace")
    assert (s.model, s.k, s.p, s.n, s.task, s.noise) == ("I", 10, 200, 100, "estimate", "laplace")


def test_replication_is_deterministic():
    spec = run_spec(1, 1, p=16, lambda_config=FAST)
    a = run_replication(spec, seed=5, rep=2)
    b = run_replication(spec, seed=5, rep=2)
    assert a == b
    c = run_replication(spec, seed=5, rep=3)
    assert c != a


def test_estimation_record():
    spec = run_spec(3, 1, p=16, k=2, lambda_config=FAST, alpha_grid=(0.01, 0.1))
    rec = run_replication(spec, 0, 0)
    for method in METHODS:
        assert rec[method]["alpha"] in (0.01, 0.1)
        assert rec[method]["l2_mean"] == pytest.approx(rec[method]["l2"] / 2)


def test_failed_replication_is_isolated(monkeypatch):
    import jointggm.replicate as rp

    real = rp.run_replication

    def flaky(spec, seed, rep, lam=None, opts=None):
        if rep == 1:
            raise FloatingPointError("boom")
        return real(spec, seed, rep, lam)

    monkeypatch.setattr(rp, "run_replication", flaky)
    spec = run_spec(1, 1, p=16, k=2, lambda_config=FAST)
    recs = replicate(spec, reps=3, seed=0)
    assert [r["rep"] for r in recs] == [0, 1, 2]
    assert "error" in recs[1] and "error" not in recs[0] and "error" not in recs[2]
    rows = flatten_records(spec, recs)
    err = [r for r in rows if r["metric"] == "error"]
    assert len(err) == 1 and err[0]["rep"] == 1 and "FloatingPointError: boom" in err[0]["note"]
    assert all(r["reps"] == 2 for r in summarize(spec, recs))


def test_setting_level_config_error_propagates():
    from jointggm.errors import ValidationError

    spec = run_spec(1, 1, p=16, k=2, n=10, lambda_rule="theory", lambda_config=FAST)
    with pytest.raises(ValidationError, match="tau"):
        replicate(spec, reps=1)


def test_summary_means(tmp_path):
    spec = run_spec(1, 1, p=16, k=2, lambda_config=FAST)
    recs = replicate(spec, reps=3, seed=1)
    rows = summarize(spec, recs)
    roc = [r for r in rows if r["method"] == "THP-phi2" and r["metric"] == "roc_area"][0]
    vals = [r["THP-phi2"]["roc_area"] for r in recs]
    assert roc["mean"] == pytest.approx(np.mean(vals))
    assert roc["se"] == pytest.approx(np.std(vals, ddof=1) / math.sqrt(3))
    assert roc["reps"] == 3
