import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from jointggm.data import EdgeSet, PrecisionSet
from jointggm.errors import ValidationError
from jointggm.evalkit import (
    PairScorePanel,
    empirical_critical,
    fpr_fnr,
    matrix_losses,
    mean_se,
    roc_area,
    roc_curve,
)


def _panel(null, edge):
    s = np.r_[np.asarray(null, float), np.asarray(edge, float)]
    return PairScorePanel(s, np.r_[np.zeros(len(null), bool), np.ones(len(edge), bool)], k=1, p=2)


def _mann_whitney(panel):
    pos, neg = panel.edge_scores, panel.null_scores
    return sum((x > y) + 0.5 * (x == y) for x in pos for y in neg) / (len(pos) * len(neg))


def test_empirical_critical_examples():
    assert empirical_critical(_panel(np.arange(1, 101), [1.0]), 0.05) == 95
    assert empirical_critical(_panel(np.arange(1, 100), [1.0]), 0.5) == 50
    with pytest.raises(ValidationError):
        empirical_critical(_panel([], [1.0]), 0.05)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(5, 300), st.floats(0.01, 0.5))
def test_empirical_fpr_close_to_alpha(seed, m, alpha):
    r = np.random.default_rng(seed)
    panel = _panel(r.standard_normal(m), r.standard_normal(3) + 2)
    fpr = fpr_fnr(panel, empirical_critical(panel, alpha))["fpr"]
    assert abs(fpr - alpha) <= 1.0 / m + 1e-12


def test_fpr_fnr_examples():
    assert fpr_fnr(_panel([0, 0], [0, 0, 0]), 1.0) == {"fpr": 0.0, "fnr": 1.0}
    assert fpr_fnr(_panel([1, 2], [3, 4]), 0.5) == {"fpr": 1.0, "fnr": 0.0}


def test_roc_examples(rng):
    assert roc_area(_panel([0, 1, 2], [3, 4])) == 1.0
    assert roc_area(_panel([1.0] * 4, [1.0] * 3)) == 0.5
    with pytest.raises(ValidationError):
        roc_area(_panel([1, 2], []))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_roc_area_oracles(seed):
    r = np.random.default_rng(seed)
    # rounding creates ties
    panel = _panel(np.round(r.standard_normal(int(r.integers(1, 30))), 1),
                   np.round(r.standard_normal(int(r.integers(1, 30))) + 0.5, 1))
    auc = roc_area(panel)
    assert auc == pytest.approx(_mann_whitney(panel), abs=1e-12)
    fpr, tpr = roc_curve(panel)
    assert auc == pytest.approx(trapezoid(tpr, fpr), abs=1e-12)
    assert fpr[0] == tpr[0] == 0 and fpr[-1] == tpr[-1] == 1
    # invariant to strictly increasing transforms
    moved = PairScorePanel(np.exp(3 * panel.scores) - 7, panel.labels, 1, 2)
    assert roc_area(moved) == pytest.approx(auc, abs=1e-12)


def test_from_matrix_orientation():
    stat = np.array([[0.0, -4.0, 1.0], [-4.0, 0.0, 2.0], [1.0, 2.0, 0.0]])
    truth = EdgeSet(3, {(0, 1)})
    one = PairScorePanel.from_matrix(stat, truth, k=4, kind="linfun")
    assert list(one.scores) == [2.0, -0.5, -1.0] and list(one.labels) == [True, False, False]
    two = PairScorePanel.from_matrix(stat, truth, k=4, kind="linfun", sided="two")
    assert list(two.scores) == [2.0, 0.5, 1.0]
    chi = PairScorePanel.from_matrix(np.abs(stat), truth, k=4)
    assert list(chi.scores) == [4.0, 1.0, 2.0]


def test_losses_zero_and_diagonal():
    W = PrecisionSet((np.eye(5), 2 * np.eye(5)))
    assert all(matrix_losses(W, W)[key] == 0 for key in ("l1", "l2", "lF"))
    p = 6
    one = matrix_losses(PrecisionSet((4 * np.eye(p),)), PrecisionSet((np.eye(p),)))
    assert one["l1"] == pytest.approx(3.0)
    assert one["l2"] == pytest.approx(3.0)
    assert one["lF"] == pytest.approx(3 * math.sqrt(p))
    with pytest.raises(ValidationError):
        matrix_losses(PrecisionSet((np.eye(2),)), PrecisionSet((np.eye(3),)))


def test_losses_sum_and_mean(rng):
    A = [rng.standard_normal((4, 4)) for _ in range(3)]
    est = PrecisionSet(tuple(a + a.T for a in A))
    truth = PrecisionSet((np.eye(4),) * 3)
    out = matrix_losses(est, truth)
    for key in ("l1", "l2", "lF"):
        assert out[key] == pytest.approx(sum(out["per_graph"][key]))
        assert out[f"{key}_mean"] == pytest.approx(out[key] / 3)


def test_spectral_loss_eigen_oracle(rng):
    A = rng.standard_normal((3, 3))
    E = A + A.T
    out = matrix_losses(PrecisionSet((E + np.eye(3),)), PrecisionSet((np.eye(3),)))
    assert out["l2"] == pytest.approx(math.sqrt(np.linalg.eigvalsh(E.T @ E).max()), abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_norm_inequalities(seed, p):
    A = np.random.default_rng(seed).standard_normal((p, p))
    out = matrix_losses(PrecisionSet((A + A.T,)), PrecisionSet((np.zeros((p, p)),)))
    eps = 1e-10
    assert out["l2"] <= out["lF"] + eps
    assert out["lF"] <= math.sqrt(p) * out["l2"] + eps
    assert out["l2"] <= out["l1"] + eps


def test_mean_se():
    m, se = mean_se([1.0, 2.0, 3.0])
    assert m == 2.0 and se == pytest.approx(1 / math.sqrt(3))
    m, se = mean_se([4.0])
    assert m == 4.0 and math.isnan(se)
