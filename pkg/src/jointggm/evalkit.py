"""Edge-detection metrics and matrix-norm estimation losses."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .data import EdgeSet, PrecisionSet
from .errors import ValidationError


@dataclass(frozen=True)
class PairScorePanel:
    """One score per unordered pair with its truth label.

    Scores are oriented so that larger means stronger evidence of an edge:
    U for the chi test, ``-V / sqrt(k)`` for the one-sided linear test and
    ``|V| / sqrt(k)`` for the two-sided one.
    """

    scores: np.ndarray
    labels: np.ndarray
    k: int
    p: int
    kind: str = "chi"

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=float)
        l = np.asarray(self.labels, dtype=bool)
        if s.shape != l.shape or s.ndim != 1:
            raise ValidationError("scores and labels must be matching 1-D arrays")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "labels", l)

    @property
    def null_scores(self) -> np.ndarray:
        return self.scores[~self.labels]

    @property
    def edge_scores(self) -> np.ndarray:
        return self.scores[self.labels]

    @classmethod
    def from_matrix(cls, stat: np.ndarray, truth: EdgeSet, k: int, kind: str = "chi", sided: str = "one"):
        """Build from a (p, p) statistic matrix (U, or raw V for ``kind='linfun'``)."""
        p = stat.shape[0]
        a, b = np.triu_indices(p, k=1)
        s = stat[a, b]
        if kind == "linfun":
            s = -s / math.sqrt(k) if sided == "one" else np.abs(s) / math.sqrt(k)
        labels = truth.adjacency()[a, b]
        return cls(s, labels, k, p, kind)


def empirical_critical(panel: PairScorePanel, alpha: float) -> float:
    """Nearest-rank ``1 - alpha`` quantile of the null-pair scores."""
    null = np.sort(panel.null_scores)
    if null.size == 0:
        raise ValidationError("panel has no null pairs")
    if not 0 < alpha < 1:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    rank = min(max(math.ceil((1.0 - alpha) * null.size - 1e-9), 1), null.size)
    return float(null[rank - 1])


def fpr_fnr(panel: PairScorePanel, critical: float) -> dict:
    """Rates of null pairs scoring above ``critical`` and edges scoring at or below it."""
    null, edge = panel.null_scores, panel.edge_scores
    return {
        "fpr": float(np.mean(null > critical)) if null.size else math.nan,
        "fnr": float(np.mean(edge <= critical)) if edge.size else math.nan,
    }


def roc_area(panel: PairScorePanel) -> float:
    """Mann-Whitney estimate of P(edge score > null score), ties counting 1/2."""
    n_pos, n_neg = int(panel.labels.sum()), int((~panel.labels).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("ROC area needs both edge and null pairs")
    ranks = rankdata(panel.scores)
    u = ranks[panel.labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(panel: PairScorePanel) -> tuple[np.ndarray, np.ndarray]:
    """Exact empirical ROC: (fpr, tpr) at every distinct score, from (0, 0) to (1, 1)."""
    order = np.argsort(-panel.scores, kind="mergesort")
    s, l = panel.scores[order], panel.labels[order]
    tp, fp = np.cumsum(l), np.cumsum(~l)
    last = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tpr = np.r_[0.0, tp[last] / max(l.sum(), 1)]
    fpr = np.r_[0.0, fp[last] / max((~l).sum(), 1)]
    return fpr, tpr


def matrix_losses(est: PrecisionSet, truth: PrecisionSet) -> dict:
    """Matrix 1-norm, spectral norm and Frobenius norm of the estimation error.

    ``l1``, ``l2``, ``lF`` are summed over the k graphs; ``*_mean`` are the
    per-graph averages and ``per_graph`` the individual values.
    """
    if est.k != truth.k or est.p != truth.p:
        raise ValidationError(f"dimension mismatch: ({est.k}, {est.p}) vs ({truth.k}, {truth.p})")
    per = {"l1": [], "l2": [], "lF": []}
    for E in (a - b for a, b in zip(est.Omega, truth.Omega)):
        per["l1"].append(float(np.abs(E).sum(axis=0).max()))
        per["l2"].append(float(np.linalg.norm(E, 2)))
        per["lF"].append(float(np.linalg.norm(E, "fro")))
    out = {key: float(np.sum(v)) for key, v in per.items()}
    out.update({f"{key}_mean": float(np.mean(v)) for key, v in per.items()})
    out["per_graph"] = per
    return out


def mean_se(values) -> tuple[float, float]:
    """Mean and standard error; the SE is NaN for fewer than two values."""
    v = np.asarray([x for x in values if not math.isnan(x)], dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan
    return float(v.mean()), se
