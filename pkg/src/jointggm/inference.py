"""Edge tests, support recovery and the two-step precision estimator.

Two statistics aggregate the per-class bias-corrected statistics ``T_t`` of
a pair (a, b):

* chi-based: ``U**2 = sum_t n_t w_aa w_bb T_t**2``, compared with a chi(k)
  quantile;
* linear-functional: ``V = sum_t s_t sqrt(n_t w_aa w_bb) T_t`` for a sign
  vector ``s``, compared after division by ``sqrt(k)`` with a normal quantile.

Functions taking ``fits`` accept either a list of
:class:`~jointggm.nodewise.NodewiseFit` or a precomputed
:class:`~jointggm.nodewise.PairTable`.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .data import EdgeSet, MultiNetworkSample, PrecisionSet
from .errors import ValidationError
from .nodewise import as_pair_table
from .quantiles import chi_isf, chi_quantile, normal_quantile

log = logging.getLogger(__name__)

KINDS = ("chi", "linfun")


@dataclass(frozen=True)
class TestConfig:
    alpha: float = 0.05
    kind: str = "chi"
    sign_vector: tuple[int, ...] | None = None
    sided: str = "one"
    rho: float = 1.0

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.kind not in KINDS:
            raise ValidationError(f"unknown test kind {self.kind!r}")
        if self.sided not in ("one", "two"):
            raise ValidationError(f"sided must be 'one' or 'two', got {self.sided!r}")
        if self.sign_vector is not None:
            signs = tuple(int(s) for s in self.sign_vector)
            if any(s not in (-1, 1) for s in signs):
                raise ValidationError("sign vector entries must be +1 or -1")
            object.__setattr__(self, "sign_vector", signs)
        if self.rho <= 0:
            raise ValidationError(f"rho must be positive, got {self.rho}")

    def signs(self, k: int) -> np.ndarray:
        if self.sign_vector is None:
            return np.ones(k)
        if len(self.sign_vector) != k:
            raise ValidationError(f"sign vector has length {len(self.sign_vector)}, expected k={k}")
        return np.asarray(self.sign_vector, dtype=float)


@dataclass(frozen=True)
class TestResult:
    a: int
    b: int
    statistic: float
    critical: float
    reject: bool
    kind: str
    config: TestConfig = field(repr=False, default=TestConfig())

    __test__ = False


def u_matrix(fits) -> np.ndarray:
    """(p, p) chi-based statistics; the diagonal is meaningless and set to 0."""
    tab = as_pair_table(fits)
    w = tab.omega
    weight = tab.n[:, None, None] * w[:, :, None] * w[:, None, :]
    U = np.sqrt(np.sum(weight * tab.T**2, axis=0))
    np.fill_diagonal(U, 0.0)
    return U


def v_matrix(fits, sign_vector=None) -> np.ndarray:
    tab = as_pair_table(fits)
    s = np.ones(tab.k) if sign_vector is None else np.asarray(sign_vector, dtype=float)
    if s.shape != (tab.k,):
        raise ValidationError(f"sign vector must have length k={tab.k}")
    w = tab.omega
    scale = np.sqrt(tab.n[:, None, None] * w[:, :, None] * w[:, None, :])
    V = np.einsum("t,tab->ab", s, scale * tab.T)
    np.fill_diagonal(V, 0.0)
    return V


def u_statistic(fits, a: int, b: int) -> float:
    tab = as_pair_table(fits)
    terms = tab.n * tab.omega[:, a] * tab.omega[:, b] * tab.T[:, a, b] ** 2
    return math.sqrt(float(np.sum(terms)))


def v_statistic(fits, a: int, b: int, sign_vector=None) -> float:
    tab = as_pair_table(fits)
    s = np.ones(tab.k) if sign_vector is None else np.asarray(sign_vector, dtype=float)
    if s.shape != (tab.k,):
        raise ValidationError(f"sign vector must have length k={tab.k}")
    return float(np.sum(s * np.sqrt(tab.n * tab.omega[:, a] * tab.omega[:, b]) * tab.T[:, a, b]))


def critical_value(k: int, config: TestConfig) -> float:
    """Threshold for the test statistic (V is divided by sqrt(k) first)."""
    if config.kind == "chi":
        return chi_quantile(k, 1.0 - config.alpha)
    if config.sided == "one":
        return normal_quantile(config.alpha)
    return normal_quantile(1.0 - config.alpha / 2.0)


def _decide(stat, k: int, config: TestConfig, critical: float):
    if config.kind == "chi":
        return stat > critical
    z = stat / math.sqrt(k)
    if config.sided == "one":
        return z < critical
    return np.abs(z) > critical


def statistic_matrix(fits, config: TestConfig) -> np.ndarray:
    tab = as_pair_table(fits)
    if config.kind == "chi":
        return u_matrix(tab)
    return v_matrix(tab, config.signs(tab.k))


def reject_matrix(fits, config: TestConfig) -> np.ndarray:
    tab = as_pair_table(fits)
    crit = critical_value(tab.k, config)
    rej = np.asarray(_decide(statistic_matrix(tab, config), tab.k, config, crit))
    np.fill_diagonal(rej, False)
    return rej


def run_test(fits, a: int, b: int, config: TestConfig = TestConfig()) -> TestResult:
    tab = as_pair_table(fits)
    if a == b:
        raise ValidationError("a test needs two distinct nodes")
    if config.kind == "chi":
        stat = u_statistic(tab, a, b)
    else:
        stat = v_statistic(tab, a, b, config.signs(tab.k))
    crit = critical_value(tab.k, config)
    return TestResult(a, b, stat, crit, bool(_decide(stat, tab.k, config, crit)), config.kind, config)


def test_all_pairs(fits, config: TestConfig = TestConfig()) -> list[TestResult]:
    """Every unordered pair ``a < b`` in row-major order."""
    tab = as_pair_table(fits)
    stats = statistic_matrix(tab, config)
    crit = critical_value(tab.k, config)
    rej = _decide(stats, tab.k, config, crit)
    a_idx, b_idx = np.triu_indices(tab.p, k=1)
    return [
        TestResult(int(a), int(b), float(stats[a, b]), crit, bool(rej[a, b]), config.kind, config)
        for a, b in zip(a_idx, b_idx)
    ]


test_all_pairs.__test__ = False


def write_results_csv(results: Sequence[TestResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["a", "b", "statistic", "critical", "reject"])
        for r in results:
            w.writerow([r.a, r.b, repr(r.statistic), repr(r.critical), int(r.reject)])


def results_to_json(results: Sequence[TestResult]) -> dict:
    cfg = asdict(results[0].config) if results else None
    return {
        "config": cfg,
        "results": [
            {"a": r.a, "b": r.b, "statistic": r.statistic, "critical": r.critical, "reject": r.reject}
            for r in results
        ],
    }


def support_recover(fits, rho: float = 1.0) -> EdgeSet:
    """Pairs whose chi-based statistic clears the level ``p**(-2 - rho)`` quantile."""
    if rho <= 0:
        raise ValidationError(f"rho must be positive, got {rho}")
    tab = as_pair_table(fits)
    crit = chi_isf(tab.k, float(tab.p) ** (-2.0 - rho))
    return EdgeSet.from_adjacency(u_matrix(tab) > crit)


def estimate_precision(fits, alpha: float, kind: str = "linfun", sign_vector=None, sided: str = "one") -> PrecisionSet:
    """Two-step estimate: diagonal ``w_aa``; ``-w_aa w_bb T_ab`` on rejected pairs.

    The result is symmetric but not necessarily positive definite.
    """
    tab = as_pair_table(fits)
    config = TestConfig(alpha=alpha, kind=kind, sign_vector=sign_vector, sided=sided)
    rej = reject_matrix(tab, config)
    w = tab.omega
    off = -(w[:, :, None] * w[:, None, :]) * tab.T * rej[None]
    mats = []
    for t in range(tab.k):
        m = off[t].copy()
        np.fill_diagonal(m, w[t])
        mats.append(m)
    return PrecisionSet(tuple(mats))


def sample_covariances(sample: MultiNetworkSample) -> list[np.ndarray]:
    """Mean-zero second-moment matrices ``X'X / n`` per class."""
    return [x.T @ x / x.shape[0] for x in sample.X]


def validation_loss(est: PrecisionSet, val_sample: MultiNetworkSample, covariances=None) -> float:
    """``sum_t log det(W_t) - tr(S_t W_t)``; larger is better, ``-inf`` if some W_t is not PD."""
    if est.p != val_sample.p or est.k != val_sample.k:
        raise ValidationError("estimate and validation sample dimensions differ")
    covs = sample_covariances(val_sample) if covariances is None else covariances
    total = 0.0
    for W, S in zip(est.Omega, covs):
        try:
            L = np.linalg.cholesky(W)
        except np.linalg.LinAlgError:
            return -math.inf
        total += 2.0 * float(np.sum(np.log(np.diag(L)))) - float(np.sum(S * W))
    return total


def indefiniteness(est: PrecisionSet) -> float:
    """How far the set is from PD: summed negative parts of smallest eigenvalues."""
    return float(sum(max(0.0, -np.linalg.eigvalsh(W)[0]) for W in est.Omega))


@dataclass
class TuneResult:
    alpha: float
    estimate: PrecisionSet
    table: list[dict]
    warning: bool = False


def tune_alpha(train, validation: MultiNetworkSample, grid: Sequence[float], kind: str = "linfun",
               sign_vector=None, sided: str = "one", fit_kwargs: dict | None = None) -> TuneResult:
    """Pick the significance level whose estimate scores best on ``validation``.

    ``train`` is a sample (fitted here) or already-computed fits. Ties go to
    the smaller alpha. If no candidate is positive definite the least
    indefinite one is returned with ``warning=True``.
    """
    grid = sorted(float(a) for a in grid)
    if not grid:
        raise ValidationError("alpha grid is empty")
    if isinstance(train, MultiNetworkSample):
        from .nodewise import fit_all_nodes

        train = fit_all_nodes(train, **(fit_kwargs or {}))
    tab = as_pair_table(train)
    covs = sample_covariances(validation)
    table, best, best_score, ests = [], None, -math.inf, {}
    for a in grid:
        est = estimate_precision(tab, a, kind, sign_vector, sided)
        score = validation_loss(est, validation, covs)
        ests[a] = est
        table.append({"alpha": a, "score": score, "pd": math.isfinite(score)})
        if score > best_score:
            best, best_score = a, score
    if best is not None:
        return TuneResult(best, ests[best], table)
    pens = [indefiniteness(ests[a]) for a in grid]
    for row, pen in zip(table, pens):
        row["indefiniteness"] = pen
    best = grid[int(np.argmin(pens))]
    log.warning("no alpha in the grid gave a positive definite estimate; using alpha=%g", best)
    return TuneResult(best, ests[best], table, warning=True)
