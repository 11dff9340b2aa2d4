"""Node-wise multi-response regressions and the bias-corrected pair statistics.

For node j and class t the regression of ``X[t][:, j]`` on the remaining
columns gives coefficients ``C_hat[t]`` of length p - 1, indexed by the
removed-column convention: group l is node ``l`` if ``l < j`` else ``l + 1``.
``coef(a, b)`` below means node a's regression, coefficient on node b.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import MultiNetworkSample, PrecisionSet
from .errors import NumericalError, ValidationError
from .hgsl import (
    HGSLProblem,
    LambdaConfig,
    SolverOptions,
    lambda_simulated,
    lambda_theoretical,
    refit_ols,
    solve_batch,
)


class NodewiseError(NumericalError):
    """One or more node regressions failed; ``failures`` maps node -> message."""

    def __init__(self, failures: dict[int, str]):
        self.failures = dict(sorted(failures.items()))
        lines = [f"node {j}: {msg}" for j, msg in self.failures.items()]
        super().__init__(f"{len(failures)} node fit(s) failed:\n" + "\n".join(lines))


def other_nodes(p: int, j: int) -> np.ndarray:
    """Node labels of the p - 1 groups in node j's regression."""
    return np.delete(np.arange(p), j)


def group_index(j: int, b: int) -> int:
    """Position of node b among node j's predictors."""
    if b == j:
        raise ValidationError("a node is not a predictor of itself")
    return b if b < j else b - 1


@dataclass
class NodewiseFit:
    j: int
    C_hat: np.ndarray
    residuals: tuple[np.ndarray, ...]
    omega_jj: np.ndarray
    lambda_used: float
    C_raw: np.ndarray | None = None
    solver_meta: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.C_hat.shape[0]

    @property
    def p(self) -> int:
        return self.C_hat.shape[1] + 1

    def coef(self, b: int) -> np.ndarray:
        """k-vector of coefficients on node b."""
        return self.C_hat[:, group_index(self.j, b)]

    def coef_full(self) -> np.ndarray:
        """(k, p) coefficients with a zero column at the node itself."""
        return np.insert(self.C_hat, self.j, 0.0, axis=1)


def build_node_problem(sample: MultiNetworkSample, j: int) -> HGSLProblem:
    if not 0 <= j < sample.p:
        raise ValidationError(f"node {j} out of range for p={sample.p}")
    rest = other_nodes(sample.p, j)
    return HGSLProblem(
        y=tuple(x[:, j] for x in sample.X),
        X=tuple(x[:, rest] for x in sample.X),
        groups=tuple(int(v) for v in rest),
    )


def residuals_for(sample: MultiNetworkSample, j: int, C: np.ndarray) -> tuple[np.ndarray, ...]:
    rest = other_nodes(sample.p, j)
    return tuple(x[:, j] - x[:, rest] @ c for x, c in zip(sample.X, C))


def _omega_from(residuals) -> np.ndarray:
    rss = np.array([float(e @ e) for e in residuals])
    if np.any(rss <= 0):
        raise NumericalError("zero residual sum of squares; diagonal estimate undefined")
    return np.array([e.shape[0] for e in residuals]) / rss


def _finish(sample, j, sol, residual_mode: str) -> NodewiseFit:
    problem = build_node_problem(sample, j)
    refit = refit_ols(problem, sol.support)
    sol.refit_beta = refit
    C = refit if residual_mode == "refit" else sol.beta
    res = residuals_for(sample, j, C)
    return NodewiseFit(
        j=j,
        C_hat=C,
        residuals=res,
        omega_jj=_omega_from(res),
        lambda_used=sol.lam,
        C_raw=sol.beta,
        solver_meta={
            "iterations": sol.iterations,
            "converged": sol.converged,
            "support": [int(problem.groups[l]) for l in sol.support],
            "k0": sol.k0,
            "objective": float(sol.objective_trace[-1]),
            "residuals": residual_mode,
        },
    )


def fit_node(
    sample: MultiNetworkSample,
    j: int,
    lam: float,
    opts: SolverOptions = SolverOptions(),
    residual_mode: str = "refit",
) -> NodewiseFit:
    """Fit node j's HGSL regression, then refit OLS on the selected support.

    Residuals and the diagonal estimate use the refit coefficients unless
    ``residual_mode="raw"``; the raw HGSL coefficients are kept in ``C_raw``.
    """
    if residual_mode not in ("refit", "raw"):
        raise ValidationError(f"unknown residual mode {residual_mode!r}")
    (sol,) = solve_batch([build_node_problem(sample, j)], lam, opts)
    if isinstance(sol, Exception):
        raise sol
    return _finish(sample, j, sol, residual_mode)


def resolve_lambda(sample: MultiNetworkSample, rule="sim", config: LambdaConfig = LambdaConfig()) -> float:
    """Penalty level shared by all node problems.

    ``rule`` is ``"sim"``, ``"theory"`` or a positive number used as is.
    """
    if isinstance(rule, (int, float)) and not isinstance(rule, bool):
        if rule <= 0:
            raise ValidationError(f"lambda must be positive, got {rule}")
        return float(rule)
    if rule == "sim":
        return lambda_simulated(sample.n, sample.p, sample.k, config)
    if rule == "theory":
        return lambda_theoretical(sample.n0, sample.p, sample.k, config)
    raise ValidationError(f"unknown lambda rule {rule!r}")


def fit_all_nodes(
    sample: MultiNetworkSample,
    lambda_rule="sim",
    opts: SolverOptions = SolverOptions(),
    lambda_config: LambdaConfig = LambdaConfig(),
    residual_mode: str = "refit",
) -> list[NodewiseFit]:
    """Fit every node with one shared penalty level.

    The p programs are solved as one vectorized batch; each is iterated
    independently so results do not depend on node order.
    """
    if residual_mode not in ("refit", "raw"):
        raise ValidationError(f"unknown residual mode {residual_mode!r}")
    lam = resolve_lambda(sample, lambda_rule, lambda_config)
    problems = [build_node_problem(sample, j) for j in range(sample.p)]
    sols = solve_batch(problems, lam, opts)
    fits, failures = [], {}
    for j, sol in enumerate(sols):
        if isinstance(sol, Exception):
            failures[j] = str(sol)
            continue
        try:
            fits.append(_finish(sample, j, sol, residual_mode))
        except NumericalError as exc:
            failures[j] = str(exc)
    if failures:
        raise NodewiseError(failures)
    return fits


def oracle_fits(sample: MultiNetworkSample, truth: PrecisionSet) -> list[NodewiseFit]:
    """Fits built from the true regression coefficients ``-Omega[-j, j] / omega_jj``."""
    fits = []
    for j in range(sample.p):
        rest = other_nodes(sample.p, j)
        C = np.stack([-m[rest, j] / m[j, j] for m in truth.Omega])
        res = residuals_for(sample, j, C)
        fits.append(NodewiseFit(j, C, res, _omega_from(res), float("nan"), C.copy(), {"oracle": True}))
    return fits


@dataclass(frozen=True)
class PairStatistics:
    a: int
    b: int
    T: np.ndarray
    J: np.ndarray | None = None


def _check_fits(fits: Sequence[NodewiseFit], *nodes: int):
    for v in nodes:
        if v >= len(fits) or fits[v] is None or fits[v].j != v:
            raise ValidationError(f"no fit available for node {v}")


def pair_statistic(fits: Sequence[NodewiseFit], a: int, b: int, truth: PrecisionSet | None = None) -> PairStatistics:
    """Bias-corrected residual cross-moment for pair (a, b), one value per class.

    ``T_t = [sum E_a E_b + sum E_a^2 * coef(b, a) + sum E_b^2 * coef(a, b)] / n_t``.
    Evaluated in canonical order so swapping a and b gives identical values.
    """
    if a == b:
        raise ValidationError("pair statistic needs two distinct nodes")
    _check_fits(fits, a, b)
    lo, hi = min(a, b), max(a, b)
    f_lo, f_hi = fits[lo], fits[hi]
    c_hi_lo, c_lo_hi = f_hi.coef(lo), f_lo.coef(hi)
    T = np.empty(f_lo.k)
    for t, (e_lo, e_hi) in enumerate(zip(f_lo.residuals, f_hi.residuals)):
        T[t] = (e_lo @ e_hi + (e_lo @ e_lo) * c_hi_lo[t] + (e_hi @ e_hi) * c_lo_hi[t]) / e_lo.shape[0]
    J = None if truth is None else j_statistic(truth, fits, a, b)
    return PairStatistics(a, b, T, J)


def j_statistic(truth: PrecisionSet, fits: Sequence[NodewiseFit], a: int, b: int) -> np.ndarray:
    """Population counterpart of T given the estimated diagonals (diagnostic only)."""
    _check_fits(fits, a, b)
    W = truth.stack()
    w_aa, w_bb, w_ab = W[:, a, a], W[:, b, b], W[:, a, b]
    bracket = 1.0 - w_aa / fits[a].omega_jj - w_bb / fits[b].omega_jj
    return bracket * w_ab / (w_aa * w_bb)


@dataclass(frozen=True)
class PairTable:
    """All-pairs statistics: ``T`` (k, p, p), ``omega`` (k, p) and class sizes ``n``."""

    T: np.ndarray
    omega: np.ndarray
    n: np.ndarray

    @property
    def k(self) -> int:
        return self.T.shape[0]

    @property
    def p(self) -> int:
        return self.T.shape[1]

    @classmethod
    def from_fits(cls, fits: Sequence[NodewiseFit]) -> PairTable:
        p, k = len(fits), fits[0].k
        _check_fits(fits, *range(p))
        T = np.empty((k, p, p))
        omega = np.stack([f.omega_jj for f in fits], axis=1)
        n = np.array([e.shape[0] for e in fits[0].residuals])
        for t in range(k):
            E = np.stack([f.residuals[t] for f in fits], axis=1)
            S = E.T @ E
            S = 0.5 * (S + S.T)
            C = np.stack([f.coef_full()[t] for f in fits])
            # u[a, b] = sum E_b^2 * coef(a, b); u + u.T is exactly symmetric
            u = C * np.diag(S)[None, :]
            T[t] = (S + (u + u.T)) / n[t]
        return cls(T, omega, n)


def as_pair_table(fits) -> PairTable:
    return fits if isinstance(fits, PairTable) else PairTable.from_fits(fits)


def fits_to_json(fits: Sequence[NodewiseFit], extra: dict | None = None) -> dict:
    """Checkpoint format: sparse coefficients, full residuals with summaries, diagonals."""
    nodes = []
    for f in fits:
        coefs = []
        for C in (f.C_hat, f.C_raw if f.C_raw is not None else f.C_hat):
            per_class = []
            for row in C:
                nz = np.flatnonzero(row)
                per_class.append({"index": nz.tolist(), "value": row[nz].tolist()})
            coefs.append(per_class)
        nodes.append(
            {
                "j": f.j,
                "lambda": f.lambda_used,
                "omega_jj": f.omega_jj.tolist(),
                "coef": coefs[0],
                "coef_raw": coefs[1],
                "residuals": [e.tolist() for e in f.residuals],
                "residual_summary": [
                    {"n": int(e.shape[0]), "rss": float(e @ e), "mean": float(e.mean()), "sd": float(e.std())}
                    for e in f.residuals
                ],
                "solver": f.solver_meta,
            }
        )
    k = fits[0].k if fits else 0
    out = {"format": "jointggm.fits/1", "k": k, "p": len(fits), "nodes": nodes}
    if extra:
        out.update(extra)
    return out


def fits_from_json(obj: dict) -> list[NodewiseFit]:
    p, k = int(obj["p"]), int(obj["k"])
    fits = []
    for node in obj["nodes"]:
        mats = []
        for key in ("coef", "coef_raw"):
            C = np.zeros((k, p - 1))
            for t, sp in enumerate(node[key]):
                C[t, sp["index"]] = sp["value"]
            mats.append(C)
        fits.append(
            NodewiseFit(
                j=int(node["j"]),
                C_hat=mats[0],
                residuals=tuple(np.asarray(e, dtype=float) for e in node["residuals"]),
                omega_jj=np.asarray(node["omega_jj"], dtype=float),
                lambda_used=float(node["lambda"]),
                C_raw=mats[1],
                solver_meta=node.get("solver", {}),
            )
        )
    fits.sort(key=lambda f: f.j)
    return fits
