"""Heterogeneous group square-root Lasso (HGSL) for one multi-response regression.

The program solved for k classes sharing G candidate predictors is::

    min_beta  sum_t ||y_t - X_t beta_t|| / sqrt(n0)
              + lam * sum_l ||diag(d_l)^{1/2} beta_(l)||

where ``beta_(l)`` collects coefficient l across the k classes and ``d_l``
holds the per-class mean squares of column l. Coefficients are stored as a
``(k, G)`` array: row t is the class-t coefficient vector and column l is
the group ``beta_(l)``. ``beta.ravel()`` is the stacked flat layout.

The solver works on the column-standardized program (design ``X_t / sqrt(d_t)``)
further divided by a constant K0 bounding every class design's spectral norm.
Each step majorizes the per-class root residual norms with a common curvature
``A = sum_t 1 / (sqrt(n0) ||r_t||)``, so the objective never increases.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import RankDeficiencyError, ResidualFloorError, ValidationError

_DRAW_BUDGET = 2_000_000


@dataclass(frozen=True)
class HGSLProblem:
    """Responses ``y[t]`` (length n_t) and designs ``X[t]`` (n_t x G) for k classes.

    ``groups`` optionally maps group index l to an external label, e.g. the
    node a predictor column came from.
    """

    y: tuple[np.ndarray, ...]
    X: tuple[np.ndarray, ...]
    groups: tuple[int, ...] | None = None

    def __post_init__(self):
        y = tuple(np.asarray(v, dtype=float) for v in self.y)
        X = tuple(np.atleast_2d(np.asarray(m, dtype=float)) for m in self.X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        if len(y) != len(X) or not y:
            raise ValidationError(f"{len(y)} responses for {len(X)} designs")
        G = X[0].shape[1]
        for t, (v, m) in enumerate(zip(y, X)):
            if v.ndim != 1 or m.shape[0] != v.shape[0]:
                raise ValidationError(f"class {t}: response length {v.shape} vs design {m.shape}")
            if m.shape[1] != G:
                raise ValidationError(f"class {t}: {m.shape[1]} groups, expected {G}")
        if self.groups is not None and len(self.groups) != G:
            raise ValidationError("group label count differs from design width")

    @property
    def k(self) -> int:
        return len(self.y)

    @property
    def G(self) -> int:
        return self.X[0].shape[1]

    @property
    def n(self) -> tuple[int, ...]:
        return tuple(v.shape[0] for v in self.y)

    @property
    def n0(self) -> int:
        return min(self.n)


@dataclass(frozen=True)
class LambdaConfig:
    """Settings for the tuning-free penalty level.

    ``xi`` is the tuning scalar of the ``(xi + 1) / (xi - 1)`` prefactor;
    ``math.inf`` makes the prefactor exactly 1.
    """

    delta: float = 1.0
    xi: float = math.inf
    reps: int = 10000
    seed: int = 0

    def __post_init__(self):
        if not self.xi > 1:
            raise ValidationError(f"xi must exceed 1, got {self.xi}")
        if self.delta <= 0:
            raise ValidationError(f"delta must be positive, got {self.delta}")
        if self.reps < 1:
            raise ValidationError(f"reps must be at least 1, got {self.reps}")

    @property
    def prefactor(self) -> float:
        if math.isinf(self.xi):
            return 1.0
        return (self.xi + 1.0) / (self.xi - 1.0)


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 10000
    tol: float = 1e-7
    # convergence also needs the optimality residual (solver coordinates) below this
    kkt_tol: float = 1e-7
    # relative to ||y_t||
    residual_floor: float = 1e-10
    # None -> max_t spectral norm of the standardized class designs
    k0: float | None = None


@dataclass
class HGSLSolution:
    beta: np.ndarray
    beta_scaled: np.ndarray
    support: tuple[int, ...]
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    lam: float
    k0: float
    refit_beta: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def scaling_matrix(problem: HGSLProblem) -> np.ndarray:
    """Per-class column mean squares, shape ``(k, G)``.

    Raises
    ------
    ValidationError
        If some class has an identically zero column.
    """
    d = np.stack([np.mean(m * m, axis=0) for m in problem.X])
    zero = np.argwhere(d <= 0)
    if zero.size:
        t, l = zero[0]
        raise ValidationError(f"design column {l} of class {t} is identically zero")
    return d


def lambda_theoretical(n0: int, p: int, k: int, config: LambdaConfig = LambdaConfig()) -> float:
    """Closed-form penalty level from the chi-square tail bound.

    Raises ``ValidationError`` when ``tau >= 1``, i.e. ``n0`` is too small for
    the formula; use :func:`lambda_simulated` instead.
    """
    logp = math.log(p)
    tau = math.sqrt(8.0 * (config.delta * logp + math.log(k)) / n0)
    if tau >= 1:
        raise ValidationError(
            f"tau={tau:.3f} >= 1: n0={n0} is too small for the theoretical rule"
        )
    core = (k + 2 * config.delta * logp + 2 * math.sqrt(config.delta * k * logp)) / (n0 * (1 - tau))
    return config.prefactor * math.sqrt(core)


def simulated_noise_norms(n: Sequence[int], reps: int, rng: np.random.Generator) -> np.ndarray:
    """Draws of the standardized score-vector norm, one per replication."""
    total = np.zeros(reps)
    # bound memory for large n: replications are drawn in chunks
    chunk = max(1, _DRAW_BUDGET // max(n))
    for start in range(0, reps, chunk):
        stop = min(reps, start + chunk)
        for nt in n:
            z1 = rng.standard_normal((stop - start, nt))
            z2 = rng.standard_normal((stop - start, nt))
            z = math.sqrt(nt) * np.einsum("ij,ij->i", z1, z2)
            z /= np.linalg.norm(z1, axis=1) * np.linalg.norm(z2, axis=1)
            total[start:stop] += z * z
    return np.sqrt(total)


def lambda_simulated(n, p: int, k: int | None = None, config: LambdaConfig = LambdaConfig()) -> float:
    """Monte Carlo penalty level.

    ``n`` is the sequence of class sizes (an int is repeated ``k`` times).
    The empirical ``1 - p**-delta`` quantile uses the left-continuous
    inverse: the smallest draw with at least that fraction of draws below it.
    """
    if np.isscalar(n):
        if k is None:
            raise ValidationError("k is required when n is a single size")
        n = [int(n)] * k
    n = [int(v) for v in n]
    if k is not None and len(n) != k:
        raise ValidationError(f"{len(n)} class sizes for k={k}")
    rng = np.random.default_rng(config.seed)
    draws = np.sort(simulated_noise_norms(n, config.reps, rng))
    q = 1.0 - float(p) ** (-config.delta)
    rank = min(max(math.ceil(q * config.reps - 1e-9), 1), config.reps)
    return config.prefactor * draws[rank - 1] / math.sqrt(min(n))


def soft_threshold_group(a, lam: float) -> np.ndarray:
    """Shrink the vector ``a`` toward zero by ``lam`` in Euclidean norm."""
    a = np.asarray(a, dtype=float)
    norm = np.linalg.norm(a)
    if norm <= lam or norm == 0:
        return np.zeros_like(a)
    return a * ((norm - lam) / norm)


def _pad(arrays: Sequence[np.ndarray], nmax: int) -> np.ndarray:
    out = np.zeros((len(arrays), nmax) + arrays[0].shape[1:])
    for t, a in enumerate(arrays):
        out[t, : a.shape[0]] = a
    return out


def _standardized(problem: HGSLProblem):
    d = scaling_matrix(problem)
    nmax = max(problem.n)
    Xbar = _pad([m / np.sqrt(dt) for m, dt in zip(problem.X, d)], nmax)
    Y = _pad(list(problem.y), nmax)
    return d, Xbar, Y


def _spectral_norms(Xs: np.ndarray) -> np.ndarray:
    # exact largest singular value per class; zero padding rows do not change it
    return np.linalg.svd(Xs, compute_uv=False)[..., 0]


def _iterate(Xs, Ys, lam, sqrt_n0, floor, opts: SolverOptions):
    """Batched iterative multivariate soft-thresholding.

    Xs: (B, k, n, G), Ys: (B, k, n), lam: (B,), floor: (B, k); everything
    already divided by K0. A problem stops once its last sup-norm step is
    below ``opts.tol`` and the optimality residual of the current iterate is
    below ``opts.kkt_tol``. Finished problems are frozen in place and the
    working arrays are compacted once half of them are done.
    """
    B, k, _, G = Xs.shape
    beta = np.zeros((B, k, G))
    iters = np.zeros(B, dtype=int)
    converged = np.zeros(B, dtype=bool)
    failures: dict[int, str] = {}
    traces: list[list[float]] = [[] for _ in range(B)]

    idx = np.arange(B)
    Xa, Ya, la, fa, ba = Xs, Ys, lam, floor, beta.copy()
    step = np.full(B, np.inf)
    live = np.ones(B, dtype=bool)
    for m in range(opts.max_iter + 1):
        r = np.matmul(Xa, ba[..., None])[..., 0] - Ya
        rn = np.linalg.norm(r, axis=-1)
        bnorm = np.linalg.norm(ba, axis=-2)
        obj = rn.sum(-1) / sqrt_n0 + la * bnorm.sum(-1)
        for i in np.flatnonzero(live):
            traces[idx[i]].append(float(obj[i]))

        bad = live & np.any(rn <= fa, axis=-1)
        if bad.any():
            for i in np.flatnonzero(bad):
                t = int(np.argmin(rn[i] - fa[i]))
                failures[int(idx[i])] = (
                    f"class {t} residual norm {rn[i, t]:.3e} fell below the floor; "
                    "lambda too small or the fit interpolates"
                )
                beta[idx[i]] = ba[i]
            live &= ~bad
            rn = np.where(bad[:, None], 1.0, rn)

        scale = 1.0 / (sqrt_n0 * rn)
        grad = np.matmul(np.swapaxes(Xa, -1, -2), r[..., None])[..., 0] * scale[..., None]

        # optimality residual of the current iterate
        active = bnorm > 0
        unit = ba / np.where(active, bnorm, 1.0)[:, None, :]
        viol = np.where(
            active,
            np.linalg.norm(grad + la[:, None, None] * unit, axis=-2),
            np.maximum(np.linalg.norm(grad, axis=-2) - la[:, None], 0.0),
        )
        done = live & (step < opts.tol) & (viol.max(axis=-1, initial=0.0) <= opts.kkt_tol)
        if done.any():
            converged[idx[done]] = True
            beta[idx[done]] = ba[done]
            live &= ~done
        if m == opts.max_iter or not live.any():
            break

        A = scale.sum(-1)
        z = ba - grad / A[:, None, None]
        gnorm = np.linalg.norm(z, axis=-2)
        thr = (la / A)[:, None]
        shrink = np.where(gnorm > thr, 1.0 - thr / np.where(gnorm > 0, gnorm, 1.0), 0.0)
        new = z * shrink[:, None, :]
        new = np.where(live[:, None, None], new, ba)

        step = np.where(live, np.max(np.abs(new - ba), axis=(-2, -1)), step)
        ba = new
        iters[idx[live]] += 1
        n_live = int(live.sum())
        if n_live <= len(live) // 2:
            Xa, Ya, la, fa, ba, idx, step = Xa[live], Ya[live], la[live], fa[live], ba[live], idx[live], step[live]
            live = np.ones(n_live, dtype=bool)
    for i in np.flatnonzero(live):
        beta[idx[i]] = ba[i]
    return beta, traces, iters, converged, failures


def _solve_many(problems: Sequence[HGSLProblem], lam: float, opts: SolverOptions):
    """Solve problems sharing k, G and class sizes in one batch.

    Returns a list holding an HGSLSolution or a ResidualFloorError per problem.
    """
    if lam <= 0:
        raise ValidationError(f"lam must be positive, got {lam}")
    if not problems:
        return []
    n0 = problems[0].n0
    sqrt_n0 = math.sqrt(n0)
    prepared = [_standardized(pr) for pr in problems]
    d = np.stack([pp[0] for pp in prepared])
    Xs = np.stack([pp[1] for pp in prepared])
    Ys = np.stack([pp[2] for pp in prepared])
    if opts.k0 is None:
        k0 = _spectral_norms(Xs).max(axis=-1)
    else:
        k0 = np.full(len(problems), float(opts.k0))
    ynorm = np.linalg.norm(Ys, axis=-1)
    beta_s, traces, iters, conv, failures = _iterate(
        Xs / k0[:, None, None, None],
        Ys / k0[:, None, None],
        lam / k0,
        sqrt_n0,
        opts.residual_floor * ynorm / k0[:, None],
        opts,
    )
    out = []
    for b, pr in enumerate(problems):
        if b in failures:
            out.append(ResidualFloorError(failures[b]))
            continue
        bs = beta_s[b]
        support = tuple(int(l) for l in np.flatnonzero(np.linalg.norm(bs, axis=0) > 0))
        out.append(
            HGSLSolution(
                beta=bs / np.sqrt(d[b]),
                beta_scaled=bs,
                support=support,
                objective_trace=np.asarray(traces[b]) * k0[b],
                iterations=int(iters[b]),
                converged=bool(conv[b]),
                lam=float(lam),
                k0=float(k0[b]),
            )
        )
    return out


def solve_batch(problems: Sequence[HGSLProblem], lam: float, opts: SolverOptions = SolverOptions()):
    """Solve many problems at the same ``lam``; failures are returned, not raised."""
    out: list = [None] * len(problems)
    buckets: dict = {}
    for i, pr in enumerate(problems):
        buckets.setdefault((pr.n, pr.G), []).append(i)
    for members in buckets.values():
        for i, res in zip(members, _solve_many([problems[i] for i in members], lam, opts)):
            out[i] = res
    return out


def hgsl_solve(problem: HGSLProblem, lam: float, opts: SolverOptions = SolverOptions()) -> HGSLSolution:
    """Solve one HGSL program starting from the zero vector.

    Returns with ``converged=False`` if ``opts.max_iter`` is reached before
    the sup-norm step falls below ``opts.tol`` with an optimality residual
    below ``opts.kkt_tol``.

    Raises
    ------
    ResidualFloorError
        If some class residual norm drops below ``opts.residual_floor * ||y_t||``.
    """
    (res,) = _solve_many([problem], lam, opts)
    if isinstance(res, Exception):
        raise res
    return res


def objective(problem: HGSLProblem, lam: float, beta) -> float:
    """HGSL objective in original coordinates."""
    beta = np.asarray(beta, dtype=float).reshape(problem.k, problem.G)
    d = scaling_matrix(problem)
    fit = sum(np.linalg.norm(v - m @ b) for v, m, b in zip(problem.y, problem.X, beta))
    return fit / math.sqrt(problem.n0) + lam * np.linalg.norm(np.sqrt(d) * beta, axis=0).sum()


def kkt_residual(problem: HGSLProblem, lam: float, beta, k0: float | None = None) -> float:
    """Largest violation of the optimality conditions at ``beta`` (original coordinates).

    Measured on the program the solver iterates on: the column-standardized
    designs ``Xbar_t`` and responses divided by ``k0`` (default: the solver's
    own choice, the largest class spectral norm), with ``lam / k0``. With the
    normalized gradient ``R_t = Xbar_t'(Xbar_t b_t - y_t) / (sqrt(n0) ||Xbar_t b_t - y_t||)``
    an active group must satisfy ``R_(l) + lam * b_(l) / ||b_(l)|| = 0`` and an
    inactive one ``||R_(l)|| <= lam``. Pass ``k0=1`` for the unrescaled program.
    """
    beta = np.asarray(beta, dtype=float).reshape(problem.k, problem.G)
    d, Xs, Ys = _standardized(problem)
    if k0 is None:
        k0 = float(_spectral_norms(Xs).max())
    Xs, Ys, lam = Xs / k0, Ys / k0, lam / k0
    bs = beta * np.sqrt(d)
    r = np.matmul(Xs, bs[..., None])[..., 0] - Ys
    rn = np.linalg.norm(r, axis=-1)
    if np.any(rn == 0):
        raise ResidualFloorError(f"class {int(np.argmin(rn))} residual is exactly zero")
    R = np.matmul(np.swapaxes(Xs, -1, -2), r[..., None])[..., 0] / (math.sqrt(problem.n0) * rn)[:, None]
    gn = np.linalg.norm(bs, axis=0)
    active = gn > 0
    viol = np.empty(problem.G)
    viol[active] = np.linalg.norm(R[:, active] + lam * bs[:, active] / gn[active], axis=0)
    viol[~active] = np.maximum(np.linalg.norm(R[:, ~active], axis=0) - lam, 0.0)
    return float(viol.max()) if viol.size else 0.0


def zero_threshold(problem: HGSLProblem) -> float:
    """Smallest ``lam`` for which the zero vector is optimal."""
    return kkt_residual(problem, 0.0, np.zeros((problem.k, problem.G)), k0=1.0)


def refit_ols(problem: HGSLProblem, support: Sequence[int]) -> np.ndarray:
    """Per-class least squares on the ``support`` columns, zeros elsewhere."""
    support = sorted(int(l) for l in support)
    beta = np.zeros((problem.k, problem.G))
    if not support:
        return beta
    for t, (v, m) in enumerate(zip(problem.y, problem.X)):
        sub = m[:, support]
        if np.linalg.matrix_rank(sub) < len(support):
            raise RankDeficiencyError(
                f"class {t}: restricted design with {len(support)} columns is rank deficient"
            )
        beta[t, support] = np.linalg.lstsq(sub, v, rcond=None)[0]
    return beta
