"""Block-diagonal precision-set generators and Gaussian / Laplace samplers.

Blocks of ``block_size`` nodes sit on the diagonal. The first
``ceil(blocks / 2)`` blocks are "upper" blocks (unit diagonal, off-diagonal
values from U[0.2, 0.4]); the rest are "lower" blocks (diagonal 3, values
from U[0.6, 1.2]). Each unordered pair is assigned once, so matrices are
exactly symmetric.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .data import MultiNetworkSample, PrecisionSet
from .errors import NumericalError, ValidationError

log = logging.getLogger(__name__)

UPPER = (1.0, 0.2, 0.4)
LOWER = (3.0, 0.6, 1.2)
MAX_REDRAWS = 100


@dataclass(frozen=True)
class SimConfig:
    k: int = 5
    p: int = 48
    n_per_class: int = 100
    block_size: int = 8
    model: str = "I"
    noise: str = "gaussian"
    seed: int = 0
    # "error": p must be a multiple of block_size; "diagonal": trailing nodes
    # form a diagonal-only block
    remainder: str = "error"

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if self.block_size < 2:
            raise ValidationError(f"block size must be >= 2, got {self.block_size}")
        if self.model not in ("I", "II"):
            raise ValidationError(f"model must be 'I' or 'II', got {self.model!r}")
        if self.noise not in ("gaussian", "laplace"):
            raise ValidationError(f"noise must be 'gaussian' or 'laplace', got {self.noise!r}")
        if self.remainder not in ("error", "diagonal"):
            raise ValidationError(f"unknown remainder policy {self.remainder!r}")
        if self.p < self.block_size:
            raise ValidationError(f"p={self.p} is smaller than one block")
        if self.remainder == "error" and self.p % self.block_size:
            raise ValidationError(
                f"p={self.p} is not a multiple of block size {self.block_size}; "
                "use remainder='diagonal' or a multiple such as "
                f"{self.p - self.p % self.block_size}"
            )
        if self.n_per_class < 2:
            raise ValidationError("need at least 2 observations per class")

    @property
    def n_blocks(self) -> int:
        return self.p // self.block_size

    @property
    def n_upper(self) -> int:
        return math.ceil(self.n_blocks / 2)


def block_layout(config: SimConfig) -> list[tuple[int, int, tuple[float, float, float]]]:
    """(start, stop, (diagonal, low, high)) for each full block."""
    out = []
    for b in range(config.n_blocks):
        start = b * config.block_size
        out.append((start, start + config.block_size, UPPER if b < config.n_upper else LOWER))
    return out


def _draw_block(rng, k, size, params, model):
    diag, lo, hi = params
    iu = np.triu_indices(size, k=1)
    m = len(iu[0])
    vals = rng.uniform(lo, hi, size=(k, m))
    if model == "II":
        tails = rng.random(m) < 0.5
        keep = rng.integers(0, k, size=m)
        mask = np.ones((k, m), dtype=bool)
        mask[:, tails] = np.arange(k)[:, None] == keep[None, tails]
        vals = vals * mask
    blocks = np.zeros((k, size, size))
    blocks[:, iu[0], iu[1]] = vals
    blocks += np.swapaxes(blocks, 1, 2)
    blocks[:, np.arange(size), np.arange(size)] = diag
    return blocks


def _generate(config: SimConfig, rng: np.random.Generator | None = None) -> PrecisionSet:
    rng = np.random.default_rng(config.seed) if rng is None else rng
    k, p = config.k, config.p
    mats = np.zeros((k, p, p))
    redraws = 0
    for start, stop, params in block_layout(config):
        for attempt in range(MAX_REDRAWS + 1):
            blocks = _draw_block(rng, k, stop - start, params, config.model)
            if all(np.linalg.eigvalsh(b)[0] > 0 for b in blocks):
                break
            redraws += 1
        else:
            raise NumericalError(
                f"block at nodes {start}..{stop - 1} was not positive definite after {MAX_REDRAWS} redraws"
            )
        mats[:, start:stop, start:stop] = blocks
    tail = config.n_blocks * config.block_size
    if tail < p:
        # trailing nodes continue the last (lower) block's diagonal
        mats[:, np.arange(tail, p), np.arange(tail, p)] = block_layout(config)[-1][2][0]
    if redraws:
        log.info("redrew %d non-positive-definite block(s)", redraws)
    return PrecisionSet(tuple(mats), require_pd=True)


def gen_model1(config: SimConfig, rng=None) -> PrecisionSet:
    """Shared block support; every within-block link vector has k nonzero entries."""
    if config.model != "I":
        config = SimConfig(**{**config.__dict__, "model": "I"})
    return _generate(config, rng)


def gen_model2(config: SimConfig, rng=None) -> PrecisionSet:
    """Like model I, but each within-block pair is, with probability 1/2,
    nonzero in a single uniformly chosen class only."""
    if config.model != "II":
        config = SimConfig(**{**config.__dict__, "model": "II"})
    return _generate(config, rng)


def generate(config: SimConfig, rng=None) -> PrecisionSet:
    return gen_model1(config, rng) if config.model == "I" else gen_model2(config, rng)


def covariance_root(omega: np.ndarray) -> np.ndarray:
    """Symmetric square root of ``inv(omega)``."""
    vals, vecs = np.linalg.eigh(omega)
    if vals[0] <= 0:
        raise ValidationError("precision matrix is not positive definite")
    return (vecs / np.sqrt(vals)) @ vecs.T


def sample_from(truth: PrecisionSet, n_per_class, noise: str = "gaussian", seed=0) -> MultiNetworkSample:
    """Draw rows ``Sigma_t^{1/2} z`` with z standard Gaussian or Laplace(0, 1/sqrt(2)).

    ``seed`` may be an int, a SeedSequence or a Generator.
    """
    if noise not in ("gaussian", "laplace"):
        raise ValidationError(f"unknown noise {noise!r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sizes = [int(n_per_class)] * truth.k if np.isscalar(n_per_class) else [int(v) for v in n_per_class]
    if len(sizes) != truth.k:
        raise ValidationError(f"{len(sizes)} sample sizes for k={truth.k}")
    X = []
    for omega, n in zip(truth.Omega, sizes):
        root = covariance_root(omega)
        if noise == "gaussian":
            z = rng.standard_normal((n, truth.p))
        else:
            z = rng.laplace(0.0, 1.0 / math.sqrt(2.0), size=(n, truth.p))
        X.append(z @ root)
    return MultiNetworkSample(tuple(X))


def simulate(config: SimConfig):
    """Truth and one sample from independent streams derived from ``config.seed``."""
    s_truth, s_data = np.random.SeedSequence(config.seed).spawn(2)
    truth = generate(config, np.random.default_rng(s_truth))
    sample = sample_from(truth, config.n_per_class, config.noise, np.random.default_rng(s_data))
    return truth, sample
