"""Core containers for multi-class Gaussian graphical model data.

Node indices are 0-based everywhere in this package. All containers are
immutable after construction: the arrays they hold are flagged read-only.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MultiNetworkSample:
    """k independent samples over the same p nodes.

    ``X[t]`` has shape ``(n[t], p)``. No centering is applied.
    """

    X: tuple[np.ndarray, ...]
    node_names: tuple[str, ...] | None = None

    def __post_init__(self):
        mats = tuple(_frozen(x) for x in self.X)
        object.__setattr__(self, "X", mats)
        if len(mats) < 1:
            raise ValidationError("need at least one class")
        for t, x in enumerate(mats):
            if x.ndim != 2:
                raise ValidationError(f"class {t}: expected a 2-D matrix, got ndim={x.ndim}")
        p = mats[0].shape[1]
        if p < 2:
            raise ValidationError(f"need at least 2 nodes, got p={p}")
        for t, x in enumerate(mats):
            if x.shape[1] != p:
                raise ValidationError(
                    f"dimension mismatch: class {t} has {x.shape[1]} columns, class 0 has {p}"
                )
            if x.shape[0] < 2:
                raise ValidationError(f"class {t} has {x.shape[0]} rows; need at least 2")
            if not np.all(np.isfinite(x)):
                raise ValidationError(f"class {t} contains non-finite values")
        if self.node_names is not None:
            names = tuple(str(s) for s in self.node_names)
            if len(names) != p:
                raise ValidationError(f"{len(names)} node names for {p} columns")
            object.__setattr__(self, "node_names", names)

    @property
    def k(self) -> int:
        return len(self.X)

    @property
    def p(self) -> int:
        return self.X[0].shape[1]

    @property
    def n(self) -> tuple[int, ...]:
        return tuple(x.shape[0] for x in self.X)

    @property
    def n0(self) -> int:
        return min(self.n)

    @property
    def N(self) -> int:
        return sum(self.n)

    def centered(self) -> MultiNetworkSample:
        """Copy with each class's columns centered to mean zero."""
        return MultiNetworkSample(tuple(x - x.mean(axis=0) for x in self.X), self.node_names)

    def scaled(self, c: float) -> MultiNetworkSample:
        return MultiNetworkSample(tuple(c * x for x in self.X), self.node_names)

    def permuted(self, order: Sequence[int]) -> MultiNetworkSample:
        """Copy with nodes reordered so new node i is old node ``order[i]``."""
        order = list(order)
        names = None if self.node_names is None else tuple(self.node_names[i] for i in order)
        return MultiNetworkSample(tuple(x[:, order] for x in self.X), names)


@dataclass(frozen=True)
class PrecisionSet:
    """k symmetric p x p precision matrices."""

    Omega: tuple[np.ndarray, ...]
    require_pd: bool = False

    def __post_init__(self):
        mats = tuple(_frozen(m) for m in self.Omega)
        object.__setattr__(self, "Omega", mats)
        if not mats:
            raise ValidationError("empty precision set")
        p = mats[0].shape[0]
        for t, m in enumerate(mats):
            if m.shape != (p, p):
                raise ValidationError(f"matrix {t} has shape {m.shape}, expected {(p, p)}")
            scale = max(np.max(np.abs(m)), 1.0)
            if np.max(np.abs(m - m.T)) > 1e-10 * scale:
                raise ValidationError(f"matrix {t} is not symmetric")
            if self.require_pd and np.linalg.eigvalsh(m)[0] <= 0:
                raise ValidationError(f"matrix {t} is not positive definite")

    @property
    def k(self) -> int:
        return len(self.Omega)

    @property
    def p(self) -> int:
        return self.Omega[0].shape[0]

    def stack(self) -> np.ndarray:
        return np.stack(self.Omega)

    def link_vector(self, a: int, b: int) -> np.ndarray:
        """The k-vector of (a, b) entries across graphs."""
        return np.array([m[a, b] for m in self.Omega])

    def to_json(self) -> dict:
        return {"k": self.k, "p": self.p, "Omega": [m.tolist() for m in self.Omega]}

    @classmethod
    def from_json(cls, obj: dict) -> PrecisionSet:
        ps = cls(tuple(np.asarray(m, dtype=float) for m in obj["Omega"]))
        if ps.k != obj["k"] or ps.p != obj["p"]:
            raise ValidationError("k/p fields disagree with the stored matrices")
        return ps


@dataclass(frozen=True)
class EdgeSet:
    """Undirected edges over p nodes, stored as canonical pairs ``a < b``."""

    p: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        canon = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValidationError(f"self-loop at node {a}")
            if not (0 <= a < self.p and 0 <= b < self.p):
                raise ValidationError(f"pair ({a}, {b}) out of range for p={self.p}")
            canon.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(canon))

    def __contains__(self, pair) -> bool:
        a, b = pair
        return (min(a, b), max(a, b)) in self.edges

    def __len__(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.p, dtype=int)
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    @property
    def sparsity(self) -> int:
        """Maximum node degree."""
        return int(self.degrees().max()) if self.p else 0

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.p, self.p), dtype=bool)
        for a, b in self.edges:
            adj[a, b] = adj[b, a] = True
        return adj

    @classmethod
    def from_adjacency(cls, adj: np.ndarray) -> EdgeSet:
        adj = np.asarray(adj, dtype=bool)
        a, b = np.nonzero(np.triu(adj | adj.T, k=1))
        return cls(adj.shape[0], frozenset(zip(a.tolist(), b.tolist())))

    def to_json(self) -> dict:
        return {"p": self.p, "edges": sorted([list(e) for e in self.edges])}

    @classmethod
    def from_json(cls, obj: dict) -> EdgeSet:
        return cls(int(obj["p"]), frozenset(tuple(e) for e in obj["edges"]))


def true_edge_set(truth: PrecisionSet, tol: float = 0.0) -> EdgeSet:
    """Pairs whose joint link vector has some entry with magnitude above ``tol``."""
    strength = np.max(np.abs(truth.stack()), axis=0)
    support = strength > tol
    np.fill_diagonal(support, False)
    return EdgeSet.from_adjacency(support)


def save_sample(sample: MultiNetworkSample, paths: Sequence[str | Path]) -> None:
    """Write one CSV per class; values use 17 significant digits."""
    if len(paths) != sample.k:
        raise ValidationError(f"{len(paths)} paths for {sample.k} classes")
    names = sample.node_names or tuple(f"X{j}" for j in range(sample.p))
    for x, path in zip(sample.X, paths):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for row in x:
                w.writerow([format(v, ".17g") for v in row])


def load_sample(paths: Iterable[str | Path], center: bool = False) -> MultiNetworkSample:
    """Read one headered numeric CSV per class, preserving path order."""
    mats, header = [], None
    for path in paths:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValidationError(f"{path}: empty file")
        head, body = rows[0], [r for r in rows[1:] if r]
        if header is None:
            header = head
        elif len(head) != len(header):
            raise ValidationError(
                f"dimension mismatch: {path} has {len(head)} columns, expected {len(header)}"
            )
        elif head != header:
            raise ValidationError(f"{path}: header differs from the first file")
        if len(body) < 2:
            raise ValidationError(f"{path}: {len(body)} data rows; need at least 2")
        try:
            x = np.array([[float(v) for v in r] for r in body])
        except ValueError as exc:
            raise ValidationError(f"{path}: non-numeric cell ({exc})") from None
        if x.ndim != 2 or x.shape[1] != len(header):
            raise ValidationError(f"{path}: ragged rows")
        mats.append(x)
    if not mats:
        raise ValidationError("no sample files given")
    sample = MultiNetworkSample(tuple(mats), tuple(header))
    return sample.centered() if center else sample


def write_json(obj, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)


def read_json(path: str | Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
