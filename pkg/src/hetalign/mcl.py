"""Markov clustering of a weighted alignment graph on sparse column-stochastic matrices."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

import numpy as np
import scipy.sparse as sp

from .alignment import AlignmentGraph, EmptySeedList

log = logging.getLogger(__name__)


class IsolatedNodeWithoutSelfLoop(ValueError):
    pass


@dataclass(frozen=True)
class MclParams:
    inflation: float = 2.0
    expansion: int = 2
    prune_threshold: float = 1e-5
    max_iters: int = 100
    convergence_eps: float = 1e-6
    add_self_loops: bool = True
    self_loop_weight: float = 1.0

    def __post_init__(self):
        if not self.inflation > 1:
            raise ValueError(f"inflation must be > 1, got {self.inflation}")
        if int(self.expansion) != self.expansion or self.expansion < 2:
            raise ValueError(f"expansion must be an integer >= 2, got {self.expansion}")
        if self.prune_threshold < 0:
            raise ValueError("prune_threshold must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.convergence_eps <= 0:
            raise ValueError("convergence_eps must be > 0")
        if self.add_self_loops and not self.self_loop_weight > 0:
            raise ValueError("self_loop_weight must be > 0")


class StochasticMatrix:
    """Column-stochastic sparse matrix; column ``j`` holds the transition
    probabilities out of node ``j``. Wraps a canonical CSC matrix."""

    def __init__(self, matrix: sp.spmatrix):
        m = sp.csc_matrix(matrix, dtype=np.float64)
        m.eliminate_zeros()
        m.sum_duplicates()
        m.sort_indices()
        self.matrix = m

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def column(self, j: int) -> dict[int, float]:
        m = self.matrix
        sl = slice(m.indptr[j], m.indptr[j + 1])
        return dict(zip(m.indices[sl].tolist(), m.data[sl].tolist()))

    def column_sums(self) -> np.ndarray:
        return _column_sums(self.matrix)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def max_abs_diff(self, other: "StochasticMatrix") -> float:
        d = abs(self.matrix - other.matrix)
        return float(d.max()) if d.nnz else 0.0


def _column_of_entry(m: sp.csc_matrix) -> np.ndarray:
    return np.repeat(np.arange(m.shape[1]), np.diff(m.indptr))


def _column_sums(m: sp.csc_matrix) -> np.ndarray:
    # bincount accumulates entries in storage order: fixed reduction order per column
    return np.bincount(_column_of_entry(m), weights=m.data, minlength=m.shape[1])


def _normalized(m: sp.csc_matrix) -> StochasticMatrix:
    sums = _column_sums(m)
    cols = _column_of_entry(m)
    out = m.copy()
    out.data = m.data / sums[cols]
    return StochasticMatrix(out)


def to_stochastic(ag: AlignmentGraph, params: MclParams | None = None) -> StochasticMatrix:
    """Symmetric weighted adjacency (plus optional self-loops), column-normalized."""
    params = params or MclParams()
    if ag.n == 0:
        raise EmptySeedList("alignment graph has no nodes")
    a = ag.adjacency().tocsc()
    if params.add_self_loops:
        a = a + sp.identity(ag.n, format="csc") * params.self_loop_weight
    a = sp.csc_matrix(a)
    a.eliminate_zeros()
    if not params.add_self_loops:
        empty = np.flatnonzero(np.diff(a.indptr) == 0)
        if empty.size:
            raise IsolatedNodeWithoutSelfLoop(
                f"node {int(empty[0])} has no edges and self-loops are disabled")
    return _normalized(a)


def expand(m: StochasticMatrix, e: int) -> StochasticMatrix:
    """Matrix power ``m ** e``."""
    out = m.matrix
    for _ in range(e - 1):
        out = out @ m.matrix
    return StochasticMatrix(out)


def inflate(m: StochasticMatrix, r: float) -> StochasticMatrix:
    """Entrywise power ``r`` followed by column renormalization."""
    powered = m.matrix.copy()
    powered.data = np.power(powered.data, r)
    return _normalized(powered)


def prune(m: StochasticMatrix, threshold: float) -> StochasticMatrix:
    """Drop entries below ``threshold`` (never a column's maximum) and renormalize."""
    if threshold <= 0:
        return StochasticMatrix(m.matrix.copy())
    mat = m.matrix
    cols = _column_of_entry(mat)
    colmax = np.zeros(mat.shape[1])
    np.maximum.at(colmax, cols, mat.data)
    keep = (mat.data >= threshold) | (mat.data == colmax[cols])
    kept = sp.csc_matrix((mat.data[keep], mat.indices[keep], np.concatenate(
        [[0], np.cumsum(np.bincount(cols[keep], minlength=mat.shape[1]))])), shape=mat.shape)
    return _normalized(kept)


@dataclass
class ClusterSet:
    clusters: list[list[int]]
    iterations: int = 0
    converged: bool = True
    intra_weight: float = 0.0
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.clusters)

    def membership(self, n: int | None = None) -> np.ndarray:
        n = n if n is not None else sum(len(c) for c in self.clusters)
        out = np.full(n, -1, dtype=np.int64)
        for k, members in enumerate(self.clusters):
            out[members] = k
        return out

    def is_partition(self, n: int) -> bool:
        flat = [i for c in self.clusters for i in c]
        return all(self.clusters) and len(flat) == n and set(flat) == set(range(n))

    def sizes(self) -> list[int]:
        return [len(c) for c in self.clusters]


def interpret(m: StochasticMatrix) -> list[list[int]]:
    """Read clusters off an (approximately) idempotent MCL matrix.

    Attractors are nodes with positive diagonal mass. Attractors appearing
    together in the support of any column are merged; every other node joins
    the attractor that receives most of its mass (smallest index on ties).
    Nodes whose column touches no attractor stay on their own.
    """
    mat = m.matrix
    n = mat.shape[0]
    is_attr = mat.diagonal() > 0
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    best = np.full(n, -1, dtype=np.int64)
    for j in range(n):
        rows = mat.indices[mat.indptr[j]:mat.indptr[j + 1]]
        vals = mat.data[mat.indptr[j]:mat.indptr[j + 1]]
        mask = is_attr[rows] & (vals > 0)
        attrs, avals = rows[mask], vals[mask]
        if attrs.size == 0:
            continue
        root = find(int(attrs[0]))
        for a in attrs[1:].tolist():
            ra = find(a)
            if ra != root:
                lo, hi = min(ra, root), max(ra, root)
                parent[hi] = lo
                root = lo
        top = avals.max()
        best[j] = int(attrs[avals == top].min())  # ties go to the smallest attractor index

    groups: dict[int, list[int]] = {}
    for j in range(n):
        if is_attr[j]:
            key = find(j)
        elif best[j] >= 0:
            key = find(int(best[j]))
        else:
            key = -1 - j
        groups.setdefault(key, []).append(j)
    return sorted((sorted(g) for g in groups.values()), key=lambda c: c[0])


def mcl_cluster(ag: AlignmentGraph, params: MclParams | None = None) -> ClusterSet:
    """Run expand -> inflate -> prune to convergence and interpret the limit."""
    params = params or MclParams()
    m = to_stochastic(ag, params)
    converged = False
    it = 0
    for it in range(1, params.max_iters + 1):
        nxt = prune(inflate(expand(m, params.expansion), params.inflation), params.prune_threshold)
        change = nxt.max_abs_diff(m)
        m = nxt
        if change < params.convergence_eps:
            converged = True
            break
    warnings = []
    if not converged:
        msg = f"MCL did not converge within {params.max_iters} iterations; clusters read from last iterate"
        log.warning(msg)
        warnings.append(msg)
    clusters = interpret(m)
    member = np.empty(ag.n, dtype=np.int64)
    for k, c in enumerate(clusters):
        member[c] = k
    inside = member[ag.src] == member[ag.dst]
    intra = math.fsum(ag.weight[inside].tolist())
    return ClusterSet(clusters, it, converged, intra, warnings)


def write_clusters(cs: ClusterSet, sink: TextIO) -> None:
    sink.write(f"# iterations {cs.iterations}\n")
    sink.write(f"# converged {'true' if cs.converged else 'false'}\n")
    sink.write(f"# clusters {len(cs.clusters)}\n")
    sink.write(f"# intra_weight {cs.intra_weight!r}\n")
    for w in cs.warnings:
        sink.write(f"# warning {w}\n")
    sink.writelines(" ".join(map(str, c)) + "\n" for c in cs.clusters)


def save_clusters(cs: ClusterSet, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        write_clusters(cs, f)


def read_clusters(path: str | Path) -> ClusterSet:
    meta: dict[str, str] = {}
    clusters = []
    warnings = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(" ")
                if key == "warning":
                    warnings.append(value)
                else:
                    meta[key] = value
                continue
            clusters.append([int(x) for x in line.split()])
    return ClusterSet(clusters, int(meta.get("iterations", 0)), meta.get("converged", "true") == "true",
                      float(meta.get("intra_weight", 0.0)), warnings)
