"""Node-colored undirected graphs: data model, text I/O and seeded G(n, m) generation."""

from __future__ import annotations

import io
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, TextIO, Union

import numpy as np

TextSource = Union[str, TextIO, Iterable[str]]


class GraphFormatError(ValueError):
    """Base class for input-file problems; carries the offending file name and line."""

    def __init__(self, message: str, source: str = "<input>", line: int | None = None):
        self.source = source
        self.line = line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


class MalformedLine(GraphFormatError):
    pass


class UnknownNode(GraphFormatError):
    def __init__(self, label: str, source: str = "<input>", line: int | None = None):
        self.label = label
        super().__init__(f"unknown node {label!r}", source, line)


class DuplicateEdge(GraphFormatError):
    pass


class SelfLoop(GraphFormatError):
    pass


class DuplicateColorAssignment(GraphFormatError):
    pass


class InfeasibleSpec(ValueError):
    pass


class ColoredGraph:
    """Immutable simple undirected graph with one color per node.

    Adjacency is kept in CSR form (``indptr``/``indices``) with every row sorted,
    which gives the per-node sorted neighbor lists and O(log d) adjacency tests.
    Node ``i`` carries the external label ``labels[i]`` and the color
    ``color_labels[colors[i]]``.
    """

    __slots__ = ("n", "indptr", "indices", "colors", "labels", "color_labels", "_label_index")

    def __init__(
        self,
        labels: Iterable[str],
        colors: Iterable[int],
        color_labels: Iterable[str],
        edges: np.ndarray | Iterable[tuple[int, int]],
    ):
        self.labels = tuple(labels)
        self.n = len(self.labels)
        self.color_labels = tuple(color_labels)
        self.colors = np.array(colors if isinstance(colors, np.ndarray) else list(colors), dtype=np.int32)
        edges = np.asarray(edges if isinstance(edges, np.ndarray) else list(edges), dtype=np.int64)
        edges = edges.reshape(-1, 2)
        self.indptr, self.indices = _build_csr(self.n, edges)
        self._label_index = {lab: i for i, lab in enumerate(self.labels)}
        for arr in (self.indptr, self.indices, self.colors):
            arr.setflags(write=False)
        self.validate()

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], colors: Iterable[int],
                   num_colors: int | None = None) -> "ColoredGraph":
        """Build a graph with labels ``"0".."n-1"`` and color labels ``"0".."k-1"``."""
        colors = np.asarray(list(colors), dtype=np.int32)
        k = num_colors if num_colors is not None else (int(colors.max()) + 1 if n else 1)
        return cls([str(i) for i in range(n)], colors, [str(c) for c in range(k)], list(edges))

    def validate(self) -> None:
        """Full-scan check of the structural invariants; raises ValueError on violation."""
        n = self.n
        if len(self._label_index) != n:
            raise ValueError("node labels are not unique")
        if self.colors.shape != (n,):
            raise ValueError("every node needs exactly one color")
        if n and (self.colors.min() < 0 or self.colors.max() >= len(self.color_labels)):
            raise ValueError("color value outside the declared color table")
        rows = np.repeat(np.arange(n), np.diff(self.indptr))
        cols = self.indices
        if np.any(rows == cols):
            raise ValueError("self-loop present")
        if np.any((np.diff(rows) == 0) & (np.diff(cols) <= 0)):
            raise ValueError("neighbor lists not strictly sorted")
        fwd = rows * n + cols
        rev = np.sort(cols * n + rows)
        if not np.array_equal(np.sort(fwd), rev):
            raise ValueError("adjacency is not symmetric")

    @property
    def m(self) -> int:
        return int(self.indices.size // 2)

    @property
    def num_colors(self) -> int:
        return len(self.color_labels)

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def degree(self, u: int) -> int:
        return int(self.indptr[u + 1] - self.indptr[u])

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        k = np.searchsorted(row, v)
        return bool(k < row.size and row[k] == v)

    def node_id(self, label: str) -> int:
        return self._label_index[label]

    def __contains__(self, label: object) -> bool:
        return label in self._label_index

    def color_label_of(self, u: int) -> str:
        return self.color_labels[self.colors[u]]

    def edges(self) -> np.ndarray:
        """All edges as an ``(m, 2)`` array with ``u < v``, sorted lexicographically."""
        rows = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))
        keep = rows < self.indices
        return np.column_stack([rows[keep], self.indices[keep].astype(np.int64)])

    def color_histogram(self) -> dict[str, int]:
        counts = Counter(self.colors.tolist())
        return {self.color_labels[c]: counts.get(c, 0) for c in range(self.num_colors)}

    def __eq__(self, other: object) -> bool:
        # label-based so that a re-parsed graph compares equal even when the
        # color table was rebuilt in a different order
        if not isinstance(other, ColoredGraph):
            return NotImplemented
        if self.labels != other.labels:
            return False
        if [self.color_label_of(u) for u in range(self.n)] != \
                [other.color_label_of(u) for u in range(other.n)]:
            return False
        return np.array_equal(self.indptr, other.indptr) and np.array_equal(self.indices, other.indices)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"ColoredGraph(n={self.n}, m={self.m}, colors={self.num_colors})"


def _build_csr(n: int, edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        raise ValueError("edge endpoint out of range")
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    if src.size and np.any((np.diff(src) == 0) & (np.diff(dst) == 0)):
        raise ValueError("duplicate edge")
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, dst.astype(np.int32)


@dataclass(frozen=True)
class GraphSpec:
    n: int
    m: int
    num_colors: int = 2
    rng_seed: int = 0

    def __post_init__(self):
        if self.n < 0 or self.m < 0:
            raise InfeasibleSpec("node and edge counts must be non-negative")
        if self.num_colors < 1:
            raise InfeasibleSpec("num_colors must be at least 1")
        if self.m > self.max_edges:
            raise InfeasibleSpec(
                f"{self.m} edges requested but a simple graph on {self.n} nodes has at most {self.max_edges}")

    @property
    def max_edges(self) -> int:
        return self.n * (self.n - 1) // 2


def generate_er_colored(spec: GraphSpec) -> ColoredGraph:
    """Sample a G(n, m) Erdos-Renyi graph with uniformly random node colors.

    Edges are drawn as uniform unordered pairs and rejected when they are loops
    or repeats, until exactly ``m`` distinct edges are collected; the result is
    a pure function of ``spec``.
    """
    n, m = spec.n, spec.m
    rng = np.random.default_rng(spec.rng_seed)
    colors = rng.integers(0, spec.num_colors, size=n, dtype=np.int64)
    if m == spec.max_edges:
        iu, ju = np.triu_indices(n, k=1)
        edges = np.column_stack([iu, ju])
    else:
        keys = np.empty(0, dtype=np.int64)
        while keys.size < m:
            need = m - keys.size
            batch = int(need * 1.1) + 16
            u = rng.integers(0, n, size=batch, dtype=np.int64)
            v = rng.integers(0, n, size=batch, dtype=np.int64)
            ok = u != v
            lo, hi = np.minimum(u[ok], v[ok]), np.maximum(u[ok], v[ok])
            cand = np.concatenate([keys, lo * n + hi])
            _, first = np.unique(cand, return_index=True)
            keys = cand[np.sort(first)][:m]
        edges = np.column_stack([keys // n, keys % n])
    return ColoredGraph.from_edges(n, edges, colors, spec.num_colors)


def _lines(source: TextSource) -> Iterator[str]:
    if isinstance(source, str):
        yield from io.StringIO(source)
    else:
        yield from source


def _records(source: TextSource, name: str) -> Iterator[tuple[int, list[str]]]:
    for lineno, raw in enumerate(_lines(source), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line.split()


def parse_colored_graph(edge_stream: TextSource, color_stream: TextSource, *,
                        edge_source: str = "<edges>", color_source: str = "<colors>") -> ColoredGraph:
    """Parse an edge list and a node-color list into a validated graph.

    Node ids follow first appearance in the color stream; color ids follow first
    appearance of each color label. Self-loops, repeated edges (in either
    orientation) and repeated color assignments are errors.
    """
    labels: list[str] = []
    index: dict[str, int] = {}
    color_ids: dict[str, int] = {}
    colors: list[int] = []
    for lineno, fields in _records(color_stream, color_source):
        if len(fields) != 2:
            raise MalformedLine(f"expected '<label> <color>', got {len(fields)} fields", color_source, lineno)
        label, color = fields
        if label in index:
            raise DuplicateColorAssignment(f"node {label!r} already has a color", color_source, lineno)
        index[label] = len(labels)
        labels.append(label)
        colors.append(color_ids.setdefault(color, len(color_ids)))

    seen: set[tuple[int, int]] = set()
    edges: list[tuple[int, int]] = []
    for lineno, fields in _records(edge_stream, edge_source):
        if len(fields) != 2:
            raise MalformedLine(f"expected '<label> <label>', got {len(fields)} fields", edge_source, lineno)
        a, b = fields
        for lab in (a, b):
            if lab not in index:
                raise UnknownNode(lab, edge_source, lineno)
        u, v = index[a], index[b]
        if u == v:
            raise SelfLoop(f"self-loop on {a!r}", edge_source, lineno)
        key = (u, v) if u < v else (v, u)
        if key in seen:
            raise DuplicateEdge(f"duplicate edge {a!r}-{b!r}", edge_source, lineno)
        seen.add(key)
        edges.append(key)
    return ColoredGraph(labels, colors, list(color_ids), edges)


def read_colored_graph(edge_path: str | Path, color_path: str | Path) -> ColoredGraph:
    with open(edge_path, encoding="utf-8") as ef, open(color_path, encoding="utf-8") as cf:
        return parse_colored_graph(ef, cf, edge_source=str(edge_path), color_source=str(color_path))


def write_colored_graph(g: ColoredGraph, edge_sink: TextIO, color_sink: TextIO) -> None:
    """Write ``g`` as TAB-separated edge and color files (colors in node-id order)."""
    labels = g.labels
    color_sink.writelines(f"{labels[u]}\t{g.color_label_of(u)}\n" for u in range(g.n))
    edge_sink.writelines(f"{labels[u]}\t{labels[v]}\n" for u, v in g.edges().tolist())


def save_colored_graph(g: ColoredGraph, edge_path: str | Path, color_path: str | Path) -> None:
    with open(edge_path, "w", encoding="utf-8") as ef, open(color_path, "w", encoding="utf-8") as cf:
        write_colored_graph(g, ef, cf)
