"""Alignment-graph construction: seed pairs become nodes, edges are classified
into match/mismatch/gap x homogeneous/heterogeneous and weighted."""

from __future__ import annotations

import enum
import hashlib
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np
import scipy.sparse as sp

from .distance import BEYOND, DistanceCache
from .graph_core import (ColoredGraph, GraphFormatError, MalformedLine, TextSource, UnknownNode,
                         _records)


class Kind(enum.IntEnum):
    MATCH = 0
    MISMATCH = 1
    GAP = 2


class Flavor(enum.IntEnum):
    HOMOGENEOUS = 0
    HETEROGENEOUS = 1


@dataclass(frozen=True, order=True)
class EdgeClass:
    kind: Kind
    flavor: Flavor

    @property
    def code(self) -> int:
        return 2 * int(self.kind) + int(self.flavor)

    @property
    def name(self) -> str:
        return f"{self.kind.name.lower()}_{'hom' if self.flavor is Flavor.HOMOGENEOUS else 'het'}"

    @classmethod
    def from_code(cls, code: int) -> "EdgeClass":
        return CLASSES[code]

    @classmethod
    def from_name(cls, name: str) -> "EdgeClass":
        return _BY_NAME[name]

    def __str__(self) -> str:
        return self.name


CLASSES: tuple[EdgeClass, ...] = tuple(EdgeClass(k, f) for k in Kind for f in Flavor)
_BY_NAME = {c.name: c for c in CLASSES}

MATCH_HOM, MATCH_HET, MISMATCH_HOM, MISMATCH_HET, GAP_HOM, GAP_HET = CLASSES

DEFAULT_WEIGHTS = {
    MATCH_HOM: 1.0,
    MATCH_HET: 0.9,
    MISMATCH_HOM: 0.5,
    MISMATCH_HET: 0.4,
    GAP_HOM: 0.2,
    GAP_HET: 0.1,
}


class SchemaError(ValueError):
    pass


class DuplicatePair(GraphFormatError):
    pass


class SimilarityOutOfRange(GraphFormatError):
    pass


class ColorInconsistentSeed(GraphFormatError):
    pass


class EmptySeedList(ValueError):
    pass


@dataclass(frozen=True)
class WeightSchema:
    """Class-to-weight table plus the gap threshold.

    ``gap_strict`` switches the gap window from ``2 <= d <= delta`` to
    ``2 <= d < delta``; pairs beyond the window are mismatches.
    """

    weights: dict = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    delta: int = 2
    similarity_blend: bool = False
    gap_strict: bool = False
    enforce_order: bool = True

    def __post_init__(self):
        missing = [c.name for c in CLASSES if c not in self.weights]
        if missing:
            raise SchemaError(f"missing weights for {', '.join(missing)}")
        for c in CLASSES:
            w = self.weights[c]
            if not (0.0 < w <= 1.0):
                raise SchemaError(f"weight for {c.name} must lie in (0, 1], got {w}")
        if self.delta < 1:
            raise SchemaError("delta must be >= 1")
        if self.enforce_order:
            ws = [self.weights[c] for c in CLASSES]
            if any(a <= b for a, b in zip(ws, ws[1:])):
                raise SchemaError(
                    "weights must decrease strictly match_hom > match_het > mismatch_hom > "
                    "mismatch_het > gap_hom > gap_het (disable ordering check to override)")

    @property
    def gap_bound(self) -> int:
        """Largest distance still counted as a gap."""
        return self.delta - 1 if self.gap_strict else self.delta

    def table(self) -> np.ndarray:
        return np.array([self.weights[c] for c in CLASSES], dtype=np.float64)

    @classmethod
    def parse(cls, stream: TextSource, source: str = "<schema>", **kwargs) -> "WeightSchema":
        weights = {}
        for lineno, fields in _records(stream, source):
            if len(fields) != 2:
                raise MalformedLine("expected '<class> <weight>'", source, lineno)
            name, value = fields
            if name not in _BY_NAME:
                raise MalformedLine(f"unknown edge class {name!r}", source, lineno)
            if _BY_NAME[name] in weights:
                raise MalformedLine(f"class {name!r} given twice", source, lineno)
            try:
                weights[_BY_NAME[name]] = float(value)
            except ValueError:
                raise MalformedLine(f"bad weight {value!r}", source, lineno) from None
        return cls(weights=weights, **kwargs)

    @classmethod
    def read(cls, path: str | Path, **kwargs) -> "WeightSchema":
        with open(path, encoding="utf-8") as f:
            return cls.parse(f, source=str(path), **kwargs)


@dataclass(frozen=True)
class SeedPair:
    u1: int
    u2: int
    similarity: float = 1.0


def parse_seed_pairs(stream: TextSource, g1: ColoredGraph, g2: ColoredGraph, *,
                     source: str = "<seeds>",
                     require_color_consistent: bool = False) -> list[SeedPair]:
    """Read ``<label1> <label2> [similarity]`` lines into seed pairs.

    Repeated pairs are an error rather than being dropped.
    """
    seeds: list[SeedPair] = []
    seen: set[tuple[int, int]] = set()
    for lineno, fields in _records(stream, source):
        if len(fields) not in (2, 3):
            raise MalformedLine("expected '<label1> <label2> [similarity]'", source, lineno)
        a, b = fields[0], fields[1]
        if a not in g1:
            raise UnknownNode(a, source, lineno)
        if b not in g2:
            raise UnknownNode(b, source, lineno)
        sim = 1.0
        if len(fields) == 3:
            try:
                sim = float(fields[2])
            except ValueError:
                raise MalformedLine(f"bad similarity {fields[2]!r}", source, lineno) from None
            if not 0.0 <= sim <= 1.0:
                raise SimilarityOutOfRange(f"similarity {sim} outside [0, 1]", source, lineno)
        u1, u2 = g1.node_id(a), g2.node_id(b)
        if (u1, u2) in seen:
            raise DuplicatePair(f"pair ({a}, {b}) listed twice", source, lineno)
        if require_color_consistent and g1.color_label_of(u1) != g2.color_label_of(u2):
            raise ColorInconsistentSeed(
                f"{a} is {g1.color_label_of(u1)!r} but {b} is {g2.color_label_of(u2)!r}", source, lineno)
        seen.add((u1, u2))
        seeds.append(SeedPair(u1, u2, sim))
    return seeds


def read_seed_pairs(path: str | Path, g1: ColoredGraph, g2: ColoredGraph, **kwargs) -> list[SeedPair]:
    with open(path, encoding="utf-8") as f:
        return parse_seed_pairs(f, g1, g2, source=str(path), **kwargs)


def identity_seeds(g1: ColoredGraph, g2: ColoredGraph | None = None) -> list[SeedPair]:
    """Pair every node of ``g1`` with the equally-labelled node of ``g2`` (itself by default)."""
    if g2 is None or g2 is g1:
        return [SeedPair(u, u, 1.0) for u in range(g1.n)]
    return [SeedPair(u, g2.node_id(lab), 1.0) for u, lab in enumerate(g1.labels) if lab in g2]


def classify_pair(a: SeedPair, b: SeedPair, g1: ColoredGraph, g2: ColoredGraph,
                  cache1: DistanceCache, cache2: DistanceCache) -> EdgeClass | None:
    """Edge class between two alignment nodes, or None when no edge is drawn.

    The gap window is ``2..cache.delta``; both caches must share it.
    """
    d1 = cache1.distance(a.u1, b.u1)
    d2 = cache2.distance(a.u2, b.u2)
    if d1 == 0 or d2 == 0:
        return None
    if d1 == 1 and d2 == 1:
        kind = Kind.MATCH
    elif d1 == 1 or d2 == 1:
        other = d2 if d1 == 1 else d1
        kind = Kind.MISMATCH if other is BEYOND else Kind.GAP
    else:
        return None
    colors = {g1.color_label_of(a.u1), g1.color_label_of(b.u1),
              g2.color_label_of(a.u2), g2.color_label_of(b.u2)}
    flavor = Flavor.HOMOGENEOUS if len(colors) == 1 else Flavor.HETEROGENEOUS
    return EdgeClass(kind, flavor)


def edge_weight(cls: EdgeClass, a: SeedPair, b: SeedPair, schema: WeightSchema) -> float:
    """Class weight, optionally scaled by the mean similarity of the two seeds.

    With blending, two zero-similarity seeds give a zero-weight edge; it is kept.
    """
    w = schema.weights[cls]
    if schema.similarity_blend:
        return w * ((a.similarity + b.similarity) / 2)
    return w


class AlignmentGraph:
    """Weighted alignment graph stored as sorted edge triples plus an adjacency index.

    Edge ``k`` joins ``src[k] < dst[k]`` with ``weight[k]`` and class code
    ``cls[k]`` (see :data:`CLASSES`); edges are sorted by ``(src, dst)``.
    """

    def __init__(self, nodes: Sequence[SeedPair], src, dst, weight, cls,
                 labels: Sequence[tuple[str, str]] | None = None):
        self.nodes = list(nodes)
        self.labels = list(labels) if labels is not None else [(str(s.u1), str(s.u2)) for s in self.nodes]
        self.src = np.asarray(src, dtype=np.int64)
        self.dst = np.asarray(dst, dtype=np.int64)
        self.weight = np.asarray(weight, dtype=np.float64)
        self.cls = np.asarray(cls, dtype=np.int8)
        self._csr = None

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return int(self.src.size)

    def edges(self) -> list[tuple[int, int, float, EdgeClass]]:
        return [(i, j, w, CLASSES[c]) for i, j, w, c in
                zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist(), self.cls.tolist())]

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric weighted adjacency matrix (no diagonal)."""
        if self._csr is None:
            n = self.n
            rows = np.concatenate([self.src, self.dst])
            cols = np.concatenate([self.dst, self.src])
            vals = np.concatenate([self.weight, self.weight])
            self._csr = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
            self._csr.sort_indices()
        return self._csr

    def neighbors(self, i: int) -> np.ndarray:
        a = self.adjacency()
        return a.indices[a.indptr[i]:a.indptr[i + 1]]

    def class_histogram(self) -> dict[str, int]:
        counts = np.bincount(self.cls, minlength=len(CLASSES))
        return {c.name: int(counts[c.code]) for c in CLASSES}

    def total_weight(self) -> float:
        return math.fsum(self.weight.tolist())

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.int64(self.n).tobytes())
        h.update(np.array([(s.u1, s.u2) for s in self.nodes], dtype="<i8").tobytes())
        h.update(np.array([s.similarity for s in self.nodes], dtype="<f8").tobytes())
        for arr, dt in ((self.src, "<i8"), (self.dst, "<i8"), (self.weight, "<f8"), (self.cls, "i1")):
            h.update(arr.astype(dt).tobytes())
        return h.hexdigest()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AlignmentGraph):
            return NotImplemented
        return (self.nodes == other.nodes and np.array_equal(self.src, other.src)
                and np.array_equal(self.dst, other.dst) and np.array_equal(self.cls, other.cls)
                and np.array_equal(self.weight, other.weight))

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"AlignmentGraph(nodes={self.n}, edges={self.num_edges})"


# --- parallel construction -------------------------------------------------

_STATE: "AlignmentBuilder | None" = None


def _install_state(builder: "AlignmentBuilder") -> None:
    global _STATE
    _STATE = builder


def _run_block(bounds: tuple[int, int]):
    return _STATE._classify_block(*bounds)


class AlignmentBuilder:
    """Two-phase builder: :meth:`prepare` (sequential warm-up) then :meth:`classify`.

    ``classify`` splits the seed index range into contiguous row blocks; each
    block yields its edges sorted by ``(i, j)`` and blocks are concatenated in
    order, so the output does not depend on the worker count. Worker pools are
    kept alive between ``classify`` calls until :meth:`close`.
    """

    def __init__(self, g1: ColoredGraph, g2: ColoredGraph, seeds: Sequence[SeedPair],
                 schema: WeightSchema | None = None):
        if len(seeds) == 0:
            raise EmptySeedList("seed list is empty")
        self.g1, self.g2 = g1, g2
        self.seeds = list(seeds)
        self.schema = schema or WeightSchema()
        L = len(self.seeds)
        self.s1 = np.fromiter((s.u1 for s in self.seeds), dtype=np.int64, count=L)
        self.s2 = np.fromiter((s.u2 for s in self.seeds), dtype=np.int64, count=L)
        self.sim = np.fromiter((s.similarity for s in self.seeds), dtype=np.float64, count=L)
        bound = max(self.schema.gap_bound, 1)
        self.cache1 = DistanceCache(g1, bound)
        self.cache2 = self.cache1 if g2 is g1 else DistanceCache(g2, bound)
        self._prepared = False
        self._pools: dict[int, object] = {}

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self) -> None:
        for pool in self._pools.values():
            pool.shutdown()
        self._pools.clear()

    def _pool(self, workers: int):
        pool = self._pools.get(workers)
        if pool is None:
            # with fork the builder reaches the workers by inheritance, not pickling
            if "fork" in multiprocessing.get_all_start_methods():
                pool = ProcessPoolExecutor(max_workers=workers, mp_context=multiprocessing.get_context("fork"),
                                           initializer=_install_state, initargs=(self,))
            else:
                pool = ThreadPoolExecutor(max_workers=workers, initializer=_install_state, initargs=(self,))
            self._pools[workers] = pool
        return pool

    def prepare(self) -> None:
        """Warm both distance caches for every seed-referenced node and freeze them."""
        if self._prepared:
            return
        g1, g2, L = self.g1, self.g2, len(self.seeds)
        palette: dict[str, int] = {}
        c1 = np.array([palette.setdefault(x, len(palette)) for x in g1.color_labels], dtype=np.int32)
        c2 = np.array([palette.setdefault(x, len(palette)) for x in g2.color_labels], dtype=np.int32)
        self.col1 = c1[g1.colors][self.s1] if g1.n else np.empty(0, np.int32)
        self.col2 = c2[g2.colors][self.s2] if g2.n else np.empty(0, np.int32)
        self.adj1 = sp.csr_matrix((np.ones(g1.indices.size, np.int8), g1.indices, g1.indptr), shape=(g1.n, g1.n))
        self.adj2 = sp.csr_matrix((np.ones(g2.indices.size, np.int8), g2.indices, g2.indptr), shape=(g2.n, g2.n))
        # node -> seed incidence, so that A[s[i]] @ P gives seeds adjacent to seed i
        ones = np.ones(L, np.int8)
        self.inc1 = sp.csr_matrix((ones, (self.s1, np.arange(L))), shape=(g1.n, L))
        self.inc2 = sp.csr_matrix((ones, (self.s2, np.arange(L))), shape=(g2.n, L))
        self.cache1.warm(np.unique(self.s1))
        self.cache2.warm(np.unique(self.s2))
        self.cache1.freeze()
        self.cache2.freeze()
        self.table = self.schema.table()
        self._prepared = True

    def blocks(self, count: int) -> list[tuple[int, int]]:
        """Split ``[0, L)`` into at most ``count`` contiguous row ranges of similar work."""
        L = len(self.seeds)
        count = max(1, min(count, L))
        if count == 1:
            return [(0, L)]
        deg1 = np.diff(self.g1.indptr)[self.s1]
        deg2 = np.diff(self.g2.indptr)[self.s2]
        work = (deg1 + deg2 + 1) * (L - np.arange(L))
        cum = np.cumsum(work, dtype=np.float64)
        cuts = np.searchsorted(cum, cum[-1] * np.arange(1, count) / count)
        edges = np.unique(np.concatenate([[0], cuts, [L]]))
        return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]

    def _classify_block(self, lo: int, hi: int):
        L = len(self.seeds)
        keys = []
        for adj, s, inc in ((self.adj1, self.s1, self.inc1), (self.adj2, self.s2, self.inc2)):
            hits = (adj[s[lo:hi]] @ inc).tocoo()
            i = hits.row.astype(np.int64) + lo
            j = hits.col.astype(np.int64)
            up = j > i
            keys.append(np.sort(i[up] * L + j[up]))
        k1, k2 = keys
        allk = np.union1d(k1, k2)
        on1 = _member(allk, k1)
        on2 = _member(allk, k2)
        i, j = allk // L, allk % L

        kind = np.full(allk.size, -1, dtype=np.int8)
        kind[on1 & on2] = Kind.MATCH
        gap_hi = self.schema.gap_bound
        for only, cache, s in ((on1 & ~on2, self.cache2, self.s2), (on2 & ~on1, self.cache1, self.s1)):
            idx = np.flatnonzero(only)
            if idx.size == 0:
                continue
            d = cache.distances(s[i[idx]], s[j[idx]])
            kind[idx[(d >= 2) & (d <= gap_hi)]] = Kind.GAP
            kind[idx[d > gap_hi]] = Kind.MISMATCH
            # d == 0: the two alignment nodes share a node on this side, no edge

        keep = kind >= 0
        i, j, kind = i[keep], j[keep], kind[keep]
        c = self.col1[i]
        hom = (c == self.col1[j]) & (c == self.col2[i]) & (c == self.col2[j])
        code = (2 * kind + (~hom).astype(np.int8)).astype(np.int8)
        w = self.table[code]
        if self.schema.similarity_blend:
            w = w * ((self.sim[i] + self.sim[j]) / 2)
        return i, j, w, code

    def classify(self, workers: int = 1) -> AlignmentGraph:
        """Classify every unordered seed pair; the timed, parallel phase."""
        if workers < 1:
            raise ValueError("workers must be >= 1")
        if not self._prepared:
            raise RuntimeError("prepare() must run before classify()")
        blocks = self.blocks(1 if workers == 1 else 4 * workers)
        if workers == 1:
            parts = [self._classify_block(lo, hi) for lo, hi in blocks]
        else:
            parts = list(self._pool(workers).map(_run_block, blocks))
        src, dst, w, code = (np.concatenate([p[k] for p in parts]) for k in range(4))
        labels = [(self.g1.labels[s.u1], self.g2.labels[s.u2]) for s in self.seeds]
        return AlignmentGraph(self.seeds, src, dst, w, code, labels)


def _member(sorted_all: np.ndarray, sorted_sub: np.ndarray) -> np.ndarray:
    if sorted_sub.size == 0:
        return np.zeros(sorted_all.size, dtype=bool)
    k = np.minimum(np.searchsorted(sorted_sub, sorted_all), sorted_sub.size - 1)
    return sorted_sub[k] == sorted_all


def build_alignment_graph(g1: ColoredGraph, g2: ColoredGraph, seeds: Sequence[SeedPair],
                          schema: WeightSchema | None = None, workers: int = 1) -> AlignmentGraph:
    """Build the weighted alignment graph of ``g1`` and ``g2`` over ``seeds``.

    Nodes are the seeds in input order. An edge joins seeds ``i < j`` whenever
    :func:`classify_pair` assigns them a class; its weight comes from
    :func:`edge_weight`. The result is identical for every ``workers`` value.
    """
    with AlignmentBuilder(g1, g2, seeds, schema) as builder:
        builder.prepare()
        return builder.classify(workers)


# --- file format -----------------------------------------------------------

def write_alignment_graph(ag: AlignmentGraph, sink: TextIO) -> None:
    """Node table (``nodes <L>`` then ``<i> <label1> <label2> <similarity>``)
    followed by the edge list (``edges <E>`` then ``<i> <j> <weight> <class>``)."""
    sink.write("# alignment graph\n")
    sink.write(f"nodes\t{ag.n}\n")
    for i, (s, (l1, l2)) in enumerate(zip(ag.nodes, ag.labels)):
        sink.write(f"{i}\t{l1}\t{l2}\t{s.similarity!r}\n")
    sink.write(f"edges\t{ag.num_edges}\n")
    names = [c.name for c in CLASSES]
    sink.writelines(f"{i}\t{j}\t{w!r}\t{names[c]}\n" for i, j, w, c in
                    zip(ag.src.tolist(), ag.dst.tolist(), ag.weight.tolist(), ag.cls.tolist()))


def save_alignment_graph(ag: AlignmentGraph, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        write_alignment_graph(ag, f)


def parse_alignment_graph(stream: TextSource, source: str = "<alignment>") -> AlignmentGraph:
    records = _records(stream, source)

    def section(expected: str) -> int:
        try:
            lineno, fields = next(records)
        except StopIteration:
            raise MalformedLine(f"missing '{expected}' section", source) from None
        if len(fields) != 2 or fields[0] != expected or not fields[1].isdigit():
            raise MalformedLine(f"expected '{expected} <count>'", source, lineno)
        return int(fields[1])

    n = section("nodes")
    nodes, labels = [], []
    ids1: dict[str, int] = {}
    ids2: dict[str, int] = {}
    for expect in range(n):
        lineno, fields = next(records, (None, None))
        if fields is None:
            raise MalformedLine(f"node table ends after {expect} of {n} rows", source)
        if len(fields) != 4 or fields[0] != str(expect):
            raise MalformedLine(f"expected node row '{expect} <label1> <label2> <similarity>'", source, lineno)
        l1, l2 = fields[1], fields[2]
        try:
            sim = float(fields[3])
        except ValueError:
            raise MalformedLine(f"bad similarity {fields[3]!r}", source, lineno) from None
        nodes.append(SeedPair(ids1.setdefault(l1, len(ids1)), ids2.setdefault(l2, len(ids2)), sim))
        labels.append((l1, l2))
    m = section("edges")
    src, dst, wts, cls = [], [], [], []
    for _ in range(m):
        lineno, fields = next(records, (None, None))
        if fields is None:
            raise MalformedLine(f"edge list ends after {len(src)} of {m} rows", source)
        if len(fields) != 4:
            raise MalformedLine("expected '<i> <j> <weight> <class>'", source, lineno)
        try:
            i, j, w = int(fields[0]), int(fields[1]), float(fields[2])
        except ValueError:
            raise MalformedLine("bad edge row", source, lineno) from None
        if not (0 <= i < j < n):
            raise MalformedLine(f"edge ({i}, {j}) needs 0 <= i < j < {n}", source, lineno)
        if not (0.0 <= w <= 1.0):
            raise MalformedLine(f"edge weight {w} outside [0, 1]", source, lineno)
        if fields[3] not in _BY_NAME:
            raise MalformedLine(f"unknown edge class {fields[3]!r}", source, lineno)
        src.append(i)
        dst.append(j)
        wts.append(w)
        cls.append(_BY_NAME[fields[3]].code)
    extra = next(records, None)
    if extra is not None:
        raise MalformedLine("trailing data after edge list", source, extra[0])
    order = np.lexsort((np.array(dst, dtype=np.int64), np.array(src, dtype=np.int64)))
    src_a, dst_a = np.array(src, dtype=np.int64)[order], np.array(dst, dtype=np.int64)[order]
    if src_a.size > 1 and np.any((np.diff(src_a) == 0) & (np.diff(dst_a) == 0)):
        raise MalformedLine("duplicate edge in alignment graph", source)
    return AlignmentGraph(nodes, src_a, dst_a, np.array(wts, dtype=np.float64)[order],
                          np.array(cls, dtype=np.int8)[order], labels)


def read_alignment_graph(path: str | Path) -> AlignmentGraph:
    with open(path, encoding="utf-8") as f:
        return parse_alignment_graph(f, source=str(path))


__all__ = [
    "Kind", "Flavor", "EdgeClass", "CLASSES", "DEFAULT_WEIGHTS", "WeightSchema", "SeedPair",
    "AlignmentGraph", "AlignmentBuilder", "parse_seed_pairs", "read_seed_pairs", "identity_seeds",
    "classify_pair", "edge_weight", "build_alignment_graph", "write_alignment_graph",
    "save_alignment_graph", "parse_alignment_graph", "read_alignment_graph",
    "SchemaError", "DuplicatePair", "SimilarityOutOfRange", "ColorInconsistentSeed", "EmptySeedList",
]
