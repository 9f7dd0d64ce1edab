"""Bounded hop distances with per-source memoized, depth-truncated BFS tables."""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from .graph_core import ColoredGraph

#: Returned by :func:`bounded_distance` when two nodes are more than ``delta`` hops apart.
BEYOND = math.inf


class InvalidNode(IndexError):
    pass


class ColdSourceError(RuntimeError):
    """A frozen cache was asked about a source it never precomputed."""


def bfs_frontiers(g: ColoredGraph, source: int, depth: int) -> list[np.ndarray]:
    """Sorted node arrays at exact distance 1, 2, ..., ``depth`` from ``source``."""
    seen = np.zeros(g.n, dtype=bool)
    seen[source] = True
    frontier = np.array([source], dtype=np.int64)
    levels = []
    for _ in range(depth):
        if frontier.size == 0:
            levels.append(frontier.astype(np.int32))
            continue
        starts, stops = g.indptr[frontier], g.indptr[frontier + 1]
        lens = stops - starts
        # gather all neighbor slices in one shot
        offs = np.repeat(starts - np.cumsum(lens) + lens, lens) + np.arange(lens.sum())
        nxt = g.indices[offs]
        nxt = nxt[~seen[nxt]]
        seen[nxt] = True
        nxt = np.flatnonzero(np.bincount(nxt, minlength=g.n)) if nxt.size else nxt.astype(np.int64)
        levels.append(nxt.astype(np.int32))
        frontier = nxt
    return levels


class DistanceCache:
    """Answers hop-distance queries up to ``delta`` for one graph.

    Distances 0 and 1 come straight from the adjacency structure. For larger
    distances the cache stores, per source, the sorted nodes at distance
    ``2..delta`` together with their levels. Tables are filled lazily until
    :meth:`freeze` is called; a frozen cache is read-only and raises
    :class:`ColdSourceError` for sources that were not warmed.
    """

    def __init__(self, graph: ColoredGraph, delta: int = 2):
        if delta < 1:
            raise ValueError("delta must be >= 1")
        self.graph = graph
        self.delta = int(delta)
        self._tables: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self.frozen = False

    def _check(self, u: int) -> None:
        if not 0 <= u < self.graph.n:
            raise InvalidNode(f"node id {u} outside [0, {self.graph.n})")

    def _table(self, source: int) -> tuple[np.ndarray, np.ndarray]:
        tab = self._tables.get(source)
        if tab is None:
            if self.frozen:
                raise ColdSourceError(f"source {source} was not warmed before freezing")
            levels = bfs_frontiers(self.graph, source, self.delta)[1:]
            if levels:
                nodes = np.concatenate(levels)
                lv = np.concatenate([np.full(a.size, k + 2, dtype=np.int8) for k, a in enumerate(levels)])
                order = np.argsort(nodes, kind="stable")
                tab = (nodes[order], lv[order])
            else:
                tab = (np.empty(0, np.int32), np.empty(0, np.int8))
            self._tables[source] = tab
        return tab

    def warm(self, sources: Iterable[int] | None = None) -> None:
        """Precompute tables for ``sources`` (all nodes when omitted)."""
        if self.delta < 2:
            return
        if sources is None:
            sources = range(self.graph.n)
        for s in sources:
            self._table(int(s))

    def freeze(self) -> None:
        self.frozen = True

    @property
    def warmed(self) -> int:
        return len(self._tables)

    def distance(self, u: int, v: int) -> int | float:
        self._check(u)
        self._check(v)
        if u == v:
            return 0
        if u > v:
            u, v = v, u
        if self.graph.has_edge(u, v):
            return 1
        if self.delta < 2:
            return BEYOND
        nodes, lv = self._table(u)
        k = np.searchsorted(nodes, v)
        if k < nodes.size and nodes[k] == v:
            return int(lv[k])
        return BEYOND

    def distances(self, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`distance`; ``delta + 1`` encodes Beyond in the int8 result."""
        us = np.asarray(us, dtype=np.int64)
        vs = np.asarray(vs, dtype=np.int64)
        lo, hi = np.minimum(us, vs), np.maximum(us, vs)
        out = np.full(lo.size, self.delta + 1, dtype=np.int8)
        out[lo == hi] = 0
        g = self.graph
        todo = np.flatnonzero(lo != hi)
        if todo.size == 0:
            return out
        order = todo[np.argsort(lo[todo], kind="stable")]
        src = lo[order]
        cuts = np.flatnonzero(np.diff(src)) + 1
        for grp in np.split(order, cuts):
            s = int(lo[grp[0]])
            targets = hi[grp]
            row = g.indices[g.indptr[s]:g.indptr[s + 1]]
            k = np.minimum(np.searchsorted(row, targets), max(row.size - 1, 0))
            adj = (row[k] == targets) if row.size else np.zeros(targets.size, bool)
            out[grp[adj]] = 1
            if self.delta >= 2 and not adj.all():
                rest = grp[~adj]
                nodes, lv = self._table(s)
                if nodes.size:
                    t = hi[rest]
                    k = np.minimum(np.searchsorted(nodes, t), nodes.size - 1)
                    hit = nodes[k] == t
                    out[rest[hit]] = lv[k[hit]]
        return out


def bounded_distance(cache: DistanceCache, u: int, v: int) -> int | float:
    """Exact hop distance between ``u`` and ``v`` if at most ``cache.delta``, else :data:`BEYOND`."""
    return cache.distance(u, v)
