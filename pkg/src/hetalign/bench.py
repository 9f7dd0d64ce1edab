"""Scalability benchmark: self-align synthetic G(n, m) networks across worker counts."""

from __future__ import annotations

import csv
import json
import os
import platform
import statistics
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, TextIO

from .alignment import AlignmentBuilder, WeightSchema, identity_seeds
from .graph_core import GraphSpec, generate_er_colored

# name, edge count; every network has 9500 nodes and 2 colors
TABLE1 = [
    ("N1", 341000), ("N2", 342000), ("N3", 334000), ("N4", 320000),
    ("N5", 353000), ("N6", 333000), ("N7", 333000), ("N8", 338000),
    ("N9", 449000), ("N10", 406000), ("N11", 438000), ("N12", 416000),
]
TABLE1_NODES = 9500

CSV_HEADER = ["network", "n", "m", "workers", "rep", "seconds", "edges", "speedup"]

ASSUMPTIONS = [
    "identity seed pairs (each network aligned with itself)",
    "gap threshold delta defaults to 2",
]


class DeterminismViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class Network:
    name: str
    spec: GraphSpec


def table1_networks(scale: float = 1.0, seed: int = 0, num_colors: int = 2) -> list[Network]:
    """The twelve Table-1 networks, with n and m multiplied by ``scale``."""
    if not 0 < scale <= 1:
        raise ValueError("scale must lie in (0, 1]")
    n = round(TABLE1_NODES * scale)
    return [Network(name, GraphSpec(n, round(m * scale), num_colors, seed + k))
            for k, (name, m) in enumerate(TABLE1)]


@dataclass
class BenchConfig:
    networks: list[Network] = field(default_factory=table1_networks)
    worker_counts: list[int] = field(default_factory=lambda: [1, 2, 4, 8, 16])
    delta: int = 2
    repetitions: int = 3
    rng_seed: int = 0

    def __post_init__(self):
        if not self.worker_counts or any(w < 1 for w in self.worker_counts):
            raise ValueError("worker counts must all be >= 1")
        if list(self.worker_counts) != sorted(set(self.worker_counts)):
            raise ValueError("worker counts must be sorted ascending without repeats")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.delta < 1:
            raise ValueError("delta must be >= 1")

    @property
    def specs(self) -> list[GraphSpec]:
        return [net.spec for net in self.networks]


def load_config(path: str | Path, **overrides) -> BenchConfig:
    """Read ``key=value`` lines.

    Keys: ``scale``, ``seed``, ``colors``, ``networks`` (comma list of Table-1
    names), ``spec`` (repeatable ``name:n:m``, replaces the Table-1 suite),
    ``workers`` (comma list), ``delta``, ``repetitions``.
    """
    values: dict[str, str] = {}
    custom: list[tuple[str, int, int]] = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or not key:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            if key == "spec":
                try:
                    name, n, m = value.split(":")
                    custom.append((name, int(n), int(m)))
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: spec must be name:n:m") from None
            elif key in ("scale", "seed", "colors", "networks", "workers", "delta", "repetitions"):
                values[key] = value
            else:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
    values.update({k: str(v) for k, v in overrides.items() if v is not None})
    return make_config(custom=custom, **values)


def make_config(scale="1.0", seed="0", colors="2", networks=None, workers=None, delta="2",
                repetitions="3", custom=()) -> BenchConfig:
    seed_i, colors_i = int(seed), int(colors)
    if custom:
        nets = [Network(name, GraphSpec(n, m, colors_i, seed_i + k)) for k, (name, n, m) in enumerate(custom)]
    else:
        nets = table1_networks(float(scale), seed_i, colors_i)
    if networks:
        wanted = [x.strip() for x in str(networks).split(",") if x.strip()]
        known = {net.name for net in nets}
        unknown = [w for w in wanted if w not in known]
        if unknown:
            raise ValueError(f"unknown network(s): {', '.join(unknown)}")
        nets = [net for net in nets if net.name in wanted]
    kw = {}
    if workers:
        kw["worker_counts"] = [int(x) for x in str(workers).split(",") if x.strip()]
    return BenchConfig(nets, delta=int(delta), repetitions=int(repetitions), rng_seed=seed_i, **kw)


@dataclass
class BenchRow:
    network: str
    n: int
    m: int
    workers: int
    rep: int
    seconds: float
    edges: int
    speedup: float = 1.0


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def medians(self) -> dict[tuple[str, int], float]:
        groups: dict[tuple[str, int], list[float]] = {}
        for r in self.rows:
            groups.setdefault((r.network, r.workers), []).append(r.seconds)
        return {k: statistics.median(v) for k, v in groups.items()}

    def speedups(self) -> dict[tuple[str, int], float]:
        """Median time at the smallest worker count over median time at each count."""
        med = self.medians()
        base: dict[str, float] = {}
        for (net, w), t in sorted(med.items(), key=lambda kv: (kv[0][0], kv[0][1])):
            base.setdefault(net, t)
        return {(net, w): (base[net] / t if t > 0 else float("inf")) for (net, w), t in med.items()}

    def networks(self) -> list[str]:
        seen: dict[str, None] = {}
        for r in self.rows:
            seen.setdefault(r.network)
        return list(seen)


def machine_info() -> dict:
    try:
        import psutil
        physical = psutil.cpu_count(logical=False)
    except ImportError:  # pragma: no cover
        physical = None
    return {
        "platform": platform.platform(),
        "python": platform.python_version(),
        "logical_cpus": os.cpu_count(),
        "physical_cores": physical,
    }


def run_benchmark(cfg: BenchConfig, progress: Callable[[str], None] | None = None) -> BenchReport:
    """Time alignment-graph classification for every network and worker count.

    Generation, seeding and distance-cache warm-up happen before the timer
    starts; only :meth:`AlignmentBuilder.classify` is timed. Every worker count
    must produce the same alignment graph (content hash), otherwise
    :class:`DeterminismViolation` is raised.
    """
    report = BenchReport(meta={
        "assumptions": ASSUMPTIONS,
        "delta": cfg.delta,
        "repetitions": cfg.repetitions,
        "worker_counts": list(cfg.worker_counts),
        "machine": machine_info(),
        "hashes": {},
    })
    schema = WeightSchema(delta=cfg.delta)
    for net in cfg.networks:
        g = generate_er_colored(net.spec)
        seeds = identity_seeds(g)
        rows: list[BenchRow] = []
        reference = None
        with AlignmentBuilder(g, g, seeds, schema) as builder:
            builder.prepare()
            for w in cfg.worker_counts:
                for rep in range(cfg.repetitions):
                    t0 = time.perf_counter()
                    ag = builder.classify(w)
                    dt = time.perf_counter() - t0
                    digest = ag.content_hash()
                    if reference is None:
                        reference = (digest, ag.num_edges)
                    elif (digest, ag.num_edges) != reference:
                        raise DeterminismViolation(
                            f"{net.name}: workers={w} rep={rep} produced hash {digest[:16]} "
                            f"({ag.num_edges} edges), expected {reference[0][:16]} ({reference[1]} edges)")
                    rows.append(BenchRow(net.name, g.n, g.m, w, rep, dt, ag.num_edges))
                    if progress:
                        progress(f"{net.name} workers={w} rep={rep} {dt:.4f}s edges={ag.num_edges}")
        report.meta["hashes"][net.name] = reference[0]
        report.rows.extend(rows)
    sp = report.speedups()
    for r in report.rows:
        r.speedup = sp[(r.network, r.workers)]
    return report


def write_report(report: BenchReport, sink: TextIO, fmt: str = "csv") -> None:
    if fmt == "csv":
        writer = csv.writer(sink, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in report.rows:
            writer.writerow([r.network, r.n, r.m, r.workers, r.rep, f"{r.seconds:.6f}", r.edges,
                             f"{r.speedup:.4f}"])
    elif fmt == "json":
        json.dump({"meta": report.meta, "rows": [asdict(r) for r in report.rows]}, sink, indent=2)
        sink.write("\n")
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def format_speedup_table(report: BenchReport) -> str:
    sp = report.speedups()
    med = report.medians()
    workers = sorted({w for _, w in sp})
    lines = ["network  " + "".join(f"{f'w={w}':>16}" for w in workers)]
    for net in report.networks():
        cells = "".join(f"{med[(net, w)]:>8.3f}s x{sp[(net, w)]:<5.2f}" if (net, w) in sp else " " * 16
                        for w in workers)
        lines.append(f"{net:<9}{cells}")
    return "\n".join(lines)
