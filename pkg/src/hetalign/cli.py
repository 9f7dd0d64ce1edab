"""Command-line entry point: ``hetalign {generate,align,cluster,bench}``.

Exit status: 0 success, 1 I/O failure, 2 invalid input or parameters,
3 determinism violation in ``bench``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections import Counter
from pathlib import Path

from . import alignment, bench, mcl
from .graph_core import GraphSpec, generate_er_colored, read_colored_graph, save_colored_graph

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_NONDETERMINISTIC = 0, 1, 2, 3


class _Usage(Exception):
    """Raised for flag values that parse but violate a documented range."""


def cmd_generate(args: argparse.Namespace) -> int:
    spec = GraphSpec(args.nodes, args.edges, args.colors, args.seed)
    g = generate_er_colored(spec)
    save_colored_graph(g, args.out_edges, args.out_colors)
    print(f"nodes {g.n}")
    print(f"edges {g.m}")
    for label, count in g.color_histogram().items():
        print(f"color {label} {count}")
    return EXIT_OK


def cmd_align(args: argparse.Namespace) -> int:
    if args.delta < 1:
        raise _Usage("--delta must be >= 1")
    if args.workers < 1:
        raise _Usage("--workers must be >= 1")
    g1 = read_colored_graph(args.g1_edges, args.g1_colors)
    g2 = read_colored_graph(args.g2_edges, args.g2_colors)
    seeds = alignment.read_seed_pairs(args.seeds, g1, g2,
                                      require_color_consistent=args.require_color_consistent_seeds)
    opts = dict(delta=args.delta, similarity_blend=args.blend, gap_strict=args.gap_strict,
                enforce_order=not args.allow_unordered_weights)
    schema = alignment.WeightSchema.read(args.schema, **opts) if args.schema else alignment.WeightSchema(**opts)
    ag = alignment.build_alignment_graph(g1, g2, seeds, schema, workers=args.workers)
    alignment.save_alignment_graph(ag, args.out)
    print(f"nodes {ag.n}")
    print(f"edges {ag.num_edges}")
    for name, count in ag.class_histogram().items():
        print(f"{name} {count}")
    print(f"total_weight {ag.total_weight():.6f}")
    return EXIT_OK


def cmd_cluster(args: argparse.Namespace) -> int:
    try:
        params = mcl.MclParams(
            inflation=args.inflation, expansion=args.expansion, prune_threshold=args.prune_threshold,
            max_iters=args.max_iters, convergence_eps=args.eps, add_self_loops=not args.no_self_loops,
            self_loop_weight=args.self_loop_weight)
    except ValueError as exc:
        raise _Usage(str(exc)) from None
    ag = alignment.read_alignment_graph(args.alignment)
    if ag.n == 0:
        raise alignment.EmptySeedList(f"{args.alignment}: alignment graph has no nodes (empty seed list?)")
    cs = mcl.mcl_cluster(ag, params)
    mcl.save_clusters(cs, args.out)
    print(f"clusters {len(cs)}")
    sizes = Counter(cs.sizes())
    print("sizes " + " ".join(f"{size}x{count}" for size, count in sorted(sizes.items())))
    print(f"iterations {cs.iterations}")
    print(f"converged {'yes' if cs.converged else 'no'}")
    print(f"intra_weight {cs.intra_weight:.6f}")
    for w in cs.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    overrides = dict(scale=args.scale, workers=args.workers, delta=args.delta, repetitions=args.repetitions,
                     seed=args.seed, networks=args.networks)
    if args.config:
        cfg = bench.load_config(args.config, **overrides)
    else:
        cfg = bench.make_config(**{k: str(v) for k, v in overrides.items() if v is not None})
    progress = print if args.verbose else None
    for net in cfg.networks:
        print(f"{net.name}: n={net.spec.n} m={net.spec.m} colors={net.spec.num_colors} seed={net.spec.rng_seed}")
    report = bench.run_benchmark(cfg, progress=progress)
    out = Path(args.out)
    with open(out.with_suffix(".csv"), "w", encoding="utf-8", newline="") as f:
        bench.write_report(report, f, "csv")
    with open(out.with_suffix(".json"), "w", encoding="utf-8") as f:
        bench.write_report(report, f, "json")
    print("assumptions: " + "; ".join(bench.ASSUMPTIONS))
    print(bench.format_speedup_table(report))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hetalign", description=__doc__.splitlines()[0])
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a colored G(n, m) graph")
    g.add_argument("--nodes", type=int, required=True)
    g.add_argument("--edges", type=int, required=True)
    g.add_argument("--colors", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out-edges", required=True)
    g.add_argument("--out-colors", required=True)
    g.set_defaults(func=cmd_generate)

    a = sub.add_parser("align", help="build the weighted alignment graph")
    for side in ("g1", "g2"):
        a.add_argument(f"--{side}-edges", required=True)
        a.add_argument(f"--{side}-colors", required=True)
    a.add_argument("--seeds", required=True)
    a.add_argument("--delta", type=int, required=True, help="gap threshold (hops)")
    a.add_argument("--out", required=True)
    a.add_argument("--schema", help="file of '<class> <weight>' lines")
    a.add_argument("--workers", type=int, default=1)
    a.add_argument("--blend", action="store_true", help="scale weights by mean seed similarity")
    a.add_argument("--gap-strict", action="store_true", help="gaps need distance < delta instead of <= delta")
    a.add_argument("--require-color-consistent-seeds", action="store_true")
    a.add_argument("--allow-unordered-weights", action="store_true")
    a.set_defaults(func=cmd_align)

    c = sub.add_parser("cluster", help="Markov-cluster an alignment graph")
    c.add_argument("--alignment", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--inflation", type=float, default=2.0)
    c.add_argument("--expansion", type=int, default=2)
    c.add_argument("--prune-threshold", type=float, default=1e-5)
    c.add_argument("--max-iters", type=int, default=100)
    c.add_argument("--eps", type=float, default=1e-6)
    c.add_argument("--no-self-loops", action="store_true")
    c.add_argument("--self-loop-weight", type=float, default=1.0)
    c.set_defaults(func=cmd_cluster)

    b = sub.add_parser("bench", help="self-alignment scalability benchmark")
    b.add_argument("--config", help="file of key=value lines")
    b.add_argument("--scale", type=float, help="fraction applied to n and m of the Table-1 suite")
    b.add_argument("--workers", help="comma-separated worker counts (default 1,2,4,8,16)")
    b.add_argument("--delta", type=int)
    b.add_argument("--repetitions", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--networks", help="comma-separated subset, e.g. N1,N9")
    b.add_argument("--out", default="bench_report", help="output path stem for .csv and .json")
    b.add_argument("-v", "--verbose", action="store_true")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except bench.DeterminismViolation as exc:
        print(f"error: determinism violation: {exc}", file=sys.stderr)
        return EXIT_NONDETERMINISTIC
    except _Usage as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
