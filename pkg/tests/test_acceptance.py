"""Acceptance gate: one test per exit criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s``.
"""

import itertools
import os
import statistics
import time

import numpy as np
import pytest

from hetalign.alignment import (CLASSES, DEFAULT_WEIGHTS, AlignmentBuilder, Flavor, Kind, WeightSchema,
                                build_alignment_graph, classify_pair, identity_seeds)
from hetalign.bench import BenchConfig, machine_info, table1_networks
from hetalign.distance import DistanceCache
from hetalign.graph_core import GraphSpec, generate_er_colored
from hetalign.mcl import MclParams, expand, inflate, interpret, mcl_cluster, prune, to_stochastic

from oracles import (adjacency_of, brute_classify, dense_mcl, floyd_warshall, graph_from_weighted_edges,
                     random_connected, random_instance, two_cliques_with_bridge)

TABLE1_EDGES = [341000, 342000, 334000, 320000, 353000, 333000, 333000, 338000,
                449000, 406000, 438000, 416000]


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail="", status=None):
        status = status or ("PASS" if ok else "FAIL")
        with capsys.disabled():
            print(f"\n[criterion {number}] {status} {title}" + (f" :: {detail}" if detail else ""))
        return ok
    return emit


def test_c1_weight_schema(report):
    t0 = time.perf_counter()
    expected = {"match_hom": 1.0, "match_het": 0.9, "mismatch_hom": 0.5,
                "mismatch_het": 0.4, "gap_hom": 0.2, "gap_het": 0.1}
    got = {c.name: DEFAULT_WEIGHTS[c] for c in CLASSES}
    schema_got = {c.name: w for c, w in zip(CLASSES, WeightSchema().table().tolist())}
    dt = time.perf_counter() - t0
    ok = got == expected and schema_got == expected and dt < 1
    assert report(1, "default class weights 1.0/0.9/0.5/0.4/0.2/0.1", ok, f"{got} in {dt:.3f}s")


def test_c2_classification_oracle(report):
    t0 = time.perf_counter()
    pairs = mismatched = 0
    rng = np.random.default_rng(2)
    for inst in range(50):
        g1, g2, seeds = random_instance(1000 + inst, max_n=40, max_m=120, colors=(2, 3), max_seeds=50)
        assert g1.n <= 40 and g2.n <= 40 and g1.m <= 120 and g2.m <= 120 and len(seeds) <= 50
        delta = int(rng.integers(1, 4))
        c1, c2 = DistanceCache(g1, delta), DistanceCache(g2, delta)
        d1, d2 = floyd_warshall(g1), floyd_warshall(g2)
        for a, b in itertools.combinations(seeds, 2):
            pairs += 1
            if classify_pair(a, b, g1, g2, c1, c2) != brute_classify(a, b, g1, g2, d1, d2, delta):
                mismatched += 1
    dt = time.perf_counter() - t0
    ok = mismatched == 0 and pairs > 0 and dt < 30
    assert report(2, "classify_pair == Floyd-Warshall brute force on 50 instances", ok,
                  f"{pairs - mismatched}/{pairs} pairs agree in {dt:.2f}s")


def test_c3_self_alignment(report):
    t0 = time.perf_counter()
    failures = []
    rng = np.random.default_rng(3)
    for k in range(20):
        n = int(rng.integers(2, 201))
        g = random_connected(300 + k, n, int(rng.integers(0, 2 * n)), colors=int(rng.integers(1, 4)))
        ag = build_alignment_graph(g, g, identity_seeds(g))
        got = {(i, j): c for i, j, _, c in ag.edges()}
        if ag.num_edges != g.m:
            failures.append((k, "edge count", ag.num_edges, g.m))
            continue
        for u, v in g.edges().tolist():
            c = got.get((u, v))
            hom = g.colors[u] == g.colors[v]
            if c is None or c.kind is not Kind.MATCH or (c.flavor is Flavor.HOMOGENEOUS) != hom:
                failures.append((k, u, v, c))
    dt = time.perf_counter() - t0
    ok = not failures and dt < 10
    assert report(3, "self-alignment of 20 connected graphs: m Match edges, flavor by color", ok,
                  f"failures={failures[:3]} in {dt:.2f}s")


def _trace_column_sums(ag, params):
    """Worst column-sum error across every pipeline step, replaying the MCL loop."""
    worst = 0.0
    m = to_stochastic(ag, params)
    worst = max(worst, np.abs(m.column_sums() - 1).max())
    for _ in range(params.max_iters):
        e = expand(m, params.expansion)
        i = inflate(e, params.inflation)
        p = prune(i, params.prune_threshold)
        for step in (e, i, p):
            worst = max(worst, np.abs(step.column_sums() - 1).max())
        done = p.max_abs_diff(m) < params.convergence_eps
        m = p
        if done:
            break
    return worst, interpret(m)


def test_c4_mcl_correctness(report):
    t0 = time.perf_counter()
    params = MclParams()
    k5 = graph_from_weighted_edges(5, [(i, j, 1.0) for i, j in itertools.combinations(range(5), 2)])
    three = graph_from_weighted_edges(
        12, [(i, j, 1.0) for i, j in itertools.combinations(range(4), 2)]
        + [(4 + i, 4 + j, 0.9) for i, j in itertools.combinations(range(5), 2)]
        + [(9, 10, 0.5), (10, 11, 0.4)])
    comp = [0] * 4 + [1] * 5 + [2] * 3
    fixtures = {
        "two cliques + bridge": (two_cliques_with_bridge(), lambda c: c == [[0, 1, 2, 3], [4, 5, 6, 7]]),
        "K5": (k5, lambda c: c == [[0, 1, 2, 3, 4]]),
        "edgeless": (graph_from_weighted_edges(7, []), lambda c: c == [[i] for i in range(7)]),
        "3 components": (three, lambda c: all(len({comp[i] for i in cl}) == 1 for cl in c)),
    }
    rng = np.random.default_rng(4)
    for k in range(20):
        n = int(rng.integers(1, 33))
        edges = [(i, j, float(rng.choice([1, .9, .5, .4, .2, .1])))
                 for i, j in itertools.combinations(range(n), 2) if rng.random() < 0.15]
        fixtures[f"random-{k}"] = (graph_from_weighted_edges(n, edges), lambda c: True)
    details = []
    ok = True
    worst_sum = 0.0
    for name, (ag, check) in fixtures.items():
        assert ag.n <= 32
        sparse = mcl_cluster(ag, params)
        dense = dense_mcl(adjacency_of(ag))
        worst, traced = _trace_column_sums(ag, params)
        worst_sum = max(worst_sum, worst)
        good = sparse.clusters == dense == traced and check(sparse.clusters) and sparse.is_partition(ag.n)
        ok &= good
        if not good:
            details.append(f"{name}: sparse={sparse.clusters} dense={dense}")
    dt = time.perf_counter() - t0
    ok = ok and worst_sum <= 1e-9 and dt < 10
    assert report(4, "sparse MCL == dense reference; column sums 1 +/- 1e-9", ok,
                  f"{len(fixtures)} fixtures, max |colsum-1|={worst_sum:.1e}, {dt:.2f}s {details[:2]}")


def test_c5_parallel_determinism(report):
    t0 = time.perf_counter()
    n1 = table1_networks(scale=0.1)[0]
    assert (n1.spec.n, n1.spec.m) == (950, 34100)
    g = generate_er_colored(n1.spec)
    hashes = {}
    with AlignmentBuilder(g, g, identity_seeds(g)) as builder:
        builder.prepare()
        for w in (1, 2, 4, 8):
            hashes[w] = builder.classify(w).content_hash()
    dt = time.perf_counter() - t0
    ok = len(set(hashes.values())) == 1 and dt < 60
    assert report(5, "N1 at scale 0.1: identical content hash for workers 1/2/4/8", ok,
                  f"hash={hashes[1][:16]} distinct={len(set(hashes.values()))} in {dt:.2f}s")


def _physical_cores():
    return machine_info()["physical_cores"] or os.cpu_count() or 1


def test_c6_desk_scale_scalability(report):
    t0 = time.perf_counter()
    g = generate_er_colored(GraphSpec(9500, 341000, 2, 0))
    reps = 3
    times = {}
    with AlignmentBuilder(g, g, identity_seeds(g)) as builder:
        builder.prepare()
        for w in (1, 2, 4):
            builder.classify(w)  # start the pool outside the measured repetitions
            samples = []
            for _ in range(reps):
                s = time.perf_counter()
                ag = builder.classify(w)
                samples.append(time.perf_counter() - s)
            assert ag.num_edges == 341000
            times[w] = statistics.median(samples)
    dt = time.perf_counter() - t0
    speed = {w: times[1] / times[w] for w in times}
    detail = (f"median s {', '.join(f'w{w}={t:.4f}' for w, t in times.items())}; "
              f"speedup w2={speed[2]:.2f} w4={speed[4]:.2f}; total {dt:.1f}s; cores={_physical_cores()}")
    cores = _physical_cores()
    if cores < 4:
        report(6, "full N1 scalability (needs >= 4 physical cores)", False,
               f"not applicable on {cores} core(s), measured only: {detail}", status="SKIP")
        pytest.skip(f"criterion 6 requires >= 4 physical cores; this machine has {cores}")
    ok = (times[4] <= 0.6 * times[1] and speed[2] >= 0.9 * speed[1] and speed[4] >= 0.9 * speed[2]
          and dt <= 15 * 60)
    assert report(6, "full N1: 4-worker median <= 0.6 x 1-worker, non-decreasing 1->2->4", ok, detail)


def test_c7_table1_regeneration(report):
    t0 = time.perf_counter()
    cfg = BenchConfig()
    counts = []
    for net in cfg.networks:
        g = generate_er_colored(net.spec)
        counts.append((g.n, g.m))
    dt = time.perf_counter() - t0
    ok = (len(cfg.networks) == 12 and all(n == 9500 for n, _ in counts)
          and [m for _, m in counts] == TABLE1_EDGES and dt < 60)
    assert report(7, "default bench suite = 12 Table-1 networks (9500 nodes, listed edge counts)", ok,
                  f"{[m for _, m in counts]} generated in {dt:.1f}s")


def test_c8_monotone_in_delta(report):
    t0 = time.perf_counter()
    problems = []
    for k in range(20):
        g1, g2, seeds = random_instance(800 + k, max_n=40, max_m=120, max_seeds=50)
        graphs = {d: {(i, j): c for i, j, _, c in
                      build_alignment_graph(g1, g2, seeds, WeightSchema(delta=d)).edges()} for d in range(1, 5)}
        for lo, hi in itertools.combinations(range(1, 5), 2):
            a, b = graphs[lo], graphs[hi]
            for key, c in a.items():
                if key not in b:
                    problems.append((k, lo, hi, key, f"{c} removed"))
                elif c.kind is Kind.MATCH and b[key] != c:
                    problems.append((k, lo, hi, key, "match changed"))
                if key in b and b[key].kind != c.kind and not (c.kind is Kind.MISMATCH and b[key].kind is Kind.GAP):
                    problems.append((k, lo, hi, key, f"{c} -> {b[key]}"))
            for key, c in b.items():
                if key not in a:
                    problems.append((k, lo, hi, key, "edge created"))
                elif c.kind is Kind.MATCH and a[key].kind is not Kind.MATCH:
                    problems.append((k, lo, hi, key, "match created"))
            if any(c.kind is Kind.GAP for c in graphs[1].values()):
                problems.append((k, "gap at delta 1"))
    dt = time.perf_counter() - t0
    ok = not problems and dt < 10
    assert report(8, "raising delta 1->4 only turns Mismatch into Gap", ok, f"problems={problems[:3]} in {dt:.2f}s")
