import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetalign.graph_core import (ColoredGraph, DuplicateColorAssignment, DuplicateEdge, GraphSpec,
                                 InfeasibleSpec, MalformedLine, SelfLoop, UnknownNode,
                                 generate_er_colored, parse_colored_graph, read_colored_graph,
                                 save_colored_graph, write_colored_graph)


def _roundtrip(g):
    e, c = io.StringIO(), io.StringIO()
    write_colored_graph(g, e, c)
    return parse_colored_graph(e.getvalue(), c.getvalue()), e.getvalue(), c.getvalue()


def _assert_invariants(g):
    edges = set(map(tuple, g.edges().tolist()))
    assert len(edges) == g.m
    for u in range(g.n):
        nb = g.neighbors(u).tolist()
        assert u not in nb
        assert nb == sorted(set(nb))
        for v in nb:
            assert u in g.neighbors(v)
    assert g.colors.shape == (g.n,)
    assert np.all(g.colors < g.num_colors)


def test_parse_small():
    g = parse_colored_graph("a b\nb c", "a red\nb red\nc blue")
    assert (g.n, g.m) == (3, 2)
    assert [g.color_label_of(u) for u in range(3)] == ["red", "red", "blue"]
    assert g.labels == ("a", "b", "c")
    assert g.has_edge(0, 1) and g.has_edge(2, 1) and not g.has_edge(0, 2)


def test_parse_ids_follow_color_stream_order():
    g = parse_colored_graph("x y", "y k\nx j")
    assert g.node_id("y") == 0 and g.node_id("x") == 1


def test_comments_blank_lines_and_tabs():
    g = parse_colored_graph("# header\n\na\tb\n  \n", "# c\na 1\nb\t2\n")
    assert (g.n, g.m) == (2, 1)


def test_self_loop_rejected():
    with pytest.raises(SelfLoop):
        parse_colored_graph("a a", "a red")


def test_unknown_node():
    with pytest.raises(UnknownNode) as exc:
        parse_colored_graph("a b", "a red")
    assert exc.value.label == "b"
    assert exc.value.line == 1


@pytest.mark.parametrize("edges", ["a b\na b", "a b\nb a"])
def test_duplicate_edge_rejected(edges):
    with pytest.raises(DuplicateEdge) as exc:
        parse_colored_graph(edges, "a r\nb r")
    assert exc.value.line == 2


def test_duplicate_color_assignment():
    with pytest.raises(DuplicateColorAssignment):
        parse_colored_graph("", "a r\na g")


def test_malformed_line_reports_file_and_line():
    with pytest.raises(MalformedLine) as exc:
        parse_colored_graph("a b\n\na b c", "a r\nb r", edge_source="e.txt")
    assert exc.value.line == 3
    assert "e.txt:3" in str(exc.value)


def test_constructor_rejects_asymmetric_or_bad_colors():
    with pytest.raises(ValueError):
        ColoredGraph(["a", "b"], [0, 2], ["r", "g"], [(0, 1)])
    with pytest.raises(ValueError):
        ColoredGraph(["a", "b"], [0, 0], ["r"], [(0, 1), (1, 0)])
    with pytest.raises(ValueError):
        ColoredGraph(["a", "a"], [0, 0], ["r"], [])


def test_generate_triangle():
    g = generate_er_colored(GraphSpec(3, 3, 1, 99))
    assert set(map(tuple, g.edges().tolist())) == {(0, 1), (0, 2), (1, 2)}
    assert set(g.colors.tolist()) == {0}


def test_generate_deterministic():
    a = generate_er_colored(GraphSpec(100, 200, 2, 7))
    b = generate_er_colored(GraphSpec(100, 200, 2, 7))
    assert a == b
    assert np.array_equal(a.colors, b.colors)
    assert _roundtrip(a)[1:] == _roundtrip(b)[1:]
    c = generate_er_colored(GraphSpec(100, 200, 2, 8))
    assert a != c


def test_generate_infeasible():
    with pytest.raises(InfeasibleSpec):
        GraphSpec(3, 4, 1, 0)
    with pytest.raises(InfeasibleSpec):
        GraphSpec(3, 1, 0, 0)


def test_generate_table1_n1_counts():
    g = generate_er_colored(GraphSpec(9500, 341000, 2, 1))
    assert (g.n, g.m) == (9500, 341000)
    hist = g.color_histogram()
    assert set(hist) == {"0", "1"}
    # binomial(9500, 1/2): 5 sigma is about 244
    assert abs(hist["0"] - 4750) < 250


def test_generate_edges_roughly_uniform():
    # G(n, m) on 6 nodes: each of the 15 pairs should appear with probability 5/15
    counts = np.zeros((6, 6))
    for seed in range(600):
        for u, v in generate_er_colored(GraphSpec(6, 5, 1, seed)).edges().tolist():
            counts[u, v] += 1
    iu = np.triu_indices(6, 1)
    freq = counts[iu] / 600
    assert np.all(np.abs(freq - 1 / 3) < 0.08)


def test_write_triangle_lines():
    g = generate_er_colored(GraphSpec(3, 3, 1, 0))
    _, e, c = _roundtrip(g)
    assert len(e.splitlines()) == 3
    assert len(c.splitlines()) == 3


def test_write_n1_edge_lines(tmp_path):
    g = generate_er_colored(GraphSpec(9500, 341000, 2, 3))
    save_colored_graph(g, tmp_path / "e", tmp_path / "c")
    with open(tmp_path / "e") as f:
        assert sum(1 for _ in f) == 341000
    assert read_colored_graph(tmp_path / "e", tmp_path / "c") == g


@settings(max_examples=60, deadline=None)
@given(n=st.integers(0, 25), frac=st.floats(0, 1), k=st.integers(1, 4), seed=st.integers(0, 2**32))
def test_roundtrip_and_invariants(n, frac, k, seed):
    m = int(frac * n * (n - 1) // 2)
    g = generate_er_colored(GraphSpec(n, m, k, seed))
    assert (g.n, g.m) == (n, m)
    _assert_invariants(g)
    back, _, _ = _roundtrip(g)
    assert back == g
    _assert_invariants(back)
