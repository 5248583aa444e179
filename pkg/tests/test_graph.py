import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import brute_paths, nx_shortest_length, random_graph
from lazysearch import kernels
from lazysearch.errors import ConfigurationError, ContractViolation, SizeGuardError
from lazysearch.graph import (LENGTH_TOL, EvalState, ExplicitGraph, distances_to_goal, grid_graph,
                              path_feasible, paths_shorter_than, shortest_path)


def test_single_edge(line_graph):
    p = shortest_path(line_graph)
    assert p.vertices == (0, 1) and p.edges == (0,) and p.length == 1.0
    assert shortest_path(line_graph, {0}) is None


def test_grid_sizes():
    g = grid_graph(10)
    assert g.n_vertices == 100 and g.n_edges == 342
    assert grid_graph(4, connectivity=4).n_edges == 24
    assert math.isclose(shortest_path(g).length, 9 * math.sqrt(2))


def test_grid_matches_enumeration(grid4, rng):
    for _ in range(20):
        removed = rng.choice(grid4.n_edges, size=5, replace=False).tolist()
        p = shortest_path(grid4, removed)
        lengths = [sum(grid4.lengths[e] for e in path) for path in brute_paths(grid4, removed=removed)]
        if not lengths:
            assert p is None
        else:
            assert abs(p.length - min(lengths)) < 1e-9
            assert not set(p.edges) & set(removed)


def _vertex_seq(graph, edges):
    seq = [graph.start_index]
    for e in edges:
        u, v = int(graph.edge_u[e]), int(graph.edge_v[e])
        seq.append(v if seq[-1] == u else u)
    return seq


def test_ties_break_lexicographically():
    g = grid_graph(4, connectivity=4)
    paths = brute_paths(g)
    best = min(sum(g.lengths[e] for e in p) for p in paths)
    tight = [p for p in paths if sum(g.lengths[e] for e in p) < best + 1e-9]
    assert len(tight) == 20  # C(6, 3) monotone lattice paths
    expect = min(tight, key=lambda p: (_vertex_seq(g, p), p))
    assert shortest_path(g).edges == expect


def test_parallel_edges_tie_on_edge_id():
    g = ExplicitGraph.from_edges([0, 1], [(0, 1, 1.0), (0, 1, 1.0)], 0, 1)
    assert shortest_path(g).edges == (0,)
    assert shortest_path(g, {0}).edges == (1,)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(3, 9), extra=st.integers(0, 10))
def test_shortest_length_matches_networkx(seed, n, extra):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, n - 1 + extra)
    removed = np.flatnonzero(rng.random(g.n_edges) < 0.3).tolist()
    p = shortest_path(g, removed)
    ref = nx_shortest_length(g, removed)
    if p is None:
        assert ref == math.inf
    else:
        assert abs(p.length - ref) < 1e-9


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_backends_agree(seed):
    if "cython" not in kernels.BACKENDS:
        pytest.skip("compiled kernel not built")
    rng = np.random.default_rng(seed)
    g = grid_graph(int(rng.integers(3, 8)))
    mask = (rng.random(g.n_edges) < 0.3).astype(np.uint8)
    indptr, nbr, eid = g.csr
    args = (indptr, nbr, eid, g.lengths, mask, g.start_index, g.goal_index, LENGTH_TOL)
    py, cy = (kernels.BACKENDS[b].shortest_path(*args) for b in ("python", "cython"))
    if py is None:
        assert cy is None
    else:
        assert list(py[0]) == list(cy[0]) and list(py[1]) == list(cy[1])
    dp = kernels.BACKENDS["python"].distances(indptr, nbr, eid, g.lengths, mask, g.goal_index, -1)
    dc = kernels.BACKENDS["cython"].distances(indptr, nbr, eid, g.lengths, mask, g.goal_index, -1)
    np.testing.assert_array_equal(np.asarray(dp), np.asarray(dc))


def test_distances_to_goal(grid4):
    d = distances_to_goal(grid4)
    assert d[grid4.goal_index] == 0.0
    assert abs(d[grid4.start_index] - 3 * math.sqrt(2)) < 1e-12


def test_path_feasible(two_routes):
    p = shortest_path(two_routes)
    assert path_feasible(p, np.ones(4))
    w = np.ones(4)
    w[p.edges[1]] = 0
    assert not path_feasible(p, w)


def test_paths_shorter_than_examples(two_routes):
    assert paths_shorter_than(two_routes, 2.0) == []
    found = paths_shorter_than(two_routes, 2.5)
    assert sorted(p.edges for p in found) == [(0, 1), (2, 3)]


def test_paths_shorter_than_grid3_matches_dfs():
    g = grid_graph(3)
    ours = sorted(p.edges for p in paths_shorter_than(g, 6.0))
    ref = sorted(brute_paths(g, 6.0))
    assert ours == ref and len(ref) > 10


def test_paths_shorter_than_respects_removed(rng):
    g = grid_graph(3)
    removed = [0, 5, 7]
    ours = sorted(p.edges for p in paths_shorter_than(g, 7.0, removed))
    assert ours == sorted(brute_paths(g, 7.0, removed))


def test_paths_cap():
    with pytest.raises(SizeGuardError):
        paths_shorter_than(grid_graph(4), 20.0, cap=10)


def test_graph_validation():
    with pytest.raises(ConfigurationError):
        ExplicitGraph.from_edges([0, 1], [(0, 1, -1.0)], 0, 1)
    with pytest.raises(ConfigurationError):
        ExplicitGraph.from_edges([0, 1], [(0, 2, 1.0)], 0, 1)
    with pytest.raises(ConfigurationError):
        ExplicitGraph.from_edges([0, 1], [(0, 1, 1.0)], 0, 0)
    with pytest.raises(ConfigurationError):
        ExplicitGraph.from_edges([0, 1], [(1, 1, 1.0)], 0, 1)


def test_graph_dict_roundtrip(grid4):
    data = json.loads(json.dumps(grid4.to_dict()))
    g2 = ExplicitGraph.from_dict(data)
    assert g2.digest == grid4.digest
    assert shortest_path(g2).edges == shortest_path(grid4).edges


def test_removed_mask_errors(line_graph):
    with pytest.raises(ContractViolation):
        shortest_path(line_graph, [3])
    with pytest.raises(ContractViolation):
        shortest_path(line_graph, np.zeros(4, dtype=bool))


@settings(max_examples=50, deadline=None)
@given(marks=st.lists(st.sampled_from([-1, 0, 1]), min_size=1, max_size=12))
def test_state_encode_roundtrip(marks):
    s = EvalState(marks=marks)
    assert EvalState.decode(s.encode(), len(marks)) == s


def test_state_marks_once():
    s = EvalState(3)
    s.mark(1, 0)
    assert s.invalid_edges == {1} and s.n_evaluated == 1
    with pytest.raises(ContractViolation):
        s.mark(1, 1)
    c = s.copy()
    c.mark(0, 1)
    assert s.n_evaluated == 1 and c.valid_edges == {0}
    assert s.consistent_with([1, 0, 1]) and not s.consistent_with([1, 1, 1])
