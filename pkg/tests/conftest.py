"""Shared fixtures and independent reference implementations for the tests."""

import math

import networkx as nx
import numpy as np
import pytest

from lazysearch.graph import ExplicitGraph, grid_graph

TOL = 1e-9


def to_nx(graph, removed=()):
    """networkx MultiGraph over vertex indices, without the removed edge ids."""
    removed = set(int(e) for e in removed)
    G = nx.MultiGraph()
    G.add_nodes_from(range(graph.n_vertices))
    for e in range(graph.n_edges):
        if e not in removed:
            G.add_edge(int(graph.edge_u[e]), int(graph.edge_v[e]), key=e, length=float(graph.lengths[e]))
    return G


def nx_shortest_length(graph, removed=()):
    G = to_nx(graph, removed)
    try:
        return nx.dijkstra_path_length(G, graph.start_index, graph.goal_index, weight="length")
    except nx.NetworkXNoPath:
        return math.inf


def brute_paths(graph, bound=math.inf, removed=()):
    """All simple start-goal paths (as edge tuples) shorter than ``bound``, by plain DFS."""
    removed = set(int(e) for e in removed)
    adj = {v: [] for v in range(graph.n_vertices)}
    for e in range(graph.n_edges):
        if e in removed:
            continue
        u, v = int(graph.edge_u[e]), int(graph.edge_v[e])
        adj[u].append((v, e))
        adj[v].append((u, e))
    out = []

    def walk(u, seen, edges, length):
        if length >= bound - TOL:
            return
        if u == graph.goal_index:
            out.append(tuple(edges))
            return
        for w, e in adj[u]:
            if w not in seen:
                walk(w, seen | {w}, edges + [e], length + graph.lengths[e])

    walk(graph.start_index, {graph.start_index}, [], 0.0)
    return out


def random_graph(rng, n_vertices, n_edges, integer_lengths=False):
    """Connected-ish random multigraph with start 0 and goal n-1."""
    edges = []
    for i in range(n_vertices - 1):
        j = int(rng.integers(0, i + 1))
        edges.append((j, i + 1))
    while len(edges) < n_edges:
        a, b = rng.choice(n_vertices, size=2, replace=False)
        edges.append((int(a), int(b)))
    if integer_lengths:
        lengths = rng.integers(1, 4, size=len(edges)).astype(float)
    else:
        lengths = rng.uniform(0.5, 2.0, size=len(edges))
    return ExplicitGraph.from_edges(range(n_vertices), [(u, v, w) for (u, v), w in zip(edges, lengths)],
                                    0, n_vertices - 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def grid4():
    return grid_graph(4)


@pytest.fixture
def line_graph():
    """Single unit edge from 0 to 1."""
    return ExplicitGraph.from_edges([0, 1], [(0, 1, 1.0)], 0, 1)


@pytest.fixture
def two_routes():
    """Two parallel two-edge unit paths 0-2-1 and 0-3-1."""
    return ExplicitGraph.from_edges([0, 1, 2, 3], [(0, 2, 1.0), (2, 1, 1.0), (0, 3, 1.0), (3, 1, 1.0)], 0, 1)
