import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from shapely.geometry import LineString, box

from lazysearch.errors import ConfigurationError, UnsupportedOperation
from lazysearch.graph import grid_graph, shortest_path
from lazysearch.worlds import (GRID_KINDS, WorldDistribution, as_world, distribution_manifest,
                               enumerate_support, env1_distribution, env2_distribution, grid_dataset,
                               grid_world_sampler, independent_bernoulli, sample_world,
                               segments_hit_rect)


def test_env1_support():
    d = env1_distribution()
    g = d.graph
    assert g.n_edges == 6 and len(d.worlds) == 6
    assert abs(d.probs.sum() - 1) < 1e-12
    names = ["top_left", "top_right", "middle_left", "middle_right", "bottom_left", "bottom_right"]
    assert [g.edge_id(n) for n in names] == list(range(6))
    w = d.worlds[int(np.argmax(d.probs))]
    assert d.probs.max() == 0.7 and w[g.edge_id("top_left")] == 0 and w[g.edge_id("middle_right")] == 0
    # P(top corridor free) = P(all valid world)
    top = [g.edge_id("top_left"), g.edge_id("top_right")]
    free = sum(p for w, p in enumerate_support(d) if w[top].all())
    assert abs(free - 0.15) < 1e-12


def test_env2_support():
    d = env2_distribution()
    assert d.graph.n_edges == 8 and np.allclose(sorted(d.probs), [0.4, 0.6])
    paths = {shortest_path(d.graph, w == 0).edges for w in d.worlds}
    assert len(paths) == 2


def test_marginals_match_enumeration():
    d = env1_distribution()
    ref = sum(p * w.astype(float) for w, p in enumerate_support(d))
    assert np.allclose(d.marginal_valid(), ref)


def test_distribution_validation():
    g = env1_distribution().graph
    with pytest.raises(ConfigurationError):
        WorldDistribution(g, np.ones((2, 6)), [0.5, 0.6])
    with pytest.raises(ConfigurationError):
        WorldDistribution(g)
    with pytest.raises(ConfigurationError):
        as_world("0101", 6)
    sampled = WorldDistribution(g, sampler=lambda rng: np.ones(6))
    with pytest.raises(UnsupportedOperation):
        enumerate_support(sampled)
    assert sample_world(sampled, 3).tolist() == [1] * 6


def test_sampling_frequencies():
    d = env2_distribution()
    rng = np.random.default_rng(0)
    hits = sum(np.array_equal(sample_world(d, rng), d.worlds[0]) for _ in range(4000))
    assert abs(hits / 4000 - d.probs[0]) < 0.03


def test_independent_bernoulli():
    g = env1_distribution().graph
    p = np.linspace(0.2, 0.9, 6)
    d = independent_bernoulli(g, p)
    assert len(d.worlds) == 64
    assert np.allclose(d.marginal_valid(), p)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
@settings(max_examples=200, deadline=None)
@given(pts=st.lists(st.floats(-3, 3, allow_nan=False), min_size=4, max_size=4),
       r=st.lists(st.floats(-2, 2, allow_nan=False), min_size=2, max_size=2),
       size=st.floats(0.05, 2.0))
def test_segment_box_matches_shapely(pts, r, size):
    assume(np.hypot(pts[0] - pts[2], pts[1] - pts[3]) > 1e-3)
    p0, p1 = np.array([pts[:2]]), np.array([pts[2:]])
    rect = (r[0], r[1], r[0] + size, r[1] + size)
    seg = LineString([pts[:2], pts[2:]])
    ref_geom = box(*rect)
    # grazing contacts may go either way under rounding
    assume(seg.distance(ref_geom.exterior) > 1e-9)
    assert bool(segments_hit_rect(p0, p1, rect)[0]) == ref_geom.intersects(seg)


@pytest.mark.parametrize("kind", GRID_KINDS)
def test_every_kind_is_feasible_and_reproducible(kind):
    g = grid_graph(10)
    sample = grid_world_sampler(kind, g)
    a = [sample(np.random.default_rng(i)) for i in range(5)]
    b = [sample(np.random.default_rng(i)) for i in range(5)]
    for w1, w2 in zip(a, b):
        assert np.array_equal(w1, w2)
        assert shortest_path(g, w1 == 0) is not None
    assert any((w == 0).any() for w in a)


def test_grid_dataset_splits():
    m = grid_dataset("gate", 10, 40, seed=7)
    assert len(m.split("train")) == 20 and len(m.split("validation")) == 4 and len(m.split("test")) == 16
    m2 = grid_dataset("gate", 10, 40, seed=7)
    assert np.array_equal(m.worlds, m2.worlds)
    assert not np.array_equal(m.worlds, grid_dataset("gate", 10, 40, seed=8).worlds)
    with pytest.raises(ConfigurationError):
        grid_dataset("gate", 10, 0, seed=0)
    with pytest.raises(ConfigurationError):
        grid_dataset("nope", 10, 5, seed=0)
    with pytest.raises(ConfigurationError):
        grid_dataset("gate", 10, 5, seed=0, n_train=4, n_val=4)


def test_distribution_manifest_weights():
    d = env1_distribution()
    m = distribution_manifest(d)
    assert np.allclose(m.split_weights("train"), d.probs)


@pytest.mark.parametrize("kind", GRID_KINDS)
def test_small_grids_sample(kind):
    g = grid_graph(4)
    w = grid_world_sampler(kind, g)(np.random.default_rng(0))
    assert shortest_path(g, w == 0) is not None
