"""World distributions: the two toy environments and grid obstacle datasets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._rng import make_rng
from .errors import ConfigurationError, UnsupportedOperation
from .graph import ExplicitGraph, grid_graph, shortest_path

GRID_KINDS = ("onewall", "twowall", "forest", "gate", "maze", "baffle", "bugtrap", "blob")


def as_world(bits, n_edges: int) -> np.ndarray:
    """Validate and freeze a 0/1 vector (list, array or '0101' string)."""
    if isinstance(bits, str):
        bits = [int(c) for c in bits]
    w = np.array(bits, dtype=np.uint8)
    if w.shape != (n_edges,):
        raise ConfigurationError(f"world needs exactly {n_edges} bits, got {w.shape}")
    if w.max(initial=0) > 1:
        raise ConfigurationError("world bits must be 0 or 1")
    w.setflags(write=False)
    return w


@dataclass(frozen=True, eq=False)
class WorldDistribution:
    """Either an explicit support (worlds + probabilities) or a seeded sampler."""

    graph: ExplicitGraph
    worlds: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None
    sampler: Optional[Callable] = None
    name: str = ""

    def __post_init__(self):
        if self.worlds is None and self.sampler is None:
            raise ConfigurationError("need an explicit support or a sampler")
        if self.worlds is not None:
            worlds = np.array(self.worlds, dtype=np.uint8)
            if worlds.ndim != 2 or worlds.shape[1] != self.graph.n_edges:
                raise ConfigurationError("every support world needs |E| bits")
            probs = np.array(self.probs, dtype=np.float64)
            if probs.shape != (len(worlds),) or np.any(probs < 0):
                raise ConfigurationError("probabilities must be non-negative, one per world")
            if abs(probs.sum() - 1.0) > 1e-12:
                raise ConfigurationError(f"probabilities sum to {probs.sum()!r}, not 1")
            worlds.setflags(write=False)
            probs.setflags(write=False)
            object.__setattr__(self, "worlds", worlds)
            object.__setattr__(self, "probs", probs)

    @property
    def explicit(self) -> bool:
        return self.worlds is not None

    def marginal_valid(self) -> np.ndarray:
        """P(edge valid) per edge, exact for explicit supports."""
        if not self.explicit:
            raise UnsupportedOperation("marginals need an explicit support")
        return self.probs @ self.worlds


def enumerate_support(dist: WorldDistribution) -> list:
    if not dist.explicit:
        raise UnsupportedOperation("enumerate_support needs an explicit-support distribution")
    return [(w, float(p)) for w, p in zip(dist.worlds, dist.probs)]


def sample_world(dist: WorldDistribution, seed) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    if dist.explicit:
        return dist.worlds[rng.choice(len(dist.probs), p=dist.probs)]
    return as_world(dist.sampler(rng), dist.graph.n_edges)


def _corridor_graph(rows, lengths):
    """Parallel two-edge corridors from start (0) to goal (1); corridor i passes vertex i + 2."""
    edges, names, coords = [], [], [(0.0, 0.0), (2.0, 0.0)]
    for i, (row, ln) in enumerate(zip(rows, lengths)):
        mid = i + 2
        coords.append((1.0, float(len(rows) - 1 - 2 * i) / 2))
        edges += [(0, mid, ln), (mid, 1, ln)]
        names += [f"{row}_left", f"{row}_right"]
    return ExplicitGraph.from_edges(range(len(rows) + 2), edges, 0, 1,
                                    coords=np.array(coords), edge_names=names)


def _support(graph, cases):
    """cases: [(probability, names of invalid edges)] -> WorldDistribution."""
    worlds, probs = [], []
    for p, invalid in cases:
        w = np.ones(graph.n_edges, dtype=np.uint8)
        for name in invalid:
            w[graph.edge_id(name)] = 0
        worlds.append(w)
        probs.append(p)
    return np.array(worlds), np.array(probs)


def env1_distribution() -> WorldDistribution:
    """Three corridors (top shortest). Six-world support:

    0.70: top_left and middle_right invalid;
    0.15: all valid;
    0.15: top_right invalid plus one of the four middle/bottom edges (0.0375 each).
    """
    g = _corridor_graph(("top", "middle", "bottom"), (1.0, 1.25, 1.5))
    others = ("middle_left", "middle_right", "bottom_left", "bottom_right")
    cases = [(0.7, ("top_left", "middle_right")), (0.15, ())]
    cases += [(0.0375, ("top_right", o)) for o in others]
    worlds, probs = _support(g, cases)
    return WorldDistribution(g, worlds, probs, name="env1")


def env2_distribution() -> WorldDistribution:
    """Four corridors; 0.6: {top_left, middle_right, bottom_left} invalid, 0.4: {top_right, middle_right}."""
    g = _corridor_graph(("top", "middle", "bottom", "fourth"), (1.0, 1.25, 1.5, 1.75))
    cases = [(0.6, ("top_left", "middle_right", "bottom_left")), (0.4, ("top_right", "middle_right"))]
    worlds, probs = _support(g, cases)
    return WorldDistribution(g, worlds, probs, name="env2")


def independent_bernoulli(graph: ExplicitGraph, p_valid) -> WorldDistribution:
    """Explicit product distribution over all 2^|E| worlds (small graphs only)."""
    p = np.asarray(p_valid, dtype=np.float64)
    n = graph.n_edges
    if p.shape != (n,):
        raise ConfigurationError("one validity probability per edge")
    if n > 16:
        raise ConfigurationError("explicit product support limited to 16 edges")
    codes = np.arange(2**n)
    worlds = ((codes[:, None] >> np.arange(n)) & 1).astype(np.uint8)
    probs = np.prod(np.where(worlds == 1, p, 1.0 - p), axis=1)
    keep = probs > 0
    worlds, probs = worlds[keep], probs[keep]
    return WorldDistribution(graph, worlds, probs / probs.sum(), name="bernoulli")


# -- grid datasets -----------------------------------------------------------

def segments_hit_rect(p0: np.ndarray, p1: np.ndarray, rect) -> np.ndarray:
    """Vectorised Liang-Barsky test: does segment p0->p1 touch the closed box?"""
    x0, y0, x1, y1 = rect
    d = p1 - p0
    t_lo = np.zeros(len(p0))
    t_hi = np.ones(len(p0))
    hit = np.ones(len(p0), dtype=bool)
    for axis, lo, hi in ((0, x0, x1), (1, y0, y1)):
        dd = d[:, axis]
        pp = p0[:, axis]
        flat = np.abs(dd) < 1e-15
        hit &= ~(flat & ((pp < lo) | (pp > hi)))
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (lo - pp) / dd
            tb = (hi - pp) / dd
        t_near = np.where(flat, -np.inf, np.minimum(ta, tb))
        t_far = np.where(flat, np.inf, np.maximum(ta, tb))
        t_lo = np.maximum(t_lo, t_near)
        t_hi = np.minimum(t_hi, t_far)
    return hit & (t_lo <= t_hi)


def rasterize(graph: ExplicitGraph, rects) -> np.ndarray:
    """World with an edge invalid iff its segment meets any obstacle box."""
    p0 = graph.coords[graph.edge_u]
    p1 = graph.coords[graph.edge_v]
    bad = np.zeros(graph.n_edges, dtype=bool)
    for r in rects:
        bad |= segments_hit_rect(p0, p1, r)
    return (~bad).astype(np.uint8)


def _wall_x(rng, side, lo, hi):
    # half-integer columns keep vertices out of thin walls
    low = int(lo * side)
    return float(rng.integers(low, max(int(hi * side), low + 1))) + 0.5


def _vwall(x, y0, y1, t=0.2):
    return (x - t, y0, x + t, y1)


def _hwall(y, x0, x1, t=0.2):
    return (x0, y - t, x1, y + t)


def _gaps_wall(x, side, gaps, half=0.6):
    """Full-height wall at column x with openings centred on integer rows."""
    rects, y = [], -1.0
    for g in sorted(gaps):
        if g - half > y:
            rects.append(_vwall(x, y, g - half))
        y = g + half
    if y < side + 1:
        rects.append(_vwall(x, y, side + 1))
    return rects


def _onewall(rng, side):
    x = _wall_x(rng, side, 0.3, 0.7)
    h = rng.uniform(0.5, 0.85) * side
    return [_vwall(x, -1, h)] if rng.random() < 0.5 else [_vwall(x, side - h, side + 1)]


def _twowall(rng, side):
    x1 = _wall_x(rng, side, 0.2, 0.45)
    x2 = _wall_x(rng, side, 0.55, 0.8)
    h1, h2 = rng.uniform(0.55, 0.85, size=2) * side
    return [_vwall(x1, -1, h1), _vwall(x2, side - h2, side + 1)]


def _forest(rng, side):
    n = rng.poisson(0.12 * side * side)
    out = []
    for _ in range(n):
        s = rng.uniform(0.3, 0.6)
        cx, cy = rng.uniform(0, side, size=2)
        out.append((cx - s, cy - s, cx + s, cy + s))
    return out


def _gate(rng, side):
    x = _wall_x(rng, side, 0.3, 0.7)
    k = int(rng.integers(1, 4))
    gaps = rng.choice(np.arange(0, int(side) + 1), size=k, replace=False)
    return _gaps_wall(x, side, gaps.tolist())


def _maze(rng, side):
    out = []
    for _ in range(int(rng.integers(3, 7))):
        span = rng.uniform(0.25, 0.6) * side
        a = _wall_x(rng, side, 0.1, 0.9)
        b = rng.uniform(0, side - span)
        out.append(_vwall(a, b, b + span) if rng.random() < 0.5 else _hwall(a, b, b + span))
    return out


def _baffle(rng, side):
    k = int(rng.integers(2, 4))
    xs = sorted(set(_wall_x(rng, side, (i + 0.6) / (k + 1), (i + 1.4) / (k + 1)) for i in range(k)))
    first_low = rng.random() < 0.5
    out = []
    for i, x in enumerate(xs):
        h = rng.uniform(0.6, 0.8) * side
        low = (i % 2 == 0) == first_low
        out.append(_vwall(x, -1, h) if low else _vwall(x, side - h, side + 1))
    return out


def _bugtrap(rng, side):
    c = side / 2 + rng.uniform(-0.1, 0.1) * side
    r = rng.uniform(0.2, 0.3) * side
    x0, x1 = np.floor(c - r) + 0.5, np.ceil(c + r) - 0.5
    y0, y1 = x0, x1
    walls = {
        "left": _vwall(x0, y0, y1), "right": _vwall(x1, y0, y1),
        "bottom": _hwall(y0, x0, x1), "top": _hwall(y1, x0, x1),
    }
    # the trap opens away from the start so the straight line runs into it
    del walls[("right", "top")[int(rng.integers(0, 2))]]
    return list(walls.values())


def _blob(rng, side):
    out = []
    for _ in range(int(rng.integers(1, 4))):
        s = rng.uniform(0.1, 0.2) * side
        cx, cy = (side / 2) + rng.normal(0, 0.15 * side, size=2)
        out.append((cx - s, cy - s, cx + s, cy + s))
    return out


_SAMPLERS = {
    "onewall": _onewall, "twowall": _twowall, "forest": _forest, "gate": _gate,
    "maze": _maze, "baffle": _baffle, "bugtrap": _bugtrap, "blob": _blob,
}


def _clear_terminals(rects, graph, margin=0.25):
    pts = [graph.coords[graph.start_index], graph.coords[graph.goal_index]]
    keep = []
    for r in rects:
        if any(r[0] - margin <= p[0] <= r[2] + margin and r[1] - margin <= p[1] <= r[3] + margin
               for p in pts):
            continue
        keep.append(r)
    return keep


def grid_world_sampler(kind: str, graph: ExplicitGraph, max_tries: int = 100):
    """Sampler(rng) -> world with a feasible start-goal path."""
    if kind not in _SAMPLERS:
        raise ConfigurationError(f"unknown dataset kind {kind!r}; choose from {GRID_KINDS}")
    side = float(graph.coords.max())
    make = _SAMPLERS[kind]

    def sample(rng):
        for _ in range(max_tries):
            world = rasterize(graph, _clear_terminals(make(rng, side), graph))
            if shortest_path(graph, world == 0) is not None:
                return world
        raise ConfigurationError(f"{kind}: no feasible world after {max_tries} draws")

    return sample


@dataclass(eq=False)
class DatasetManifest:
    """A generated dataset: graph, worlds, disjoint splits and provenance."""

    graph: ExplicitGraph
    worlds: np.ndarray
    splits: dict
    generator: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    probs: Optional[np.ndarray] = None
    graph_path: Optional[str] = None
    world_paths: list = field(default_factory=list)

    def __post_init__(self):
        self.worlds = np.asarray(self.worlds, dtype=np.uint8)
        if self.worlds.ndim != 2 or self.worlds.shape[1] != self.graph.n_edges:
            raise ConfigurationError("every world needs |E| bits")
        seen = set()
        for name, idx in self.splits.items():
            idx = [int(i) for i in idx]
            if seen & set(idx):
                raise ConfigurationError("dataset splits overlap")
            if idx and (min(idx) < 0 or max(idx) >= len(self.worlds)):
                raise ConfigurationError(f"split {name!r} indexes past the world list")
            seen |= set(idx)
            self.splits[name] = idx

    def split(self, name: str) -> np.ndarray:
        return self.worlds[self.splits.get(name, [])]

    def split_weights(self, name: str) -> Optional[np.ndarray]:
        if self.probs is None:
            return None
        w = np.asarray(self.probs)[self.splits.get(name, [])]
        return w / w.sum()


def grid_dataset(kind: str, grid_size: int, n_worlds: int, seed: int,
                 n_train: Optional[int] = None, n_val: Optional[int] = None) -> DatasetManifest:
    """8-connected grid with worlds rasterised from a per-kind obstacle sampler.

    Default split: half train, a tenth validation, the rest test.
    """
    if kind not in GRID_KINDS:
        raise ConfigurationError(f"unknown dataset kind {kind!r}; choose from {GRID_KINDS}")
    if int(grid_size) != grid_size or grid_size < 4:
        raise ConfigurationError("grid_size must be an integer >= 4")
    if int(n_worlds) != n_worlds or n_worlds < 1:
        raise ConfigurationError("n_worlds must be a positive integer")
    n_train = n_worlds // 2 if n_train is None else int(n_train)
    n_val = n_worlds // 10 if n_val is None else int(n_val)
    if n_train < 0 or n_val < 0 or n_train + n_val > n_worlds:
        raise ConfigurationError("split sizes exceed n_worlds")
    graph = grid_graph(int(grid_size))
    sample = grid_world_sampler(kind, graph)
    worlds = np.array([sample(make_rng(seed, i)) for i in range(n_worlds)])
    idx = list(range(n_worlds))
    splits = {"train": idx[:n_train], "validation": idx[n_train:n_train + n_val],
              "test": idx[n_train + n_val:]}
    params = {"kind": kind, "grid_size": int(grid_size), "n_worlds": int(n_worlds),
              "n_train": n_train, "n_val": n_val}
    return DatasetManifest(graph, worlds, splits, generator=f"grid:{kind}", params=params, seed=int(seed))


def distribution_manifest(dist: WorldDistribution) -> DatasetManifest:
    """Explicit support as a dataset with one train split covering the support."""
    idx = list(range(len(dist.worlds)))
    return DatasetManifest(dist.graph, dist.worlds, {"train": idx}, generator=dist.name or "explicit",
                           probs=dist.probs)
