"""Explicit graphs, paths, worlds and search state.

Graphs are undirected; an edge id covers both directions. Shortest paths
break ties lexicographically on the vertex-id sequence so runs are
reproducible.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import ConfigurationError, ContractViolation, SizeGuardError

# Absolute tolerance for length ties and "strictly shorter" tests.
LENGTH_TOL = 1e-9
DEFAULT_PATH_CAP = 10**6

UNEVALUATED = -1
INVALID = 0
VALID = 1


@dataclass(frozen=True, eq=False)
class ExplicitGraph:
    """Undirected graph with dense edge ids ``0..n_edges-1``.

    ``vertex_ids`` is sorted; kernels work on positions into it, so index
    order and id order agree.
    """

    vertex_ids: tuple
    edge_u: np.ndarray
    edge_v: np.ndarray
    lengths: np.ndarray
    start: int
    goal: int
    coords: Optional[np.ndarray] = None
    edge_names: tuple = ()

    def __post_init__(self):
        ids = tuple(int(v) for v in self.vertex_ids)
        if list(ids) != sorted(set(ids)):
            raise ConfigurationError("vertex ids must be unique and sorted")
        object.__setattr__(self, "vertex_ids", ids)
        for name in ("edge_u", "edge_v"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.int32)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        lengths = np.ascontiguousarray(self.lengths, dtype=np.float64)
        lengths.setflags(write=False)
        object.__setattr__(self, "lengths", lengths)
        n = len(ids)
        if not (len(self.edge_u) == len(self.edge_v) == len(lengths)):
            raise ConfigurationError("edge arrays disagree in size")
        if len(lengths) and (self.edge_u.min() < 0 or self.edge_v.max() >= n
                             or self.edge_v.min() < 0 or self.edge_u.max() >= n):
            raise ConfigurationError("edge references a missing vertex")
        if np.any(~np.isfinite(lengths)) or np.any(lengths <= 0):
            raise ConfigurationError("edge lengths must be finite and strictly positive")
        if np.any(self.edge_u == self.edge_v):
            raise ConfigurationError("self loops are not allowed")
        if self.start not in self.index_of or self.goal not in self.index_of:
            raise ConfigurationError("start/goal must be graph vertices")
        if self.start == self.goal:
            raise ConfigurationError("start and goal must differ")
        if self.edge_names and len(self.edge_names) != len(lengths):
            raise ConfigurationError("edge_names must name every edge")
        if self.coords is not None:
            coords = np.asarray(self.coords, dtype=np.float64)
            if coords.shape != (n, 2):
                raise ConfigurationError("coords must be (n_vertices, 2)")
            object.__setattr__(self, "coords", coords)

    @classmethod
    def from_edges(cls, vertices: Iterable[int], edges: Sequence[tuple], start: int, goal: int,
                   coords=None, edge_names=()):
        """Build from ``(u_id, v_id, length)`` triples; edge id = list position."""
        ids = sorted(int(v) for v in vertices)
        index = {v: i for i, v in enumerate(ids)}
        try:
            u = [index[int(a)] for a, _, _ in edges]
            v = [index[int(b)] for _, b, _ in edges]
        except KeyError as exc:
            raise ConfigurationError(f"edge references missing vertex {exc}") from None
        lengths = [float(w) for _, _, w in edges]
        return cls(tuple(ids), np.array(u), np.array(v), np.array(lengths), int(start), int(goal),
                   coords=coords, edge_names=tuple(edge_names))

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_ids)

    @property
    def n_edges(self) -> int:
        return len(self.lengths)

    @cached_property
    def index_of(self) -> dict:
        return {v: i for i, v in enumerate(self.vertex_ids)}

    @cached_property
    def csr(self):
        """(indptr, neighbour, edge id) with neighbours sorted by (index, edge id)."""
        n = self.n_vertices
        src = np.concatenate([self.edge_u, self.edge_v])
        dst = np.concatenate([self.edge_v, self.edge_u])
        eid = np.concatenate([np.arange(self.n_edges)] * 2).astype(np.int32)
        order = np.lexsort((eid, dst, src))
        src, dst, eid = src[order], dst[order], eid[order]
        indptr = np.zeros(n + 1, dtype=np.int32)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        out = (indptr, np.ascontiguousarray(dst, dtype=np.int32), np.ascontiguousarray(eid))
        for a in out:
            a.setflags(write=False)
        return out

    @cached_property
    def start_index(self) -> int:
        return self.index_of[self.start]

    @cached_property
    def goal_index(self) -> int:
        return self.index_of[self.goal]

    @cached_property
    def total_length(self) -> float:
        return float(self.lengths.sum())

    def edge_id(self, name: str) -> int:
        return self.edge_names.index(name)

    def endpoints(self, edge: int) -> tuple:
        return self.vertex_ids[self.edge_u[edge]], self.vertex_ids[self.edge_v[edge]]

    def to_dict(self) -> dict:
        verts = []
        for i, v in enumerate(self.vertex_ids):
            item = {"id": v}
            if self.coords is not None:
                item["x"], item["y"] = float(self.coords[i, 0]), float(self.coords[i, 1])
            verts.append(item)
        edges = []
        for e in range(self.n_edges):
            u, v = self.endpoints(e)
            item = {"id": e, "u": u, "v": v, "length": float(self.lengths[e])}
            if self.edge_names:
                item["name"] = self.edge_names[e]
            edges.append(item)
        return {"vertices": verts, "edges": edges, "start": self.start, "goal": self.goal}

    @classmethod
    def from_dict(cls, data: dict) -> "ExplicitGraph":
        verts = data["vertices"]
        ids = [int(v["id"]) for v in verts]
        coords = None
        if verts and all("x" in v and "y" in v for v in verts):
            by_id = {int(v["id"]): (float(v["x"]), float(v["y"])) for v in verts}
            coords = np.array([by_id[i] for i in sorted(ids)])
        edges = sorted(data["edges"], key=lambda e: int(e["id"]))
        if [int(e["id"]) for e in edges] != list(range(len(edges))):
            raise ConfigurationError("edge ids must be dense 0..|E|-1")
        names = tuple(e["name"] for e in edges) if edges and all("name" in e for e in edges) else ()
        return cls.from_edges(ids, [(e["u"], e["v"], e["length"]) for e in edges],
                              data["start"], data["goal"], coords=coords, edge_names=names)

    @cached_property
    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class Path:
    vertices: tuple
    edges: tuple
    length: float

    def __len__(self):
        return len(self.edges)

    def __contains__(self, edge):
        return edge in self.edges


def grid_graph(n: int, connectivity: int = 8, spacing: float = 1.0) -> ExplicitGraph:
    """n x n lattice; start at the lower-left corner, goal at the upper-right.

    Vertex id is ``x * n + y``. Edge lengths are Euclidean.
    """
    if n < 2:
        raise ConfigurationError("grid needs at least 2 vertices per side")
    if connectivity not in (4, 8):
        raise ConfigurationError("connectivity must be 4 or 8")
    steps = [(1, 0), (0, 1)]
    if connectivity == 8:
        steps += [(1, 1), (1, -1)]
    edges = []
    for x in range(n):
        for y in range(n):
            for dx, dy in steps:
                xx, yy = x + dx, y + dy
                if 0 <= xx < n and 0 <= yy < n:
                    edges.append((x * n + y, xx * n + yy, spacing * math.hypot(dx, dy)))
    coords = np.array([(x * spacing, y * spacing) for x in range(n) for y in range(n)])
    return ExplicitGraph.from_edges(range(n * n), edges, 0, n * n - 1, coords=coords)


def removed_mask(graph: ExplicitGraph, removed=None) -> np.ndarray:
    """uint8 mask over edges from an id collection or a boolean/uint8 mask."""
    if removed is None:
        return np.zeros(graph.n_edges, dtype=np.uint8)
    if isinstance(removed, np.ndarray) and removed.dtype in (np.bool_, np.uint8):
        if removed.shape != (graph.n_edges,):
            raise ContractViolation("removed mask has the wrong length")
        return np.ascontiguousarray(removed, dtype=np.uint8)
    mask = np.zeros(graph.n_edges, dtype=np.uint8)
    ids = np.fromiter((int(e) for e in removed), dtype=np.int64)
    if ids.size:
        if ids.min() < 0 or ids.max() >= graph.n_edges:
            raise ContractViolation("removed set references unknown edge ids")
        mask[ids] = 1
    return mask


def _make_path(graph: ExplicitGraph, verts, edges) -> Path:
    ids = graph.vertex_ids
    return Path(tuple(ids[i] for i in verts), tuple(int(e) for e in edges),
                float(sum(graph.lengths[e] for e in edges)))


def shortest_path(graph: ExplicitGraph, removed=None) -> Optional[Path]:
    """Minimum-length start-goal path avoiding ``removed``; None if cut off."""
    indptr, nbr, eid = graph.csr
    found = kernels.shortest_path(indptr, nbr, eid, graph.lengths, removed_mask(graph, removed),
                                  graph.start_index, graph.goal_index, LENGTH_TOL)
    if found is None:
        return None
    return _make_path(graph, *found)


def distances_to_goal(graph: ExplicitGraph, removed=None) -> np.ndarray:
    indptr, nbr, eid = graph.csr
    return kernels.distances(indptr, nbr, eid, graph.lengths, removed_mask(graph, removed),
                             graph.goal_index, -1)


def path_feasible(path: Path, world) -> bool:
    return bool(all(world[e] == 1 for e in path.edges))


def paths_shorter_than(graph: ExplicitGraph, bound: float, removed=None,
                       cap: int = DEFAULT_PATH_CAP) -> list:
    """Every simple start-goal path with length < bound that avoids ``removed``.

    Branches are pruned with exact distances-to-goal, so the search only
    touches prefixes that can still finish under the bound. Raises
    SizeGuardError once more than ``cap`` paths qualify.
    """
    mask = removed_mask(graph, removed)
    to_goal = distances_to_goal(graph, mask)
    s, g = graph.start_index, graph.goal_index
    limit = bound - LENGTH_TOL
    if not to_goal[s] < limit:
        return []
    indptr, nbr, eid = (a.tolist() for a in graph.csr)
    lengths = graph.lengths.tolist()
    blocked = mask.tolist()
    to_goal = to_goal.tolist()
    out = []
    on_path = [False] * graph.n_vertices
    verts, edges = [s], []

    def dfs(u, acc):
        if u == g:
            out.append(_make_path(graph, verts, edges))
            if len(out) > cap:
                raise SizeGuardError(f"more than {cap} paths shorter than {bound}")
            return
        on_path[u] = True
        for k in range(indptr[u], indptr[u + 1]):
            e, w = eid[k], nbr[k]
            if blocked[e] or on_path[w]:
                continue
            nxt = acc + lengths[e]
            if nxt + to_goal[w] < limit:
                verts.append(w)
                edges.append(e)
                dfs(w, nxt)
                verts.pop()
                edges.pop()
        on_path[u] = False

    dfs(s, 0.0)
    return out


class EvalState:
    """Per-edge marks: UNEVALUATED (-1), INVALID (0) or VALID (1).

    Marks only move away from UNEVALUATED, so E_valid and E_invalid stay
    disjoint.
    """

    __slots__ = ("marks",)

    def __init__(self, n_edges: int = 0, marks=None):
        if marks is None:
            self.marks = np.full(n_edges, UNEVALUATED, dtype=np.int8)
        else:
            self.marks = np.array(marks, dtype=np.int8)
            if not np.isin(self.marks, (UNEVALUATED, INVALID, VALID)).all():
                raise ContractViolation("marks must be -1, 0 or 1")

    def __len__(self):
        return len(self.marks)

    def mark(self, edge: int, outcome) -> None:
        if self.marks[edge] != UNEVALUATED:
            raise ContractViolation(f"edge {edge} already evaluated")
        self.marks[edge] = VALID if outcome else INVALID

    def is_evaluated(self, edge: int) -> bool:
        return self.marks[edge] != UNEVALUATED

    @property
    def invalid_mask(self) -> np.ndarray:
        return (self.marks == INVALID).view(np.uint8)

    @property
    def evaluated_mask(self) -> np.ndarray:
        return self.marks != UNEVALUATED

    @property
    def valid_edges(self) -> frozenset:
        return frozenset(np.flatnonzero(self.marks == VALID).tolist())

    @property
    def invalid_edges(self) -> frozenset:
        return frozenset(np.flatnonzero(self.marks == INVALID).tolist())

    @property
    def n_evaluated(self) -> int:
        return int(np.count_nonzero(self.marks != UNEVALUATED))

    def unevaluated_on(self, path: Path) -> list:
        m = self.marks
        return [e for e in path.edges if m[e] == UNEVALUATED]

    def copy(self) -> "EvalState":
        return EvalState(marks=self.marks)

    def encode(self) -> int:
        """Base-3 code (digit = mark + 1, edge 0 least significant)."""
        code = 0
        for m in self.marks[::-1].tolist():
            code = code * 3 + (m + 1)
        return code

    @classmethod
    def decode(cls, code: int, n_edges: int) -> "EvalState":
        marks = []
        for _ in range(n_edges):
            code, d = divmod(code, 3)
            marks.append(d - 1)
        return cls(marks=marks)

    def digest(self) -> str:
        return hashlib.sha1(self.marks.tobytes()).hexdigest()[:16]

    def consistent_with(self, world) -> bool:
        ev = self.evaluated_mask
        return bool(np.array_equal(self.marks[ev], np.asarray(world)[ev]))

    def __eq__(self, other):
        return isinstance(other, EvalState) and np.array_equal(self.marks, other.marks)

    def __hash__(self):
        return hash(self.marks.tobytes())

    def __repr__(self):
        return f"EvalState(valid={sorted(self.valid_edges)}, invalid={sorted(self.invalid_edges)})"
