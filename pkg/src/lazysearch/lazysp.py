"""The LazySP loop, selector context and baseline selectors.

A selector is any callable ``(state, path, ctx) -> edge id`` that returns an
unevaluated edge of the candidate path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import permutations
from typing import Callable, Optional

import numpy as np

from ._rng import make_rng
from .errors import ConfigurationError, ContractViolation
from .features import edge_posteriors
from .graph import EvalState, ExplicitGraph, Path, shortest_path


class SelectorContext:
    """Read-only episode inputs for selectors plus the step counter and RNG.

    ``train_worlds`` (K x |E|) back the posterior; ``world_weights`` are
    optional prior masses for them. ``prior_valid`` defaults to the weighted
    validity frequency of the training worlds.
    """

    def __init__(self, graph: ExplicitGraph, prior_valid=None, train_worlds=None,
                 world_weights=None, seed: int = 0):
        self.graph = graph
        self.train_worlds = None if train_worlds is None else np.asarray(train_worlds, dtype=np.uint8)
        self.world_weights = None if world_weights is None else np.asarray(world_weights, dtype=np.float64)
        if self.train_worlds is not None:
            if self.train_worlds.ndim != 2 or self.train_worlds.shape[1] != graph.n_edges:
                raise ConfigurationError("training worlds must be K x |E|")
            if len(self.train_worlds) == 0:
                raise ConfigurationError("empty training world set")
        if prior_valid is None and self.train_worlds is not None:
            w = self.world_weights
            prior_valid = (self.train_worlds.mean(axis=0) if w is None
                           else (w / w.sum()) @ self.train_worlds)
        self.prior_valid = None if prior_valid is None else np.asarray(prior_valid, dtype=np.float64)
        self.seed = seed
        self.step = 0
        self.rng = make_rng(seed)

    @classmethod
    def from_distribution(cls, dist, seed: int = 0) -> "SelectorContext":
        return cls(dist.graph, train_worlds=dist.worlds, world_weights=dist.probs, seed=seed)

    def reset(self, seed: Optional[int] = None) -> None:
        if seed is not None:
            self.seed = seed
        self.step = 0
        self.rng = make_rng(self.seed)

    def with_worlds(self, train_worlds, world_weights=None) -> "SelectorContext":
        """Same graph and priors, different posterior worlds."""
        ctx = SelectorContext(self.graph, self.prior_valid, train_worlds, world_weights, self.seed)
        return ctx

    def posterior_valid(self, state: EvalState, edges) -> np.ndarray:
        if self.train_worlds is None:
            raise ConfigurationError("posterior needs training worlds in the context")
        return edge_posteriors(state, edges, self.train_worlds, self.world_weights)


def _unevaluated(state: EvalState, path: Path) -> list:
    edges = state.unevaluated_on(path)
    if not edges:
        raise ContractViolation("path has no unevaluated edge")
    return edges


def select_forward(state, path, ctx):
    return _unevaluated(state, path)[0]


def select_backward(state, path, ctx):
    return _unevaluated(state, path)[-1]


def select_alternate(state, path, ctx):
    """First unevaluated edge on even episode steps, last on odd ones."""
    edges = _unevaluated(state, path)
    return edges[0] if ctx.step % 2 == 0 else edges[-1]


def select_random(state, path, ctx):
    edges = _unevaluated(state, path)
    return edges[int(ctx.rng.integers(len(edges)))]


def _uniform_choices(state, path, ctx):
    edges = _unevaluated(state, path)
    return [(e, 1.0 / len(edges)) for e in edges]


# lets exact evaluators expand the coin flips instead of sampling them
select_random.action_distribution = _uniform_choices


def select_fail_fast(state, path, ctx):
    """Path edge with the lowest prior validity probability."""
    if ctx.prior_valid is None:
        raise ConfigurationError("fail-fast needs prior validity estimates")
    edges = _unevaluated(state, path)
    return edges[int(np.argmin(ctx.prior_valid[edges]))]


def select_post_fail_fast(state, path, ctx):
    """Path edge with the lowest posterior validity probability."""
    edges = _unevaluated(state, path)
    return edges[int(np.argmin(ctx.posterior_valid(state, edges)))]


BASELINES = {
    "forward": select_forward,
    "backward": select_backward,
    "alternate": select_alternate,
    "random": select_random,
    "fail_fast": select_fail_fast,
    "post_fail_fast": select_post_fail_fast,
}
UNINFORMED = ("forward", "backward", "alternate", "random")


def get_selector(name: str) -> Callable:
    try:
        return BASELINES[name]
    except KeyError:
        raise ConfigurationError(f"unknown selector {name!r}; choose from {sorted(BASELINES)}") from None


@dataclass
class TraceStep:
    marks: np.ndarray
    path: Path
    edge: int
    outcome: int

    @property
    def state(self) -> EvalState:
        return EvalState(marks=self.marks)


@dataclass
class SearchResult:
    path: Optional[Path]
    evaluations: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.path is not None

    @property
    def n_evaluations(self) -> int:
        return len(self.evaluations)

    @property
    def reward(self) -> int:
        return -len(self.evaluations)

    @property
    def evaluated_edges(self) -> set:
        return {e for e, _ in self.evaluations}

    @property
    def invalid_edges(self) -> set:
        return {e for e, o in self.evaluations if o == 0}


def run_lazysp(graph: ExplicitGraph, world, selector, ctx: Optional[SelectorContext] = None,
               record_trace: bool = True, max_steps: Optional[int] = None) -> SearchResult:
    """Evaluate edges on the current shortest optimistic path until it is verified.

    Returns ``path=None`` when every start-goal path has been invalidated.
    """
    if ctx is None:
        ctx = SelectorContext(graph)
    ctx.step = 0
    world = np.asarray(world)
    if world.shape != (graph.n_edges,):
        raise ContractViolation("world size does not match the graph")
    state = EvalState(graph.n_edges)
    result = SearchResult(None)
    path = shortest_path(graph)
    limit = graph.n_edges if max_steps is None else max_steps
    while path is not None:
        todo = state.unevaluated_on(path)
        if not todo:
            result.path = path
            break
        if len(result.evaluations) >= limit:
            raise ContractViolation("LazySP exceeded its step budget")
        e = selector(state, path, ctx)
        if e not in todo:
            raise ContractViolation(f"selector returned edge {e}, not an unevaluated edge on the path")
        outcome = int(world[e])
        if record_trace:
            result.trace.append(TraceStep(state.marks.copy(), path, int(e), outcome))
        state.mark(e, outcome)
        result.evaluations.append((int(e), outcome))
        ctx.step += 1
        if outcome == 0:
            path = shortest_path(graph, state.invalid_mask)
    return result


def trace_records(result: SearchResult) -> list:
    """JSON-ready per-step records for trace files."""
    out = []
    for t, step in enumerate(result.trace):
        out.append({
            "step": t,
            "state": EvalState(marks=step.marks).digest(),
            "path": list(step.path.edges),
            "edge": step.edge,
            "outcome": step.outcome,
        })
    return out


def write_trace(result: SearchResult, fh) -> None:
    for rec in trace_records(result):
        fh.write(json.dumps(rec) + "\n")


def expected_invalidation_evals(p_valid) -> float:
    """Expected evaluations to invalidate a path checked in the given order.

    Sum over l of l * (1 - p_l) * prod_{m<l} p_m; an all-valid path adds 0.
    """
    total, alive = 0.0, 1.0
    for l, p in enumerate(p_valid, start=1):
        total += l * alive * (1.0 - p)
        alive *= p
    return total


def best_invalidation_order(p_valid) -> tuple:
    """Exhaustive minimiser over all orders (small n only)."""
    best = min(permutations(range(len(p_valid))),
               key=lambda order: expected_invalidation_evals([p_valid[i] for i in order]))
    return best
