"""Clairvoyant oracles that see the whole world.

``exact_oracle_cover`` runs greedy set cover over every path that is shorter
than the world's shortest feasible path and not yet invalidated.
``approx_oracle_action`` is the cheap per-step version: among the invalid
edges of the current path, take the one whose removal lengthens the
shortest path most.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, IntegrityError, NoFeasiblePathError
from .features import hallucinate, inf_sentinel
from .graph import DEFAULT_PATH_CAP, UNEVALUATED, EvalState, paths_shorter_than, shortest_path


@dataclass(frozen=True)
class CoverInstance:
    universe: list  # paths to eliminate
    candidates: list  # invalid edge ids
    membership: np.ndarray  # (len(candidates), len(universe)) bool

    def covered_by(self, edge: int) -> np.ndarray:
        return self.membership[self.candidates.index(edge)]


def cover_instance(graph, world, state: EvalState, cap: int = DEFAULT_PATH_CAP) -> CoverInstance:
    world = np.asarray(world)
    best = shortest_path(graph, world == 0)
    if best is None:
        raise NoFeasiblePathError("world has no feasible start-goal path")
    universe = paths_shorter_than(graph, best.length, state.invalid_mask, cap=cap)
    candidates = [int(e) for e in np.flatnonzero(world == 0) if state.marks[e] == UNEVALUATED]
    membership = np.zeros((len(candidates), len(universe)), dtype=bool)
    col = {e: i for i, e in enumerate(candidates)}
    for j, p in enumerate(universe):
        for e in p.edges:
            if e in col:
                membership[col[e], j] = True
    return CoverInstance(universe, candidates, membership)


def greedy_set_cover(membership: np.ndarray) -> list:
    """Row indices picked greedily (most uncovered columns, lowest index on ties)."""
    alive = np.ones(membership.shape[1], dtype=bool)
    chosen = []
    while alive.any():
        gains = (membership & alive).sum(axis=1)
        best = int(np.argmax(gains))
        if gains[best] == 0:
            raise ContractViolation("set cover instance has an uncoverable element")
        chosen.append(best)
        alive &= ~membership[best]
    return chosen


def exact_oracle_cover(graph, world, state: EvalState, cap: int = DEFAULT_PATH_CAP) -> list:
    """Invalid edges, in greedy selection order, that eliminate every shorter path."""
    inst = cover_instance(graph, world, state, cap)
    return [inst.candidates[i] for i in greedy_set_cover(inst.membership)]


def approx_oracle_action(state: EvalState, path, world, graph, hallucinated=None) -> int:
    """Edge to evaluate next given the world.

    With no invalid edge left on the path the remaining work is verification,
    so the first unevaluated edge is returned.
    """
    todo = state.unevaluated_on(path)
    if not todo:
        raise ContractViolation("path is fully evaluated")
    bad = [e for e in todo if world[e] == 0]
    if not bad:
        return todo[0]
    if hallucinated is None:
        hallucinated = hallucinate(graph, state, bad)
    sentinel = inf_sentinel(graph)
    best, best_gain = None, -1.0
    for e in sorted(bad):
        alt = hallucinated[e]
        gain = sentinel if alt is None else max(0.0, alt.length - path.length)
        if gain > best_gain:
            best, best_gain = e, gain
    return best


def oracle_selector(world):
    """Selector bound to one world (for roll-in and benchmarking)."""
    world = np.asarray(world)

    def select(state, path, ctx):
        return approx_oracle_action(state, path, world, ctx.graph)

    select.clairvoyant = True
    return select


def oracle_label_stream(trace, world, graph) -> list:
    """(state, path, oracle edge) for every visited state of a trace."""
    world = np.asarray(world)
    out = []
    for step in trace:
        state = step.state
        if not state.consistent_with(world) or world[step.edge] != step.outcome:
            raise IntegrityError("trace disagrees with the world")
        out.append((state, step.path, approx_oracle_action(state, step.path, world, graph)))
    return out


class ClairvoyantOracle:
    """Approximate oracle as a benchmarkable selector; ``bind`` per world."""

    name = "oracle"

    def bind(self, world):
        return oracle_selector(world)

    def __call__(self, state, path, ctx):
        raise ContractViolation("the clairvoyant oracle must be bound to a world first")


APPROX_ORACLE = ClairvoyantOracle()
