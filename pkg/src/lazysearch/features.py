"""Per-edge heuristic features and the softmax world posterior."""

from __future__ import annotations

from dataclasses import astuple, dataclass

import numpy as np

from .errors import ConfigurationError, ContractViolation
from .graph import UNEVALUATED, EvalState, Path, shortest_path

FEATURE_NAMES = (
    "prior_invalid",
    "posterior_invalid",
    "index_score",
    "delta_length",
    "delta_eval",
    "post_times_dlen",
)
N_FEATURES = len(FEATURE_NAMES)
INF_FACTOR = 10.0


@dataclass(frozen=True)
class FeatureVector:
    prior_invalid: float
    posterior_invalid: float
    index_score: float
    delta_length: float
    delta_eval: float
    post_times_dlen: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self))


def inf_sentinel(graph) -> float:
    """Stand-in for an infinite detour: ten times the total edge length."""
    return INF_FACTOR * graph.total_length


def world_posterior(state: EvalState, worlds, weights=None) -> np.ndarray:
    """Softmax over worlds of minus their disagreement with the observed outcomes.

    ``weights`` (optional prior mass per world) enters as a log offset, which
    is the same as listing each world proportionally often.
    """
    worlds = np.asarray(worlds)
    if worlds.ndim != 2 or len(worlds) == 0:
        raise ConfigurationError("world posterior needs at least one training world")
    ev = state.evaluated_mask
    z = -np.count_nonzero(worlds[:, ev] != state.marks[ev], axis=1).astype(np.float64)
    if weights is not None:
        with np.errstate(divide="ignore"):
            z = z + np.log(np.asarray(weights, dtype=np.float64))
    z -= z.max()
    p = np.exp(z)
    return p / p.sum()


def edge_posteriors(state: EvalState, edges, worlds, weights=None, posterior=None) -> np.ndarray:
    """P(edge valid | state) for each edge in ``edges``."""
    if posterior is None:
        posterior = world_posterior(state, worlds, weights)
    # summation can overshoot [0, 1] by an ulp
    return np.clip(posterior @ np.asarray(worlds)[:, list(edges)], 0.0, 1.0)


def edge_posterior(state: EvalState, edge: int, worlds, weights=None) -> float:
    return float(edge_posteriors(state, [edge], worlds, weights)[0])


def hallucinate(graph, state: EvalState, edges) -> dict:
    """Shortest path after additionally pretending each edge is invalid."""
    base = state.invalid_mask.copy()
    out = {}
    for e in edges:
        base[e] = 1
        out[e] = shortest_path(graph, base)
        base[e] = 0
    return out


def path_features(state: EvalState, path: Path, ctx, hallucinated=None):
    """Features of every unevaluated edge on ``path``.

    Returns ``(edges, F)`` with ``F`` of shape ``(len(edges), 6)`` in
    FEATURE_NAMES order, edges in path order.
    """
    graph = ctx.graph
    marks = state.marks
    edges = [e for e in path.edges if marks[e] == UNEVALUATED]
    k = len(edges)
    F = np.empty((k, N_FEATURES))
    if k == 0:
        return edges, F
    if hallucinated is None:
        hallucinated = hallucinate(graph, state, edges)
    F[:, 0] = 1.0 - ctx.prior_valid[edges]
    F[:, 1] = 1.0 - ctx.posterior_valid(state, edges)
    F[:, 2] = 1.0 - np.arange(k) / max(k - 1, 1)
    sentinel = inf_sentinel(graph)
    for i, e in enumerate(edges):
        alt = hallucinated[e]
        if alt is None:
            F[i, 3] = sentinel
            F[i, 4] = 1.0
        else:
            # removing an edge never shortens the path; clip float noise
            F[i, 3] = max(0.0, alt.length - path.length)
            F[i, 4] = sum(marks[a] == UNEVALUATED for a in alt.edges) / len(alt.edges)
    F[:, 5] = F[:, 1] * F[:, 3]
    return edges, F


def compute_features(state: EvalState, edge: int, path: Path, ctx) -> FeatureVector:
    if edge not in path.edges:
        raise ContractViolation(f"edge {edge} is not on the path")
    if state.marks[edge] != UNEVALUATED:
        raise ContractViolation(f"edge {edge} is already evaluated")
    edges, F = path_features(state, path, ctx)
    return FeatureVector(*F[edges.index(edge)].tolist())
