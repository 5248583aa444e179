"""Bayesian lazy search as decision region determination with the EC2 objective.

Hypotheses are worlds, tests are edges and each decision region holds the
worlds that share a shortest feasible path. Edge cutting weight between
hypotheses in different regions is ``P(h) P(h')``, which for disjoint regions
sums to ``W = ((sum_i P_i)^2 - sum_i P_i^2) / 2`` over region masses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import (ConfigurationError, InconsistentOutcomeError, ModelInconsistencyError,
                     RealizabilityError, SizeGuardError)
from .graph import shortest_path

MAX_OPT_HYPOTHESES = 12
MAX_OPT_TESTS = 12
TIE_TOL = 1e-12


@dataclass(frozen=True)
class DRDInstance:
    """``outcomes[h, t]`` is hypothesis h's result for test t."""

    outcomes: np.ndarray
    priors: np.ndarray
    regions: np.ndarray  # region label per hypothesis
    costs: np.ndarray
    region_paths: tuple = ()  # optional Path (or None for no-path) per region label
    graph_hash: Optional[str] = None

    def __post_init__(self):
        out = np.asarray(self.outcomes, dtype=np.uint8)
        pri = np.asarray(self.priors, dtype=np.float64)
        reg = np.asarray(self.regions, dtype=np.int64)
        cost = np.asarray(self.costs, dtype=np.float64)
        if out.ndim != 2 or len(out) == 0:
            raise ConfigurationError("need at least one hypothesis")
        if pri.shape != (len(out),) or reg.shape != (len(out),) or cost.shape != (out.shape[1],):
            raise ConfigurationError("priors, regions and costs must match the outcome matrix")
        if np.any(pri < 0) or abs(pri.sum() - 1.0) > 1e-9:
            raise ConfigurationError("priors must be non-negative and sum to 1")
        if np.any(cost <= 0):
            raise ConfigurationError("test costs must be positive")
        object.__setattr__(self, "outcomes", out)
        object.__setattr__(self, "priors", pri)
        object.__setattr__(self, "regions", reg)
        object.__setattr__(self, "costs", cost)

    @property
    def n_hypotheses(self) -> int:
        return self.outcomes.shape[0]

    @property
    def n_tests(self) -> int:
        return self.outcomes.shape[1]

    @property
    def n_regions(self) -> int:
        return len(np.unique(self.regions))

    @property
    def p_min(self) -> float:
        return float(self.priors[self.priors > 0].min())

    def version_space(self, observed) -> np.ndarray:
        """Boolean mask of hypotheses agreeing with ``observed`` (test -> bit)."""
        alive = np.ones(self.n_hypotheses, dtype=bool)
        for t, o in _pairs(observed):
            alive &= self.outcomes[:, t] == o
        return alive

    def to_dict(self) -> dict:
        return {
            "hypotheses": [{"world": row.tolist(), "prior": float(p), "region": int(r)}
                           for row, p, r in zip(self.outcomes, self.priors, self.regions)],
            "costs": self.costs.tolist(),
            "graph_hash": self.graph_hash,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DRDInstance":
        hyps = d["hypotheses"]
        if not hyps:
            raise ConfigurationError("instance file lists no hypotheses")
        out = np.array([h["world"] for h in hyps])
        regions = [h.get("region") for h in hyps]
        if any(r is None for r in regions):
            raise ConfigurationError("every hypothesis needs a region label")
        costs = d.get("costs") or [1.0] * out.shape[1]
        return cls(out, np.array([h["prior"] for h in hyps]), np.array(regions), np.array(costs),
                   graph_hash=d.get("graph_hash"))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def _pairs(observed):
    items = observed.items() if isinstance(observed, dict) else observed
    seen = set()
    for t, o in items:
        if t in seen:
            raise ConfigurationError(f"test {t} observed twice")
        seen.add(t)
        yield int(t), int(o)


def build_regions(graph, worlds, priors=None, costs=None) -> DRDInstance:
    """One region per distinct shortest feasible path; pathless worlds share one more."""
    worlds = np.asarray(worlds, dtype=np.uint8)
    if worlds.ndim != 2 or len(worlds) == 0:
        raise ConfigurationError("need a non-empty K x |E| world matrix")
    if priors is None:
        priors = np.full(len(worlds), 1.0 / len(worlds))
    if costs is None:
        costs = np.ones(graph.n_edges)
    labels, paths, index = [], [], {}
    for w in worlds:
        p = shortest_path(graph, w == 0)
        key = None if p is None else p.edges
        if key not in index:
            index[key] = len(paths)
            paths.append(p)
        labels.append(index[key])
    return DRDInstance(worlds, np.asarray(priors, dtype=np.float64), np.array(labels),
                       np.asarray(costs, dtype=np.float64), tuple(paths), graph.digest)


def _weight(masses_by_region: np.ndarray) -> float:
    total = masses_by_region.sum()
    return 0.5 * (total * total - float(masses_by_region @ masses_by_region))


def _region_masses(inst: DRDInstance, alive: np.ndarray) -> np.ndarray:
    return np.bincount(inst.regions[alive], weights=inst.priors[alive],
                       minlength=int(inst.regions.max()) + 1)


def region_weight(inst: DRDInstance, observed=()) -> float:
    """Unnormalised weight of edges still uncut inside the version space."""
    alive = inst.version_space(observed)
    if not alive.any():
        raise InconsistentOutcomeError("no hypothesis agrees with the observed outcomes")
    return _weight(_region_masses(inst, alive))


def fec(inst: DRDInstance, observed=()) -> float:
    w0 = region_weight(inst)
    if w0 == 0.0:
        return 1.0
    return float(1.0 - region_weight(inst, observed) / w0)


def _surviving_regions(inst: DRDInstance, alive: np.ndarray) -> int:
    return len(np.unique(inst.regions[alive & (inst.priors > 0)]))


def _gains(inst: DRDInstance, alive: np.ndarray, performed) -> np.ndarray:
    """Expected weight reduction per unit cost for every test (-inf if performed)."""
    w = _weight(_region_masses(inst, alive))
    mass = inst.priors[alive].sum()
    out = np.full(inst.n_tests, -np.inf)
    for t in range(inst.n_tests):
        if t in performed:
            continue
        expected = 0.0
        for o in (0, 1):
            sub = alive & (inst.outcomes[:, t] == o)
            m = inst.priors[sub].sum()
            if m > 0:
                expected += m / mass * _weight(_region_masses(inst, sub))
        out[t] = (w - expected) / inst.costs[t]
    return out


def ec2_select(inst: DRDInstance, observed=()) -> int:
    """Greedy EC2 test; ties go to the smallest test id."""
    pairs = list(_pairs(observed))
    alive = inst.version_space(pairs)
    if not alive.any():
        raise InconsistentOutcomeError("no hypothesis agrees with the observed outcomes")
    gains = _gains(inst, alive, {t for t, _ in pairs})
    top = gains.max()
    if not top > TIE_TOL:
        raise ModelInconsistencyError("several regions survive but no test separates them")
    # float noise must not override the smallest-id tie-break
    return int(np.flatnonzero(gains >= top - TIE_TOL)[0])


@dataclass
class BayesStep:
    test: int
    outcome: int
    fec: float
    surviving_regions: int


@dataclass
class BayesResult:
    path: object  # Path, or None for a no-path verdict
    region: int
    evaluated: list = field(default_factory=list)
    cost: float = 0.0
    log: list = field(default_factory=list)


def run_bayesian_lsp(graph, worlds, priors, true_world, costs=None, instance=None) -> BayesResult:
    """Evaluate EC2-greedy edges on ``true_world`` until one region survives."""
    inst = instance if instance is not None else build_regions(graph, worlds, priors, costs)
    true_world = np.asarray(true_world, dtype=np.uint8)
    if not np.any(np.all(inst.outcomes == true_world, axis=1)):
        raise RealizabilityError("the true world is not in the hypothesis support")
    observed = []
    result = BayesResult(None, -1)
    alive = inst.version_space(observed)
    while _surviving_regions(inst, alive) > 1:
        t = ec2_select(inst, observed)
        o = int(true_world[t])
        observed.append((t, o))
        alive = inst.version_space(observed)
        result.evaluated.append(t)
        result.cost += float(inst.costs[t])
        result.log.append(BayesStep(t, o, fec(inst, observed), _surviving_regions(inst, alive)))
    region = int(inst.regions[alive & (inst.priors > 0)][0]) if alive.any() else -1
    result.region = region
    result.path = inst.region_paths[region] if inst.region_paths else None
    return result


def _check_size(inst: DRDInstance) -> None:
    if inst.n_hypotheses > MAX_OPT_HYPOTHESES or inst.n_tests > MAX_OPT_TESTS:
        raise SizeGuardError(f"exhaustive search limited to {MAX_OPT_HYPOTHESES} hypotheses "
                             f"and {MAX_OPT_TESTS} tests")


def optimal_drd_cost(inst: DRDInstance) -> float:
    """Minimum expected cost of any adaptive policy, by search over version spaces.

    A test that does not split the version space cannot help, so the version
    space alone (as a bitmask) is the state.
    """
    _check_size(inst)
    n = inst.n_hypotheses
    priors = inst.priors
    regions = inst.regions
    cols = [sum(1 << h for h in range(n) if inst.outcomes[h, t]) for t in range(inst.n_tests)]

    def mass(mask):
        return sum(priors[h] for h in range(n) if mask >> h & 1)

    @lru_cache(maxsize=None)
    def cost(mask):
        live = {int(regions[h]) for h in range(n) if mask >> h & 1 and priors[h] > 0}
        if len(live) <= 1:
            return 0.0
        total = mass(mask)
        best = np.inf
        for t, col in enumerate(cols):
            one, zero = mask & col, mask & ~col
            if one == 0 or zero == 0:
                continue
            c = inst.costs[t] + (mass(one) * cost(one) + mass(zero) * cost(zero)) / total
            best = min(best, c)
        if best == np.inf:
            raise ModelInconsistencyError("several regions survive but no test separates them")
        return best

    return float(cost((1 << n) - 1))


def greedy_expected_cost(inst: DRDInstance) -> float:
    """Expected cost of the EC2 greedy policy under the prior."""
    _check_size(inst)

    def walk(observed, alive) -> float:
        if _surviving_regions(inst, alive) <= 1:
            return 0.0
        t = ec2_select(inst, observed)
        total = inst.priors[alive].sum()
        value = float(inst.costs[t])
        for o in (0, 1):
            sub = alive & (inst.outcomes[:, t] == o)
            m = inst.priors[sub].sum()
            if m > 0:
                value += m / total * walk(observed + [(t, o)], sub)
        return value

    return walk([], inst.version_space(()))


def random_instance(rng, n_hypotheses: int = 8, n_tests: int = 8, n_regions: int = 3,
                    costs: Optional[Sequence[float]] = None) -> DRDInstance:
    """Distinct random hypotheses, Dirichlet priors, every region non-empty."""
    if not 2 <= n_regions <= n_hypotheses <= 2 ** n_tests:
        raise ConfigurationError("need 2 <= regions <= hypotheses <= 2^tests")
    rows = rng.choice(2 ** n_tests, size=n_hypotheses, replace=False)
    outcomes = (rows[:, None] >> np.arange(n_tests)) & 1
    priors = rng.dirichlet(np.ones(n_hypotheses))
    regions = np.concatenate([np.arange(n_regions),
                              rng.integers(0, n_regions, n_hypotheses - n_regions)])
    rng.shuffle(regions)
    costs = np.ones(n_tests) if costs is None else np.asarray(costs, dtype=np.float64)
    return DRDInstance(outcomes, priors, regions, costs)
