"""Selector evaluation, exact value iteration and tabular Q-learning on tiny MDPs.

States are EvalStates encoded base-3. An episode ends when the current
shortest optimistic path is fully verified or no path is left; every
non-terminal step costs -1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._rng import make_rng
from .errors import ConfigurationError, SizeGuardError
from .graph import EvalState, shortest_path
from .lazysp import SelectorContext, run_lazysp
from .worlds import DatasetManifest, WorldDistribution

MAX_EXACT_EDGES = 12


def bind(selector, world):
    """Clairvoyant selectors carry ``bind(world)``; others pass through."""
    return selector.bind(world) if hasattr(selector, "bind") else selector


def bootstrap_ci(values, stat=np.mean, n_resamples: int = 1000, level: float = 0.95, seed: int = 0):
    values = np.asarray(values, dtype=np.float64)
    rng = make_rng(seed, 0xB007)
    idx = rng.integers(0, len(values), size=(n_resamples, len(values)))
    stats = stat(values[idx], axis=1)
    a = (1.0 - level) / 2
    return float(np.quantile(stats, a)), float(np.quantile(stats, 1 - a))


@dataclass
class EvalReport:
    rewards: np.ndarray
    mean: float
    median: float
    ci_low: float
    ci_high: float
    median_ci_low: float
    median_ci_high: float
    exact: Optional[float] = None

    @property
    def median_evaluations(self) -> float:
        return -self.median


def _report(rewards, exact=None, seed=0) -> EvalReport:
    rewards = np.asarray(rewards, dtype=np.float64)
    lo, hi = bootstrap_ci(rewards, np.mean, seed=seed)
    mlo, mhi = bootstrap_ci(rewards, np.median, seed=seed)
    return EvalReport(rewards, float(rewards.mean()), float(np.median(rewards)), lo, hi, mlo, mhi, exact)


def episode_value(graph, world, selector, ctx) -> float:
    """Expected reward of one episode; expands ``action_distribution`` exactly."""
    dist = getattr(selector, "action_distribution", None)
    if dist is None:
        return float(run_lazysp(graph, world, bind(selector, world), ctx, record_trace=False).reward)
    memo = {}

    def value(state):
        key = state.marks.tobytes()
        if key in memo:
            return memo[key]
        path = shortest_path(graph, state.invalid_mask)
        if path is None or not state.unevaluated_on(path):
            v = 0.0
        else:
            v = 0.0
            for e, p in dist(state, path, ctx):
                nxt = state.copy()
                nxt.mark(e, world[e])
                v += p * (value(nxt) - 1.0)
        memo[key] = v
        return v

    return value(EvalState(graph.n_edges))


def exact_expected_reward(dist: WorldDistribution, selector, ctx=None) -> float:
    if ctx is None:
        ctx = SelectorContext.from_distribution(dist)
    total = 0.0
    for w, p in zip(dist.worlds, dist.probs):
        ctx.reset()
        total += p * episode_value(dist.graph, w, selector, ctx)
    return total


def dataset_context(manifest: DatasetManifest, seed: int = 0) -> SelectorContext:
    train = manifest.split("train")
    return SelectorContext(manifest.graph, train_worlds=train if len(train) else None,
                           world_weights=manifest.split_weights("train"), seed=seed)


def evaluate_selector(source, selector, n_episodes: Optional[int] = None, seed: int = 0,
                      split: str = "test", ctx: Optional[SelectorContext] = None) -> EvalReport:
    """Mean/median reward with bootstrap CIs.

    Explicit supports also get the exact expectation. Datasets run every
    world of ``split`` once (``n_episodes`` truncates).
    """
    if isinstance(source, DatasetManifest):
        worlds = source.split(split)
        if n_episodes is not None:
            worlds = worlds[:n_episodes]
        if ctx is None:
            ctx = dataset_context(source, seed)
        rewards = []
        for i, w in enumerate(worlds):
            ctx.reset(seed + i)
            rewards.append(run_lazysp(source.graph, w, bind(selector, w), ctx, record_trace=False).reward)
        return _report(rewards, seed=seed)
    if not isinstance(source, WorldDistribution):
        raise ConfigurationError("source must be a WorldDistribution or DatasetManifest")
    if ctx is None:
        ctx = (SelectorContext.from_distribution(source, seed) if source.explicit
               else SelectorContext(source.graph, seed=seed))
    from .worlds import sample_world

    n = 1000 if n_episodes is None else n_episodes
    rewards = []
    for i in range(n):
        w = sample_world(source, make_rng(seed, i))
        ctx.reset(seed + i)
        rewards.append(run_lazysp(source.graph, w, bind(selector, w), ctx, record_trace=False).reward)
    exact = exact_expected_reward(source, selector, ctx) if source.explicit else None
    return _report(rewards, exact, seed=seed)


# -- exact dynamic programming -------------------------------------------------

class _Model:
    """Support worlds plus helpers shared by value iteration and Q-learning."""

    def __init__(self, dist: WorldDistribution):
        if not dist.explicit:
            raise ConfigurationError("exact MDP routines need an explicit support")
        if dist.graph.n_edges > MAX_EXACT_EDGES:
            raise SizeGuardError(f"exact MDP limited to {MAX_EXACT_EDGES} edges")
        self.graph = dist.graph
        self.worlds = dist.worlds
        self.probs = dist.probs
        self._paths = {}

    def candidate(self, state: EvalState):
        key = state.invalid_mask.tobytes()
        if key not in self._paths:
            self._paths[key] = shortest_path(self.graph, state.invalid_mask)
        return self._paths[key]

    def actions(self, state: EvalState) -> list:
        path = self.candidate(state)
        return [] if path is None else state.unevaluated_on(path)

    def consistent(self, state: EvalState) -> np.ndarray:
        ev = state.evaluated_mask
        return np.all(self.worlds[:, ev] == state.marks[ev], axis=1)


@dataclass
class ValueSolution:
    values: dict  # state code -> V*(s)
    q: dict  # (state code, edge) -> Q*(s, a)
    n_edges: int
    _model: object = field(repr=False, default=None)

    def value(self, state: EvalState) -> float:
        return self.values[state.encode()]

    @property
    def initial_value(self) -> float:
        return self.values[EvalState(self.n_edges).encode()]

    def selector(self):
        """Greedy selector on Q*, ties broken by path order."""
        q = self.q

        def select(state, path, ctx):
            code = state.encode()
            todo = state.unevaluated_on(path)
            return max(todo, key=lambda e: (q.get((code, e), -np.inf), -todo.index(e)))

        return select

    def bellman_residual(self) -> float:
        worst = 0.0
        for code, v in self.values.items():
            acts = [qa for (c, _), qa in self.q.items() if c == code]
            target = max(acts) if acts else 0.0
            worst = max(worst, abs(v - target))
        return worst


def exact_value_iteration(dist: WorldDistribution) -> ValueSolution:
    """V*(s) = max_a sum_phi P(phi | s) (-1 + V*(Gamma(s, a, phi))) over reachable states.

    Each action evaluates a fresh edge, so the reachable graph is acyclic and
    one memoised backward pass is exact.
    """
    model = _Model(dist)
    values, q = {}, {}

    def solve(state: EvalState) -> float:
        code = state.encode()
        if code in values:
            return values[code]
        acts = model.actions(state)
        if not acts:
            values[code] = 0.0
            return 0.0
        mass = model.probs * model.consistent(state)
        total = mass.sum()
        best = -np.inf
        for e in acts:
            qa = 0.0
            for outcome in (0, 1):
                p = mass[model.worlds[:, e] == outcome].sum() / total
                if p == 0.0:
                    continue
                nxt = state.copy()
                nxt.mark(e, outcome)
                qa += p * (-1.0 + solve(nxt))
            q[(code, e)] = qa
            best = max(best, qa)
        values[code] = best
        return best

    solve(EvalState(dist.graph.n_edges))
    return ValueSolution(values, q, dist.graph.n_edges, model)


# -- tabular Q-learning --------------------------------------------------------

@dataclass(frozen=True)
class QLearnParams:
    episodes: int = 3000
    exploration_episodes: int = 100
    epsilon0: float = 1.0
    gamma: float = 1.0
    alpha: float = 0.5
    epsilon_floor: float = 0.05

    def __post_init__(self):
        if self.episodes < 1 or self.exploration_episodes < 1:
            raise ConfigurationError("episode counts must be positive")
        if not (0 < self.epsilon0 <= 1 and 0 < self.gamma <= 1 and self.alpha > 0):
            raise ConfigurationError("need epsilon0, gamma in (0, 1] and alpha > 0")

    def epsilon(self, episode: int) -> float:
        """epsilon0 during the exploration episodes, then linear decay to the floor."""
        if episode < self.exploration_episodes:
            return self.epsilon0
        span = max(self.episodes - self.exploration_episodes - 1, 1)
        frac = min((episode - self.exploration_episodes) / span, 1.0)
        return self.epsilon0 + frac * (self.epsilon_floor - self.epsilon0)


QLEARN_PRESETS = {
    "env1": QLearnParams(episodes=3000, exploration_episodes=100, epsilon0=1.0, gamma=1.0, alpha=0.5),
    "env2": QLearnParams(episodes=3500, exploration_episodes=150, epsilon0=1.0, gamma=1.0, alpha=0.5),
}


class QTable(dict):
    """(state code, edge) -> value; missing entries read as 0."""

    def value(self, code: int, edge: int) -> float:
        return self.get((code, edge), 0.0)

    def greedy(self, code: int, actions: list) -> int:
        return max(actions, key=lambda e: (self.value(code, e), -actions.index(e)))

    def selector(self):
        def select(state, path, ctx):
            return self.greedy(state.encode(), state.unevaluated_on(path))

        return select


@dataclass
class QLearnResult:
    table: QTable
    rewards: np.ndarray
    checkpoints: list  # (episode, exact expected reward of the greedy policy)

    def selector(self):
        return self.table.selector()


def tabular_qlearn(dist: WorldDistribution, params: QLearnParams = QLearnParams(), seed: int = 0,
                   checkpoint_every: int = 0) -> QLearnResult:
    """Epsilon-greedy Q-learning over the 3^|E| state space with one-step backups."""
    model = _Model(dist)
    table = QTable()
    rng = make_rng(seed, 0x51)
    rewards = np.zeros(params.episodes)
    checkpoints = []
    n = dist.graph.n_edges
    for ep in range(params.episodes):
        eps = params.epsilon(ep)
        world = model.worlds[rng.choice(len(model.probs), p=model.probs)]
        state = EvalState(n)
        code = state.encode()
        acts = model.actions(state)
        steps = 0
        while acts:
            if rng.random() < eps:
                a = acts[int(rng.integers(len(acts)))]
            else:
                a = table.greedy(code, acts)
            state.mark(a, world[a])
            steps += 1
            nxt_code = state.encode()
            nxt_acts = model.actions(state)
            future = max(table.value(nxt_code, b) for b in nxt_acts) if nxt_acts else 0.0
            old = table.value(code, a)
            table[(code, a)] = old + params.alpha * (-1.0 + params.gamma * future - old)
            code, acts = nxt_code, nxt_acts
        rewards[ep] = -steps
        if checkpoint_every and (ep + 1) % checkpoint_every == 0:
            checkpoints.append((ep + 1, exact_expected_reward(dist, table.selector())))
    return QLearnResult(table, rewards, checkpoints)
