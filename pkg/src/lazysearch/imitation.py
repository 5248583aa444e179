"""Imitation of the clairvoyant oracle with dataset aggregation (STROLL).

The learner is a linear scorer over the six edge features. Each training
episode rolls in with a per-step mixture of a roll-in policy and the current
learner, and every visited state is labelled with the oracle's choice.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from ._rng import make_rng
from .errors import ConfigurationError, NoFeasiblePathError
from .features import FEATURE_NAMES, N_FEATURES, hallucinate, path_features
from .graph import shortest_path
from .lazysp import UNINFORMED, SelectorContext, get_selector, run_lazysp
from .oracle import approx_oracle_action
from .rl import dataset_context, evaluate_selector, exact_expected_reward
from .worlds import DatasetManifest, WorldDistribution, sample_world

log = logging.getLogger(__name__)


@dataclass
class LinearPolicy:
    """Scores ``w . f(s, e) + b`` and picks the best unevaluated path edge.

    Ties go to the earliest edge along the path. ``weights`` act on raw
    features; ``standardization`` only records how they were fitted.
    """

    weights: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES))
    bias: float = 0.0
    standardization: Optional[dict] = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if self.weights.shape != (N_FEATURES,):
            raise ConfigurationError(f"policy needs {N_FEATURES} weights")
        if not (np.all(np.isfinite(self.weights)) and np.isfinite(self.bias)):
            raise ConfigurationError("policy weights must be finite")

    @classmethod
    def single_feature(cls, name: str, weight: float = 1.0) -> "LinearPolicy":
        w = np.zeros(N_FEATURES)
        w[FEATURE_NAMES.index(name)] = weight
        return cls(w, provenance={"source": f"hand-set {name}"})

    def scores(self, F: np.ndarray) -> np.ndarray:
        return F @ self.weights + self.bias

    def choose(self, edges: list, F: np.ndarray) -> int:
        return edges[int(np.argmax(self.scores(F)))]

    def __call__(self, state, path, ctx):
        edges, F = path_features(state, path, ctx)
        return self.choose(edges, F)

    def to_dict(self) -> dict:
        return {
            "feature_names": list(FEATURE_NAMES),
            "weights": self.weights.tolist(),
            "bias": float(self.bias),
            "standardization": self.standardization,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearPolicy":
        if list(d.get("feature_names", FEATURE_NAMES)) != list(FEATURE_NAMES):
            raise ConfigurationError("policy file has a different feature layout")
        return cls(np.array(d["weights"]), float(d.get("bias", 0.0)),
                   d.get("standardization"), d.get("provenance", {}))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "LinearPolicy":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


class AggregatedDataset:
    """Append-only rows of (candidate features, oracle index, iteration)."""

    def __init__(self):
        self.features: list = []
        self.labels: list = []
        self.iterations: list = []

    def __len__(self) -> int:
        return len(self.labels)

    def append(self, F: np.ndarray, label: int, iteration: int) -> None:
        F = np.asarray(F, dtype=np.float64)
        if F.ndim != 2 or F.shape[1] != N_FEATURES or not 0 <= label < len(F):
            raise ConfigurationError("row needs k x 6 features and a label in range")
        self.features.append(F)
        self.labels.append(int(label))
        self.iterations.append(int(iteration))

    def extend(self, other: "AggregatedDataset") -> None:
        for F, y, it in zip(other.features, other.labels, other.iterations):
            self.append(F, y, it)

    def rows_in(self, iteration: int) -> int:
        return sum(1 for it in self.iterations if it == iteration)

    def stacked(self):
        """(X, row offsets, global label positions) for vectorised fitting."""
        sizes = np.array([len(F) for F in self.features])
        offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        X = np.vstack(self.features) if self.features else np.empty((0, N_FEATURES))
        return X, offsets, offsets + np.array(self.labels, dtype=np.int64)

    def accuracy(self, policy: LinearPolicy) -> float:
        if not self.labels:
            return float("nan")
        hits = [int(np.argmax(policy.scores(F))) == y for F, y in zip(self.features, self.labels)]
        return float(np.mean(hits))


def _standardizer(dataset: AggregatedDataset) -> dict:
    X, _, _ = dataset.stacked()
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale < 1e-12] = 1.0
    return {"mean": mean.tolist(), "scale": scale.tolist()}


def _softmax_loss(X, offsets, pos, reg):
    n_rows = len(offsets)
    seg = np.repeat(np.arange(n_rows), np.diff(np.append(offsets, len(X))))

    def parts(w):
        s = X @ w
        m = np.maximum.reduceat(s, offsets)
        e = np.exp(s - m[seg])
        z = np.add.reduceat(e, offsets)
        p = e / z[seg]
        return s, m, z, p

    def fun(w):
        s, m, z, _ = parts(w)
        return float(np.mean(m + np.log(z) - s[pos]) + 0.5 * reg * w @ w)

    def jac(w):
        _, _, _, p = parts(w)
        g = X.T @ p - X[pos].sum(axis=0)
        return g / n_rows + reg * w

    def hess(w):
        _, _, _, p = parts(w)
        mu = np.add.reduceat(X * p[:, None], offsets)
        H = (X * p[:, None]).T @ X - mu.T @ mu
        return H / n_rows + reg * np.eye(X.shape[1])

    return fun, jac, hess


def fit_classifier(dataset: AggregatedDataset, reg: float = 1e-2,
                   standardization: Optional[dict] = None) -> LinearPolicy:
    """Softmax cross-entropy over each row's candidates plus ``reg/2 |w|^2``.

    The bias cancels inside every candidate set, so only the weights are
    fitted; the stored bias absorbs the standardisation offset.
    """
    if len(dataset) == 0:
        raise ConfigurationError("cannot fit an empty dataset")
    if reg < 0:
        raise ConfigurationError("regularisation must be non-negative")
    if standardization is None:
        standardization = _standardizer(dataset)
    prov = {"rows": len(dataset), "reg": reg}
    if all(len(F) == 1 for F in dataset.features):
        warnings.warn("every row has a single candidate; fitting a constant policy", RuntimeWarning)
        return LinearPolicy(standardization=standardization, provenance=prov)
    mean = np.asarray(standardization["mean"])
    scale = np.asarray(standardization["scale"])
    X, offsets, pos = dataset.stacked()
    Z = (X - mean) / scale
    fun, jac, hess = _softmax_loss(Z, offsets, pos, reg)
    res = minimize(fun, np.zeros(N_FEATURES), jac=jac, hess=hess, method="trust-exact",
                   options={"gtol": 1e-6, "maxiter": 500})
    if not res.success:
        log.warning("classifier fit stopped early: %s", res.message)
    w = res.x / scale
    prov.update(loss=float(res.fun), converged=bool(res.success))
    return LinearPolicy(w, float(-w @ mean), standardization, prov)


def rollin_mixture(learner, rollin_policy, beta: float, seed: int = 0):
    """Per decision, act with ``rollin_policy`` with probability ``beta``."""
    if not 0.0 <= beta <= 1.0:
        raise ConfigurationError("beta must lie in [0, 1]")
    rng = make_rng(seed, 0x3D)

    def select(state, path, ctx):
        pick = rollin_policy if rng.random() < beta else learner
        select.delegations.append(pick is rollin_policy)
        return pick(state, path, ctx)

    select.delegations = []
    return select


def _mean_reward(source, selector, split: str = "train", seed: int = 0) -> float:
    if isinstance(source, WorldDistribution) and source.explicit:
        return exact_expected_reward(source, selector)
    return evaluate_selector(source, selector, seed=seed, split=split).mean


def select_best_heuristic(source, candidates: Sequence[str] = UNINFORMED, seed: int = 0) -> str:
    """Baseline with the best mean training reward (first listed wins ties)."""
    if not candidates:
        raise ConfigurationError("no candidate heuristics")
    best, best_r = None, -np.inf
    for name in candidates:
        r = _mean_reward(source, get_selector(name), "train", seed)
        if r > best_r:
            best, best_r = name, r
    return best


@dataclass
class TrainConfig:
    iterations: int = 10
    episodes: int = 50
    betas: Optional[list] = None  # defaults to [1, 0, 0, ...]
    rollin: str = "oracle"  # "oracle" or the name of a baseline selector
    reg: float = 1e-2
    seed: int = 0
    leave_one_out: Optional[bool] = None  # default: on for datasets, off for explicit supports
    # with no invalid edge left on the path every order costs the same, so the
    # oracle's label carries no signal
    skip_indifferent: bool = True

    def __post_init__(self):
        if self.iterations < 1 or self.episodes < 1:
            raise ConfigurationError("iterations and episodes must be >= 1")
        if self.betas is None:
            self.betas = [1.0] + [0.0] * (self.iterations - 1)
        if len(self.betas) != self.iterations or not all(0.0 <= b <= 1.0 for b in self.betas):
            raise ConfigurationError("need one beta in [0, 1] per iteration")
        if self.rollin != "oracle":
            get_selector(self.rollin)

    def beta(self, i: int) -> float:
        return self.betas[i]


@dataclass
class IterationLog:
    iteration: int
    dataset_size: int
    train_accuracy: float
    val_mean: float
    val_median: float
    skipped: int


@dataclass
class StrollResult:
    policy: LinearPolicy
    iterates: list
    history: list  # IterationLog per iterate (iterate 0 is the untrained policy)
    dataset: AggregatedDataset
    best_index: int

    def log_rows(self) -> list:
        return [vars(h) for h in self.history]


class _Source:
    """Uniform access to training worlds for explicit supports and datasets."""

    def __init__(self, source, config: TrainConfig):
        self.source = source
        if isinstance(source, DatasetManifest):
            self.graph = source.graph
            self.train = source.split("train")
            if len(self.train) == 0:
                raise ConfigurationError("dataset has no training worlds")
            self.weights = source.split_weights("train")
            self.loo = True if config.leave_one_out is None else config.leave_one_out
            self.base_ctx = dataset_context(source, config.seed)
        elif isinstance(source, WorldDistribution) and source.explicit:
            self.graph = source.graph
            self.train = source.worlds
            self.weights = source.probs
            self.loo = bool(config.leave_one_out)
            self.base_ctx = SelectorContext.from_distribution(source, config.seed)
        else:
            # features need priors and posterior worlds; sample a dataset first
            raise ConfigurationError("train on an explicit distribution or a dataset manifest")

    def sample(self, rng):
        """(world, index into training worlds or None)."""
        if isinstance(self.source, DatasetManifest):
            p = None if self.weights is None else self.weights / self.weights.sum()
            i = int(rng.choice(len(self.train), p=p))
            return self.train[i], i
        w = sample_world(self.source, rng)
        return w, None

    def context(self, idx, seed):
        ctx = self.base_ctx
        if self.loo and idx is not None and len(self.train) > 1:
            keep = np.arange(len(self.train)) != idx
            weights = None if self.weights is None else self.weights[keep]
            ctx = ctx.with_worlds(self.train[keep], weights)
        ctx.reset(seed)
        return ctx

    def validate(self, policy, seed) -> tuple:
        src = self.source
        if isinstance(src, DatasetManifest):
            split = "validation" if len(src.split("validation")) else "train"
            rep = evaluate_selector(src, policy, seed=seed, split=split, ctx=self.base_ctx)
            return float(rep.mean), float(rep.median)
        v = exact_expected_reward(src, policy, self.base_ctx)
        return float(v), float(v)


def _episode(graph, world, ctx, learner, rollin, beta, rng, dataset, iteration, skip_indifferent):
    """One mixture roll-in that records an oracle label at every state."""

    def select(state, path, ctx):
        hall = hallucinate(graph, state, state.unevaluated_on(path))
        edges, F = path_features(state, path, ctx, hall)
        label = approx_oracle_action(state, path, world, graph, hall)
        if not (skip_indifferent and all(world[e] for e in edges)):
            dataset.append(F, edges.index(label), iteration)
        if rng.random() < beta:
            return label if rollin is None else rollin(state, path, ctx)
        return learner.choose(edges, F)

    run_lazysp(graph, world, select, ctx, record_trace=False)


def stroll_train(source, config: TrainConfig = TrainConfig()) -> StrollResult:
    """Aggregate oracle labels over N iterations and keep the best validated iterate."""
    src = _Source(source, config)
    graph = src.graph
    rollin = None if config.rollin == "oracle" else get_selector(config.rollin)
    dataset = AggregatedDataset()
    learner = LinearPolicy(provenance={"iteration": 0})
    iterates = [learner]
    standardization = None
    skipped_per_iter = [0]
    for i in range(config.iterations):
        skipped = 0
        for m in range(config.episodes):
            rng = make_rng(config.seed, i, m)
            world, idx = src.sample(rng)
            if shortest_path(graph, np.asarray(world) == 0) is None:
                skipped += 1
                log.warning("skipping infeasible training world (iteration %d, episode %d)", i, m)
                continue
            ctx = src.context(idx, config.seed + m)
            _episode(graph, world, ctx, learner, rollin, config.beta(i), rng, dataset, i,
                     config.skip_indifferent)
        if len(dataset) == 0:
            raise NoFeasiblePathError("no feasible training world was sampled")
        if standardization is None:
            standardization = _standardizer(dataset)
        learner = fit_classifier(dataset, config.reg, standardization)
        learner.provenance.update(iteration=i + 1, rollin=config.rollin, seed=config.seed)
        iterates.append(learner)
        skipped_per_iter.append(skipped)

    history = []
    for k, pol in enumerate(iterates):
        mean, median = src.validate(pol, config.seed)
        acc = dataset.accuracy(pol)
        history.append(IterationLog(k, sum(1 for it in dataset.iterations if it < k), acc,
                                    mean, median, skipped_per_iter[k]))
        log.info("iterate %d: rows=%d acc=%.3f val mean=%.3f median=%.1f",
                 k, history[-1].dataset_size, acc, mean, median)
    best = max(range(len(iterates)), key=lambda k: (history[k].val_mean, -k))
    return StrollResult(iterates[best], iterates, history, dataset, best)
