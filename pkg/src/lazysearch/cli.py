"""Command line harness: ``lazysearch <command> [--config FILE] [--set key=value ...]``.

Every command reads one JSON config, validates it strictly and writes its
outputs under ``out`` (default ``$LAZYSEARCH_OUTPUT/<command>``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path as FsPath
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import io
from .bayes import (DRDInstance, build_regions, greedy_expected_cost, optimal_drd_cost,
                    run_bayesian_lsp)
from .errors import ConfigurationError, LazySearchError
from .features import FEATURE_NAMES, hallucinate, path_features
from .imitation import LinearPolicy, TrainConfig, select_best_heuristic, stroll_train
from .lazysp import BASELINES, UNINFORMED, run_lazysp
from .oracle import APPROX_ORACLE, approx_oracle_action
from .rl import (QLEARN_PRESETS, QLearnParams, dataset_context, evaluate_selector, exact_expected_reward,
                 exact_value_iteration, tabular_qlearn)
from .worlds import (GRID_KINDS, DatasetManifest, WorldDistribution, distribution_manifest,
                     env1_distribution, env2_distribution, grid_dataset)

log = logging.getLogger("lazysearch")

ENVS = {"env1": env1_distribution, "env2": env2_distribution}
FRACTIONS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


class _Config(BaseModel):
    model_config = ConfigDict(extra="forbid")
    out: Optional[str] = None
    seed: int = 0


class GenConfig(_Config):
    kind: str
    grid_size: int = Field(10, ge=4)
    n_worlds: int = Field(200, ge=1)
    n_train: Optional[int] = Field(None, ge=0)
    n_val: Optional[int] = Field(None, ge=0)

    @field_validator("kind")
    @classmethod
    def _kind(cls, v):
        if v not in GRID_KINDS and v not in ENVS:
            raise ValueError(f"kind must be one of {sorted(ENVS) + list(GRID_KINDS)}")
        return v


class TrainCmdConfig(_Config):
    dataset: str
    mode: Literal["stroll", "stroll-heuristic", "behavior-clone"] = "stroll"
    iterations: int = Field(10, ge=1)
    episodes: int = Field(50, ge=1)
    betas: Optional[list[float]] = None
    heuristic: Optional[str] = None
    reg: float = Field(1e-2, ge=0)
    skip_indifferent: bool = True


class BenchConfig(_Config):
    datasets: list[str]
    selectors: list[str] = Field(default_factory=lambda: list(BASELINES) + ["oracle"])
    split: str = "test"
    n_episodes: Optional[int] = Field(None, ge=1)


class QLearnConfig(_Config):
    env: Literal["env1", "env2"]
    episodes: Optional[int] = Field(None, ge=1)
    exploration_episodes: Optional[int] = Field(None, ge=1)
    epsilon0: Optional[float] = None
    gamma: Optional[float] = None
    alpha: Optional[float] = None
    epsilon_floor: float = 0.05
    checkpoint_every: int = Field(0, ge=0)


class EC2Config(_Config):
    source: str  # env1, env2, a dataset directory or an instance file
    worlds: Union[Literal["all"], list[int]] = "all"
    costs: Optional[list[float]] = None
    optimal: bool = False  # also compare greedy and optimal expected cost (small instances)


class StressConfig(_Config):
    policy: str
    dataset: str
    contaminant: str
    split: str = "test"
    n_worlds: Optional[int] = Field(None, ge=1)
    fractions: list[float] = Field(default_factory=lambda: list(FRACTIONS))


class FeaturesDumpConfig(_Config):
    dataset: str
    selector: str = "forward"
    split: str = "train"
    n_episodes: Optional[int] = Field(None, ge=1)


# -- shared helpers --------------------------------------------------------------

def load_source(ref: str) -> Union[WorldDistribution, DatasetManifest]:
    if ref in ENVS:
        return ENVS[ref]()
    return io.load_manifest(ref)


def as_manifest(source) -> DatasetManifest:
    return distribution_manifest(source) if isinstance(source, WorldDistribution) else source


def resolve_selector(spec: str):
    """(label, selector) for a baseline name, ``oracle`` or ``policy:<file>``."""
    if spec == "oracle":
        return "oracle", APPROX_ORACLE
    if spec.startswith("policy:"):
        path = FsPath(spec.split(":", 1)[1])
        if not path.exists():
            raise ConfigurationError(f"policy file not found: {path}")
        return path.stem, LinearPolicy.load(path)
    if spec in BASELINES:
        return spec, BASELINES[spec]
    raise ConfigurationError(f"unknown selector {spec!r}")


def _out_dir(cfg: _Config, command: str) -> FsPath:
    out = FsPath(cfg.out) if cfg.out else io.output_root() / command
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands ------------------------------------------------------------------

def cmd_gen(cfg: GenConfig) -> FsPath:
    if cfg.kind in ENVS:
        manifest = distribution_manifest(ENVS[cfg.kind]())
    else:
        manifest = grid_dataset(cfg.kind, cfg.grid_size, cfg.n_worlds, cfg.seed, cfg.n_train, cfg.n_val)
    out = _out_dir(cfg, "gen")
    io.save_manifest(manifest, out)
    log.info("wrote %d worlds to %s", len(manifest.worlds), out)
    return out


def cmd_train(cfg: TrainCmdConfig) -> FsPath:
    source = load_source(cfg.dataset)
    iterations, betas, rollin = cfg.iterations, cfg.betas, "oracle"
    if cfg.mode == "behavior-clone":
        iterations, betas = 1, [1.0]
    elif cfg.mode == "stroll-heuristic":
        rollin = cfg.heuristic or select_best_heuristic(source, UNINFORMED, cfg.seed)
    tc = TrainConfig(iterations=iterations, episodes=cfg.episodes, betas=betas, rollin=rollin,
                     reg=cfg.reg, seed=cfg.seed, skip_indifferent=cfg.skip_indifferent)
    result = stroll_train(source, tc)
    out = _out_dir(cfg, "train")
    result.policy.provenance.update(mode=cfg.mode, dataset=cfg.dataset)
    result.policy.save(out / "policy.json")
    io.write_csv(out / "train_log.csv", "train-log/v1",
                 ["iteration", "dataset_size", "train_accuracy", "val_mean", "val_median", "skipped"],
                 [[h.iteration, h.dataset_size, h.train_accuracy, h.val_mean, h.val_median, h.skipped]
                  for h in result.history])
    log.info("best iterate %d, validation mean %.3f", result.best_index,
             result.history[result.best_index].val_mean)
    return out


def _bench_one(args):
    ref, spec, split, n_episodes, seed = args
    source = load_source(ref)
    label, selector = resolve_selector(spec)
    rep = evaluate_selector(source, selector, n_episodes=n_episodes, seed=seed, split=split)
    return [ref, label, -rep.median, -rep.median_ci_high, -rep.median_ci_low, -rep.mean,
            "" if rep.exact is None else -rep.exact, len(rep.rewards)]


def cmd_bench(cfg: BenchConfig, jobs: int = 1) -> FsPath:
    for spec in cfg.selectors:
        resolve_selector(spec)
    tasks = [(d, s, cfg.split, cfg.n_episodes, cfg.seed) for d in cfg.datasets for s in cfg.selectors]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(_bench_one, tasks))
    else:
        rows = [_bench_one(t) for t in tasks]
    out = _out_dir(cfg, "bench")
    io.write_csv(out / "bench.csv", "bench/v1",
                 ["dataset", "selector", "median_evals", "ci_low", "ci_high", "mean_evals",
                  "exact_mean_evals", "n_worlds"], rows)
    return out


def cmd_qlearn(cfg: QLearnConfig) -> FsPath:
    base = QLEARN_PRESETS[cfg.env]
    params = QLearnParams(
        episodes=cfg.episodes or base.episodes,
        exploration_episodes=cfg.exploration_episodes or base.exploration_episodes,
        epsilon0=base.epsilon0 if cfg.epsilon0 is None else cfg.epsilon0,
        gamma=base.gamma if cfg.gamma is None else cfg.gamma,
        alpha=base.alpha if cfg.alpha is None else cfg.alpha,
        epsilon_floor=cfg.epsilon_floor,
    )
    dist = ENVS[cfg.env]()
    result = tabular_qlearn(dist, params, cfg.seed, cfg.checkpoint_every)
    optimum = exact_value_iteration(dist).initial_value
    learned = exact_expected_reward(dist, result.selector())
    out = _out_dir(cfg, "qlearn")
    running = np.cumsum(result.rewards) / np.arange(1, len(result.rewards) + 1)
    io.write_csv(out / "curve.csv", "qlearn-curve/v1", ["episode", "reward", "running_mean"],
                 [[i + 1, r, m] for i, (r, m) in enumerate(zip(result.rewards, running))])
    io.save_qtable(result.table, dist.graph.n_edges, out / "qtable.json")
    summary = {"env": cfg.env, "optimal_value": optimum, "learned_value": learned,
               "gap": optimum - learned, "checkpoints": result.checkpoints}
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1)
    log.info("V* = %.4f, greedy Q policy = %.4f", optimum, learned)
    return out


def cmd_ec2(cfg: EC2Config) -> FsPath:
    ref = FsPath(cfg.source)
    if ref.suffix == ".json" and ref.is_file():
        with open(ref) as fh:
            inst = DRDInstance.from_dict(json.load(fh))
        graph = None
    else:
        manifest = as_manifest(load_source(cfg.source))
        graph = manifest.graph
        probs = manifest.probs
        if probs is None:
            probs = np.full(len(manifest.worlds), 1.0 / len(manifest.worlds))
        inst = build_regions(graph, manifest.worlds, probs, cfg.costs)
    if cfg.costs is not None and graph is None:
        inst = DRDInstance(inst.outcomes, inst.priors, inst.regions, np.array(cfg.costs))
    bound = None
    if cfg.optimal:
        bound = {"greedy_cost": greedy_expected_cost(inst), "optimal_cost": optimal_drd_cost(inst),
                 "p_min": inst.p_min}
    which = range(inst.n_hypotheses) if cfg.worlds == "all" else cfg.worlds
    rows, summary = [], []
    for h in which:
        if not 0 <= h < inst.n_hypotheses:
            raise ConfigurationError(f"world index {h} out of range")
        res = run_bayesian_lsp(graph, None, None, inst.outcomes[h], instance=inst)
        for k, st in enumerate(res.log):
            rows.append([h, k, st.test, st.outcome, st.fec, st.surviving_regions])
        path = res.path
        summary.append({"world": h, "region": res.region, "cost": res.cost, "evaluated": res.evaluated,
                        "path": None if path is None else list(path.edges)})
    out = _out_dir(cfg, "ec2")
    io.write_csv(out / "ec2_log.csv", "ec2-log/v1",
                 ["world", "step", "test", "outcome", "fec", "surviving_regions"], rows)
    with open(out / "ec2_summary.json", "w") as fh:
        json.dump(summary, fh, indent=1)
    if bound is not None:
        with open(out / "ec2_bound.json", "w") as fh:
            json.dump(bound, fh, indent=1)
    return out


def contaminated_worlds(base: np.ndarray, other: np.ndarray, fraction: float) -> np.ndarray:
    """The first ``round(f n)`` worlds come from ``other``, the rest from ``base``."""
    n = len(base)
    k = int(round(fraction * n))
    if k > len(other):
        raise ConfigurationError("contaminant split is smaller than the requested share")
    return np.concatenate([other[:k], base[k:]]).astype(np.uint8)


def cmd_stress(cfg: StressConfig) -> FsPath:
    base = as_manifest(load_source(cfg.dataset))
    other = as_manifest(load_source(cfg.contaminant))
    if base.graph.digest != other.graph.digest:
        raise ConfigurationError("datasets are built on different graphs")
    _, policy = resolve_selector(cfg.policy if cfg.policy.startswith("policy:") else "policy:" + cfg.policy)
    base_w, other_w = base.split(cfg.split), other.split(cfg.split)
    if cfg.n_worlds:
        base_w, other_w = base_w[:cfg.n_worlds], other_w[:cfg.n_worlds]
    ctx = dataset_context(base, cfg.seed)
    rows = []
    for f in cfg.fractions:
        if not 0.0 <= f <= 1.0:
            raise ConfigurationError("contamination fractions must lie in [0, 1]")
        mixed = DatasetManifest(base.graph, contaminated_worlds(base_w, other_w, f),
                                {"test": list(range(len(base_w)))}, "contaminated")
        learned = evaluate_selector(mixed, policy, seed=cfg.seed, ctx=ctx)
        heur = {n: evaluate_selector(mixed, BASELINES[n], seed=cfg.seed, ctx=ctx).median for n in UNINFORMED}
        best = max(heur, key=heur.get)
        rows.append([f, -learned.median, -learned.mean, best, -heur[best]])
    out = _out_dir(cfg, "stress")
    io.write_csv(out / "stress.csv", "stress/v1",
                 ["fraction", "policy_median_evals", "policy_mean_evals", "best_heuristic",
                  "heuristic_median_evals"], rows)
    return out


def feature_dump_rows(manifest: DatasetManifest, selector, split: str = "train", n_episodes=None,
                      seed: int = 0) -> list:
    """(episode, step, edge, 6 features, oracle label) for every candidate edge visited."""
    worlds = manifest.split(split)
    if n_episodes is not None:
        worlds = worlds[:n_episodes]
    ctx = dataset_context(manifest, seed)
    rows = []
    for ep, world in enumerate(worlds):
        step = [0]

        def record(state, path, ctx):
            hall = hallucinate(ctx.graph, state, state.unevaluated_on(path))
            edges, F = path_features(state, path, ctx, hall)
            label = approx_oracle_action(state, path, world, ctx.graph, hall)
            for e, f in zip(edges, F):
                rows.append([ep, step[0], e, *f.tolist(), int(e == label)])
            step[0] += 1
            return selector(state, path, ctx)

        ctx.reset(seed + ep)
        run_lazysp(manifest.graph, world, record, ctx, record_trace=False)
    return rows


def cmd_features_dump(cfg: FeaturesDumpConfig) -> FsPath:
    manifest = as_manifest(load_source(cfg.dataset))
    _, selector = resolve_selector(cfg.selector)
    if selector is APPROX_ORACLE:
        raise ConfigurationError("feature dumps need a non-clairvoyant roll-in selector")
    rows = feature_dump_rows(manifest, selector, cfg.split, cfg.n_episodes, cfg.seed)
    out = _out_dir(cfg, "features-dump")
    io.write_csv(out / "features.csv", "features/v1",
                 ["episode", "step", "edge_id", *FEATURE_NAMES, "oracle_label"], rows)
    return out


COMMANDS = {
    "gen": (GenConfig, cmd_gen),
    "train": (TrainCmdConfig, cmd_train),
    "bench": (BenchConfig, cmd_bench),
    "qlearn": (QLearnConfig, cmd_qlearn),
    "ec2": (EC2Config, cmd_ec2),
    "stress": (StressConfig, cmd_stress),
    "features-dump": (FeaturesDumpConfig, cmd_features_dump),
}


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def load_config(command: str, path: Optional[str], overrides) -> _Config:
    data = {}
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigurationError("config file must hold a JSON object")
    for item in overrides or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        data[key.strip()] = _parse_value(raw)
    model = COMMANDS[command][0]
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lazysearch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        if name == "bench":
            p.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.command, args.config, args.set)
        fn = COMMANDS[args.command][1]
        out = fn(cfg, args.jobs) if args.command == "bench" else fn(cfg)
    except LazySearchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
