"""Lazy shortest path toolkit: selectors, clairvoyant oracles, imitation and EC2."""

from .errors import (ConfigurationError, ContractViolation, LazySearchError, NoFeasiblePathError,
                     SizeGuardError)
from .graph import EvalState, ExplicitGraph, Path, grid_graph, paths_shorter_than, shortest_path
from .imitation import LinearPolicy, TrainConfig, stroll_train
from .kernels import BACKEND
from .lazysp import BASELINES, SelectorContext, run_lazysp
from .worlds import (DatasetManifest, WorldDistribution, env1_distribution, env2_distribution,
                     grid_dataset)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BASELINES",
    "ConfigurationError",
    "ContractViolation",
    "DatasetManifest",
    "EvalState",
    "ExplicitGraph",
    "LazySearchError",
    "LinearPolicy",
    "NoFeasiblePathError",
    "Path",
    "SelectorContext",
    "SizeGuardError",
    "TrainConfig",
    "WorldDistribution",
    "env1_distribution",
    "env2_distribution",
    "grid_dataset",
    "grid_graph",
    "paths_shorter_than",
    "run_lazysp",
    "shortest_path",
    "stroll_train",
]
