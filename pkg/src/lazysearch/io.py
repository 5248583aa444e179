"""File formats: graphs, worlds, dataset directories, Q-tables and CSV tables."""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path as FsPath

import numpy as np

from .errors import ConfigurationError, IntegrityError
from .graph import ExplicitGraph
from .worlds import DatasetManifest

MANIFEST_NAME = "manifest.json"
GRAPH_NAME = "graph.json"


def _dump(obj, path) -> None:
    path = FsPath(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None


def save_graph(graph: ExplicitGraph, path) -> None:
    _dump(graph.to_dict(), path)


def load_graph(path) -> ExplicitGraph:
    return ExplicitGraph.from_dict(_load(path))


def world_to_dict(world, graph: ExplicitGraph) -> dict:
    bits = "".join("1" if b else "0" for b in np.asarray(world))
    if len(bits) != graph.n_edges:
        raise ConfigurationError("world size does not match the graph")
    return {"graph_hash": graph.digest, "bits": bits}


def world_from_dict(data: dict, graph: ExplicitGraph) -> np.ndarray:
    if data.get("graph_hash") != graph.digest:
        raise IntegrityError("world file belongs to a different graph")
    bits = data.get("bits", "")
    if len(bits) != graph.n_edges or set(bits) - {"0", "1"}:
        raise ConfigurationError("world bits must be one '0'/'1' per edge")
    return np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")


def save_world(world, graph: ExplicitGraph, path) -> None:
    _dump(world_to_dict(world, graph), path)


def load_world(path, graph: ExplicitGraph) -> np.ndarray:
    return world_from_dict(_load(path), graph)


def save_manifest(manifest: DatasetManifest, directory) -> FsPath:
    """Write ``graph.json``, one file per world and ``manifest.json``."""
    directory = FsPath(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_graph(manifest.graph, directory / GRAPH_NAME)
    names = []
    for i, w in enumerate(manifest.worlds):
        name = f"worlds/world_{i:05d}.json"
        save_world(w, manifest.graph, directory / name)
        names.append(name)
    _dump({
        "generator": manifest.generator,
        "params": manifest.params,
        "seed": manifest.seed,
        "graph": GRAPH_NAME,
        "graph_hash": manifest.graph.digest,
        "worlds": names,
        "splits": manifest.splits,
        "probs": None if manifest.probs is None else np.asarray(manifest.probs).tolist(),
    }, directory / MANIFEST_NAME)
    return directory


def load_manifest(directory) -> DatasetManifest:
    directory = FsPath(directory)
    meta = _load(directory / MANIFEST_NAME)
    graph = load_graph(directory / meta["graph"])
    if graph.digest != meta.get("graph_hash"):
        raise IntegrityError("graph file does not match the manifest hash")
    worlds = np.array([load_world(directory / name, graph) for name in meta["worlds"]], dtype=np.uint8)
    if len(worlds) == 0:
        worlds = np.zeros((0, graph.n_edges), dtype=np.uint8)
    probs = meta.get("probs")
    return DatasetManifest(graph, worlds, meta["splits"], meta["generator"], meta.get("params", {}),
                           meta.get("seed", 0), None if probs is None else np.array(probs),
                           str(directory / meta["graph"]), [str(directory / n) for n in meta["worlds"]])


def write_csv(path, schema: str, header, rows) -> None:
    """CSV whose first line names the schema, e.g. ``# schema: bench/v1``."""
    path = FsPath(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {schema}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def read_csv(path):
    """(schema, rows as dicts)."""
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# schema:"):
            raise ConfigurationError(f"{path}: missing schema line")
        return first.split(":", 1)[1].strip(), list(csv.DictReader(fh))


def save_qtable(table, n_edges: int, path) -> None:
    entries = sorted([code, edge, value] for (code, edge), value in table.items())
    _dump({"n_edges": n_edges, "entries": entries}, path)


def load_qtable(path):
    from .rl import QTable

    data = _load(path)
    return QTable({(int(c), int(e)): float(v) for c, e, v in data["entries"]}), int(data["n_edges"])


def output_root(default: str = "runs") -> FsPath:
    return FsPath(os.environ.get("LAZYSEARCH_OUTPUT", default))
