import json

import numpy as np
import pytest

from lazysearch import io
from lazysearch.errors import ConfigurationError, IntegrityError
from lazysearch.graph import grid_graph
from lazysearch.rl import tabular_qlearn
from lazysearch.worlds import env1_distribution, grid_dataset


def test_graph_roundtrip(tmp_path):
    g = grid_graph(5)
    io.save_graph(g, tmp_path / "g.json")
    back = io.load_graph(tmp_path / "g.json")
    assert back.digest == g.digest
    assert np.array_equal(back.lengths, g.lengths)


def test_world_roundtrip_and_hash_check(tmp_path):
    g = grid_graph(4)
    w = (np.arange(g.n_edges) % 3 != 0).astype(np.uint8)
    io.save_world(w, g, tmp_path / "w.json")
    assert np.array_equal(io.load_world(tmp_path / "w.json", g), w)
    with pytest.raises(IntegrityError):
        io.load_world(tmp_path / "w.json", grid_graph(5))
    with pytest.raises(ConfigurationError):
        io.world_to_dict(w[:-1], g)
    bad = io.world_to_dict(w, g)
    bad["bits"] = bad["bits"][:-1] + "x"
    with pytest.raises(ConfigurationError):
        io.world_from_dict(bad, g)


def test_manifest_roundtrip(tmp_path):
    m = grid_dataset("forest", 6, 12, seed=2)
    io.save_manifest(m, tmp_path / "d")
    back = io.load_manifest(tmp_path / "d")
    assert np.array_equal(back.worlds, m.worlds)
    assert back.splits == m.splits and back.graph.digest == m.graph.digest
    assert back.generator == m.generator and back.seed == m.seed


def test_manifest_detects_foreign_graph(tmp_path):
    io.save_manifest(grid_dataset("forest", 6, 3, seed=2), tmp_path / "d")
    io.save_graph(grid_graph(7), tmp_path / "d" / "graph.json")
    with pytest.raises(IntegrityError):
        io.load_manifest(tmp_path / "d")


def test_missing_and_corrupt_files(tmp_path):
    with pytest.raises(ConfigurationError):
        io.load_manifest(tmp_path / "nothing")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigurationError):
        io.load_graph(tmp_path / "bad.json")


def test_csv_schema_line(tmp_path):
    io.write_csv(tmp_path / "t.csv", "demo/v1", ["a", "b"], [[1, 0.1], [np.int64(2), np.float64(1 / 3)]])
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "# schema: demo/v1"
    schema, rows = io.read_csv(tmp_path / "t.csv")
    assert schema == "demo/v1" and float(rows[1]["b"]) == 1 / 3 and rows[1]["a"] == "2"
    (tmp_path / "plain.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ConfigurationError):
        io.read_csv(tmp_path / "plain.csv")


def test_qtable_roundtrip(tmp_path):
    res = tabular_qlearn(env1_distribution(), seed=0)
    io.save_qtable(res.table, 6, tmp_path / "q.json")
    table, n = io.load_qtable(tmp_path / "q.json")
    assert n == 6 and dict(table) == dict(res.table)
    assert json.loads((tmp_path / "q.json").read_text())["n_edges"] == 6


def test_output_root(monkeypatch):
    monkeypatch.setenv("LAZYSEARCH_OUTPUT", "/tmp/elsewhere")
    assert str(io.output_root()) == "/tmp/elsewhere"
    monkeypatch.delenv("LAZYSEARCH_OUTPUT")
    assert str(io.output_root()) == "runs"
