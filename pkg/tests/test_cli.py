import json
import subprocess
import sys

import numpy as np
import pytest

from lazysearch import io
from lazysearch.bayes import random_instance
from lazysearch.cli import contaminated_worlds, feature_dump_rows, load_config, main
from lazysearch.errors import ConfigurationError
from lazysearch.features import FEATURE_NAMES
from lazysearch.lazysp import BASELINES
from lazysearch.worlds import grid_dataset


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def gate_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("gate")
    assert run("gen", "--set", "kind=gate", "--set", "grid_size=6", "--set", "n_worlds=20",
               "--set", f"out={out}") == 0
    return out


def test_gen_writes_dataset(gate_dir):
    m = io.load_manifest(gate_dir)
    assert len(m.worlds) == 20 and m.generator == "grid:gate"
    assert np.array_equal(m.worlds, grid_dataset("gate", 6, 20, 0).worlds)


def test_gen_env_and_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "env2", "out": str(tmp_path / "e2")}))
    assert run("gen", "--config", cfg) == 0
    assert len(io.load_manifest(tmp_path / "e2").worlds) == 2


def test_train_and_bench(gate_dir, tmp_path):
    assert run("train", "--set", f"dataset={gate_dir}", "--set", "iterations=2", "--set", "episodes=5",
               "--set", f"out={tmp_path / 't'}") == 0
    schema, rows = io.read_csv(tmp_path / "t" / "train_log.csv")
    assert schema == "train-log/v1" and len(rows) == 3
    policy = tmp_path / "t" / "policy.json"
    assert run("bench", "--set", f'datasets=["{gate_dir}"]',
               "--set", f'selectors=["forward", "oracle", "policy:{policy}"]',
               "--set", f"out={tmp_path / 'b'}") == 0
    _, rows = io.read_csv(tmp_path / "b" / "bench.csv")
    assert [r["selector"] for r in rows] == ["forward", "oracle", "policy"]
    assert all(int(r["n_worlds"]) == 8 for r in rows)


@pytest.mark.parametrize("mode", ["behavior-clone", "stroll-heuristic"])
def test_train_modes(mode, tmp_path):
    assert run("train", "--set", "dataset=env1", "--set", f"mode={mode}", "--set", "iterations=2",
               "--set", "episodes=5", "--set", f"out={tmp_path}") == 0
    prov = json.loads((tmp_path / "policy.json").read_text())["provenance"]
    assert prov["mode"] == mode


def test_bench_parallel_matches_serial(gate_dir, tmp_path):
    args = ["bench", "--set", f'datasets=["{gate_dir}"]', "--set", 'selectors=["forward", "backward"]']
    assert run(*args, "--set", f"out={tmp_path / 'a'}") == 0
    assert run(*args, "--jobs", 2, "--set", f"out={tmp_path / 'b'}") == 0
    assert (tmp_path / "a" / "bench.csv").read_bytes() == (tmp_path / "b" / "bench.csv").read_bytes()


def test_qlearn_outputs(tmp_path):
    assert run("qlearn", "--set", "env=env2", "--set", "episodes=300", "--set", "exploration_episodes=100",
               "--set", "checkpoint_every=100", "--set", f"out={tmp_path}") == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["optimal_value"] == pytest.approx(-5.0)
    assert len(summary["checkpoints"]) == 3
    _, rows = io.read_csv(tmp_path / "curve.csv")
    assert len(rows) == 300
    table, n = io.load_qtable(tmp_path / "qtable.json")
    assert n == 8 and len(table) > 0


def test_ec2_env2(tmp_path):
    assert run("ec2", "--set", "source=env2", "--set", "optimal=true", "--set", f"out={tmp_path}") == 0
    summary = json.loads((tmp_path / "ec2_summary.json").read_text())
    assert [len(s["evaluated"]) for s in summary] == [1, 1]
    bound = json.loads((tmp_path / "ec2_bound.json").read_text())
    assert bound["greedy_cost"] == bound["optimal_cost"] == 1.0
    _, rows = io.read_csv(tmp_path / "ec2_log.csv")
    assert [r["surviving_regions"] for r in rows] == ["1", "1"]


def test_ec2_instance_file(tmp_path):
    inst = random_instance(np.random.default_rng(0), 6, 5, 3)
    inst.save(tmp_path / "inst.json")
    assert run("ec2", "--set", f"source={tmp_path / 'inst.json'}", "--set", f"out={tmp_path / 'o'}") == 0
    summary = json.loads((tmp_path / "o" / "ec2_summary.json").read_text())
    assert [s["region"] for s in summary] == inst.regions.tolist()


def test_stress_and_features_dump(tmp_path):
    for kind in ("gate", "forest"):
        assert run("gen", "--set", f"kind={kind}", "--set", "grid_size=6", "--set", "n_worlds=10",
                   "--set", f"out={tmp_path / kind}") == 0
    assert run("train", "--set", f"dataset={tmp_path / 'gate'}", "--set", "iterations=1",
               "--set", "episodes=5", "--set", f"out={tmp_path / 't'}") == 0
    assert run("stress", "--set", f"policy={tmp_path / 't' / 'policy.json'}",
               "--set", f"dataset={tmp_path / 'gate'}", "--set", f"contaminant={tmp_path / 'forest'}",
               "--set", "fractions=[0.0, 0.5, 1.0]", "--set", f"out={tmp_path / 's'}") == 0
    _, rows = io.read_csv(tmp_path / "s" / "stress.csv")
    assert [float(r["fraction"]) for r in rows] == [0.0, 0.5, 1.0]
    assert run("features-dump", "--set", f"dataset={tmp_path / 'gate'}", "--set", "n_episodes=2",
               "--set", f"out={tmp_path / 'f'}") == 0
    _, rows = io.read_csv(tmp_path / "f" / "features.csv")
    assert rows and set(FEATURE_NAMES) <= set(rows[0])


def test_feature_dump_labels_one_per_step():
    m = grid_dataset("gate", 6, 10, 1)
    rows = feature_dump_rows(m, BASELINES["forward"], n_episodes=3)
    steps = {}
    for r in rows:
        steps.setdefault((r[0], r[1]), []).append(r[-1])
    assert all(sum(v) == 1 for v in steps.values())


def test_contamination_mix():
    a, b = np.zeros((10, 3)), np.ones((10, 3))
    mixed = contaminated_worlds(a, b, 0.3)
    assert mixed[:, 0].tolist() == [1] * 3 + [0] * 7
    with pytest.raises(ConfigurationError):
        contaminated_worlds(a, b[:2], 0.5)


def test_reruns_are_byte_identical(gate_dir, tmp_path):
    for name in ("a", "b"):
        assert run("train", "--set", f"dataset={gate_dir}", "--set", "iterations=2", "--set", "episodes=5",
                   "--set", f"out={tmp_path / name}") == 0
    for f in ("policy.json", "train_log.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_output_root_env(monkeypatch, tmp_path):
    monkeypatch.setenv("LAZYSEARCH_OUTPUT", str(tmp_path))
    assert run("gen", "--set", "kind=env1") == 0
    assert (tmp_path / "gen" / "manifest.json").exists()


def test_exit_codes(tmp_path, gate_dir, capsys):
    assert run("gen", "--set", "kind=volcano") == 2
    assert run("gen", "--set", "kind=gate", "--set", "colour=red") == 2
    assert run("bench", "--set", 'datasets=["env1"]', "--set", 'selectors=["sideways"]') == 2
    assert run("train", "--set", f"dataset={tmp_path / 'missing'}") == 2
    # a world file moved between datasets is a contract violation
    other = tmp_path / "other"
    run("gen", "--set", "kind=gate", "--set", "grid_size=7", "--set", "n_worlds=2", "--set", f"out={other}")
    bad = tmp_path / "bad"
    run("gen", "--set", "kind=gate", "--set", "grid_size=6", "--set", "n_worlds=2", "--set", f"out={bad}")
    (bad / "worlds" / "world_00000.json").write_text((other / "worlds" / "world_00000.json").read_text())
    assert run("bench", "--set", f'datasets=["{bad}"]', "--set", 'selectors=["forward"]') == 3
    big = random_instance(np.random.default_rng(0), 13, 6, 2)
    big.save(tmp_path / "big.json")
    assert run("ec2", "--set", f"source={tmp_path / 'big.json'}", "--set", "optimal=true",
               "--set", f"out={tmp_path / 'x'}") == 4
    assert "error:" in capsys.readouterr().err


def test_load_config_overrides(tmp_path):
    cfg = load_config("gen", None, ["kind=gate", "n_worlds=5", "grid_size=6"])
    assert cfg.n_worlds == 5
    with pytest.raises(ConfigurationError):
        load_config("gen", None, ["kind"])
    (tmp_path / "c.json").write_text("[1]")
    with pytest.raises(ConfigurationError):
        load_config("gen", str(tmp_path / "c.json"), [])


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "lazysearch.cli", "gen", "--set", "kind=env1",
                           "--set", f"out={tmp_path}"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == str(tmp_path)
