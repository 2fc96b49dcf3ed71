import csv
import json
from importlib.resources import files
from pathlib import Path

import pytest

from shardledger import scenario_file
from shardledger.cli import METRICS_COLUMNS, SWEEP_COLUMNS, expand_values, main, write_atomic
from shardledger.ledger import load_dump, validate_serialized
from shardledger.sim import EventLog, Scenario, metrics
from shardledger.cli import metrics_csv

EXAMPLE = str(files("shardledger") / "data" / "example.json")
BFT = str(files("shardledger") / "data" / "bft_sweep.json")
ARTIFACTS = {"events.log", "metrics.csv", "chain.dump", "summary.txt"}


def write_doc(tmp_path, doc, name="s.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_run_bundled_example(tmp_path, capsys):
    assert main(["run", EXAMPLE, "--out", str(tmp_path)]) == 0
    assert ARTIFACTS <= {p.name for p in tmp_path.iterdir()}
    rows = list(csv.reader((tmp_path / "metrics.csv").open()))
    assert rows[0] == METRICS_COLUMNS
    assert len(rows) == 1 + 50
    assert validate_serialized(load_dump((tmp_path / "chain.dump").read_text())).ok


def test_metrics_csv_recomputable_from_events(tmp_path):
    assert main(["run", EXAMPLE, "--out", str(tmp_path)]) == 0
    log = EventLog.parse((tmp_path / "events.log").read_text())
    assert metrics_csv(metrics(log)) == (tmp_path / "metrics.csv").read_text()


def test_seed_override_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", EXAMPLE, "--out", str(a), "--override", "seed=42"]) == 0
    assert main(["run", EXAMPLE, "--out", str(b), "--override", "seed=42"]) == 0
    assert (a / "events.log").read_bytes() == (b / "events.log").read_bytes()
    c = tmp_path / "c"
    assert main(["run", EXAMPLE, "--out", str(c), "--seed", "42"]) == 0
    assert (a / "events.log").read_bytes() == (c / "events.log").read_bytes()


def test_env_default_output(tmp_path, monkeypatch):
    monkeypatch.setenv("SHARDLEDGER_OUT", str(tmp_path / "env"))
    assert main(["run", EXAMPLE, "--override", "ticks=3"]) == 0
    assert ARTIFACTS <= {p.name for p in (tmp_path / "env").iterdir()}


def test_malformed_file_names_field(tmp_path, capsys):
    path = write_doc(tmp_path, {"schema_version": 1, "ticks": 5, "bogus_field": 3})
    assert main(["run", path, "--out", str(tmp_path / "o")]) == 1
    assert "bogus_field" in capsys.readouterr().err

    path = write_doc(tmp_path, {"schema_version": 1, "clusters": [{"size": "four"}]})
    assert main(["validate", path]) == 1
    assert "clusters.0.size" in capsys.readouterr().err


def test_bad_json_and_version(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["validate", str(bad)]) == 1
    path = write_doc(tmp_path, {"schema_version": 2})
    assert main(["validate", path]) == 1
    assert "schema_version" in capsys.readouterr().err
    path = write_doc(tmp_path, {"ticks": 3})
    assert main(["validate", path]) == 1


def test_validate_cases(tmp_path, capsys):
    assert main(["validate", EXAMPLE]) == 0
    path = write_doc(tmp_path, {"schema_version": 1, "clusters": [{"size": 4, "dishonest": 2}]})
    assert main(["validate", path]) == 1
    assert "byzantine bound exceeded" in capsys.readouterr().out
    assert main(["validate", str(tmp_path / "missing.json")]) == 2


def test_run_validation_failure_and_io_failure(tmp_path):
    path = write_doc(tmp_path, {"schema_version": 1, "committee_size": 12, "oracle_pool": [{"count": 10}]})
    assert main(["run", path, "--out", str(tmp_path / "o")]) == 1
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", EXAMPLE, "--out", str(blocker / "sub"), "--override", "ticks=2"]) == 2
    assert main(["run", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 2


def test_schedule_mismatch_reported(tmp_path, capsys):
    doc = {"schema_version": 1, "reward_schedule": {"total_tx_reward": 10, "portion_rewards": [3, 3]}}
    assert main(["validate", write_doc(tmp_path, doc)]) == 1
    assert "reward_schedule" in capsys.readouterr().err


def test_unknown_override(tmp_path, capsys):
    assert main(["run", EXAMPLE, "--out", str(tmp_path), "--override", "warp=9"]) == 1
    assert "warp" in capsys.readouterr().err


def test_sweep_dishonest(tmp_path):
    assert main(["sweep", BFT, "dishonest", "0..5", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "sweep.csv").open()))
    assert list(rows[0]) == SWEEP_COLUMNS
    assert [r["value"] for r in rows] == ["0", "1", "2", "3", "4", "5"]
    assert [r["tx_accuracy"] for r in rows[:4]] == ["1"] * 4
    assert all(float(r["tx_accuracy"]) < 1 for r in rows[4:])
    for v in range(6):
        assert ARTIFACTS <= {p.name for p in (tmp_path / f"dishonest={v}").iterdir()}


def test_sweep_q_monotone(tmp_path):
    # committees of 7 noisy oracles; more accurate oracles never do worse
    doc = scenario_file.to_dict(Scenario(seed=5, ticks=150, tx_rate=0, claim_rate=2, committee_size=7))
    doc["oracle_pool"] = [{"count": 9, "behavior": "noisy", "endowment": 1000}]
    path = write_doc(tmp_path, doc)
    assert main(["sweep", path, "q", "0.5,0.7,0.9", "--out", str(tmp_path / "o")]) == 0
    acc = [float(r["claim_accuracy"]) for r in csv.DictReader((tmp_path / "o" / "sweep.csv").open())]
    assert acc == sorted(acc) and acc[-1] > acc[0]


def test_sweep_calibrated_q(tmp_path):
    doc = {"schema_version": 1, "ticks": 20, "tx_rate": 0, "committee_size": 5,
           "oracle_pool": [{"count": 7, "behavior": "calibrated"}]}
    path = write_doc(tmp_path, doc)
    assert main(["sweep", path, "q", "0.5", "0.7", "0.9", "--out", str(tmp_path / "o")]) == 0
    rows = list(csv.DictReader((tmp_path / "o" / "sweep.csv").open()))
    assert [r["claim_accuracy"] for r in rows] == ["0", "1", "1"]
    assert rows[0]["undefined_claims"] == "20"


def test_sweep_errors(tmp_path, capsys):
    assert main(["sweep", BFT, "dishonest", "--out", str(tmp_path)]) == 1
    assert main(["sweep", BFT, "nonsense", "1", "--out", str(tmp_path)]) == 1
    assert "unknown sweep parameter" in capsys.readouterr().err
    # bound exceeded without the waiver
    path = write_doc(tmp_path, {"schema_version": 1, "clusters": [{"size": 9}]})
    assert main(["sweep", path, "dishonest", "2..4", "--out", str(tmp_path / "o")]) == 1


def test_sweep_parallel_jobs_match_serial(tmp_path):
    assert main(["sweep", BFT, "dishonest", "2..4", "--out", str(tmp_path / "a")]) == 0
    assert main(["sweep", BFT, "dishonest", "2..4", "--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_expand_values():
    assert expand_values(["0..3"]) == [0, 1, 2, 3]
    assert expand_values(["0.5,0.7", "1/3"]) == [0.5, 0.7, "1/3"]
    assert expand_values([]) == []


def test_scenario_roundtrip():
    doc = scenario_file.load(EXAMPLE)
    s = scenario_file.from_dict(doc)
    assert scenario_file.from_dict(scenario_file.to_dict(s)) == s
    assert s.clusters[0].flip_p == scenario_file.rational("1/2")
    assert s.oracle_pool[0].q == scenario_file.rational(0.9) == scenario_file.rational("9/10")


def test_override_paths():
    doc = {"schema_version": 1}
    doc = scenario_file.apply_override(doc, "clusters.1.dishonest", 1)
    assert doc["clusters"][1]["dishonest"] == 1 and len(doc["clusters"]) == 3
    doc = scenario_file.apply_override(doc, "q", "3/4")
    assert all(o["q"] == "3/4" for o in doc["oracle_pool"])
    with pytest.raises(KeyError):
        scenario_file.apply_override(doc, "clusters.0.colour", 1)


def test_write_atomic_leaves_no_temp_files(tmp_path):
    target = tmp_path / "x.txt"
    write_atomic(target, "one")
    write_atomic(target, "two")
    assert target.read_text() == "two"
    assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]
