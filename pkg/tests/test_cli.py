import csv
import json

import pytest

from locrad.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, EXIT_RUNTIME, main

PARAMS = {"n_tables": 20, "attrs_per_table": [3, 3], "candidate_density": 0.05}
TINY_TOML = """
seeds = [0, 1]
n_folds = 3
depths = [1]
hidden_dim = 8
n_boot = 100
[training]
max_epochs = 3
patience = 2
[[tasks]]
name = "cue_r1"
radius = 1
builder = "cue"
generator = { n_tables = 20, attrs_per_table = [3, 3], candidate_density = 0.05 }
[[tasks]]
name = "target_r2"
radius = 2
builder = "target"
generator = { n_tables = 20, attrs_per_table = [3, 3], candidate_density = 0.05 }
"""


@pytest.fixture
def dataset_file(tmp_path):
    p = tmp_path / "params.json"
    p.write_text(json.dumps(PARAMS))
    out = tmp_path / "ds.json"
    assert main(["generate", "--params", str(p), "--radius", "1", "--seed", "3", "-o", str(out)]) == EXIT_OK
    return out


def test_generate_is_deterministic(dataset_file, tmp_path):
    p = tmp_path / "params.json"
    again = tmp_path / "again.json"
    assert main(["generate", "--params", str(p), "--radius", "1", "--seed", "3", "-o", str(again)]) == EXIT_OK
    assert again.read_bytes() == dataset_file.read_bytes()


def test_generate_plain_schema(tmp_path, capsys):
    p = tmp_path / "params.json"
    p.write_text(json.dumps(PARAMS))
    assert main(["generate", "--params", str(p)]) == EXIT_OK
    assert "tables" in json.loads(capsys.readouterr().out)


def test_radius_command(dataset_file, capsys):
    assert main(["radius", str(dataset_file), "--k-max", "3"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["nominal_radius"] == 1 and out["certificate_verified"]


def test_featurize_command(dataset_file, tmp_path):
    out = tmp_path / "X.csv"
    assert main(["featurize", str(dataset_file), "-o", str(out)]) == EXIT_OK
    rows = list(csv.reader(out.open()))
    assert len(rows) > 1 and len(rows[0]) == len(rows[1])


def test_train_command(dataset_file, tmp_path, capsys):
    model = tmp_path / "m.bin"
    argv = ["train", str(dataset_file), "--depth", "1", "--hidden-dim", "8", "--epochs", "3", "--model-out", str(model)]
    assert main(argv) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["epochs"] <= 3 and model.exists()
    assert 0 <= out["test"]["f1"] <= 1


def test_ingest_ddl(tmp_path, capsys):
    ddl = tmp_path / "s.sql"
    ddl.write_text("CREATE TABLE a (id INT PRIMARY KEY);\nCREATE TABLE b (id INT, a_id INT, FOREIGN KEY (a_id) REFERENCES a(id));")
    assert main(["ingest", str(ddl)]) == EXIT_OK
    graph = json.loads(capsys.readouterr().out)
    assert len(graph["tables"]) == 2


def test_bad_ddl_is_data_error(tmp_path):
    ddl = tmp_path / "s.sql"
    ddl.write_text("CREATE TABLE (")
    assert main(["ingest", str(ddl)]) == EXIT_DATA


def test_missing_input_is_data_error(tmp_path):
    assert main(["radius", str(tmp_path / "none.json")]) == EXIT_DATA


def test_bad_config_is_config_error(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("seeds = []")
    assert main(["--config", str(cfg), "report"]) == EXIT_CONFIG
    assert main(["report", "--seed-set", "x-y"]) == EXIT_CONFIG


def test_stats_command(tmp_path, capsys):
    p = tmp_path / "pairs.csv"
    p.write_text("a,b\n" + "".join(f"{v},0\n" for v in (1, 2, 3, 4, 5)))
    assert main(["stats", str(p)]) == EXIT_OK
    res = json.loads(capsys.readouterr().out)
    assert res[0]["p_value"] == pytest.approx(0.0625)
    p.write_text("a\n1\n")
    assert main(["stats", str(p)]) == EXIT_DATA


def test_radius_advantage_pairs(capsys):
    assert main(["radius-advantage", "--pairs", "0:-0.28,1:0.02,2:0.49,3:0.32"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["rho"] == pytest.approx(0.8, abs=1e-9)
    assert main(["radius-advantage", "--pairs", "0:1,1"]) == EXIT_CONFIG


def test_report_and_reemit(tmp_path, capsys):
    cfg = tmp_path / "tiny.toml"
    cfg.write_text(TINY_TOML)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--config", str(cfg), "--out-dir", str(a), "report"]) == EXIT_OK
    manifest = json.loads(capsys.readouterr().out)
    assert manifest["seeds"] == [0, 1]
    # global flags are accepted after the subcommand too
    assert main(["report", "--config", str(cfg), "--out-dir", str(b), "--from", str(a)]) == EXIT_OK
    for name in ("results.csv", "report.json", "MANIFEST.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_ablate_depth_with_seed_set(tmp_path, capsys):
    cfg = tmp_path / "tiny.toml"
    cfg.write_text(TINY_TOML)
    argv = ["ablate-depth", "--config", str(cfg), "--seed-set", "0", "--out-dir", str(tmp_path), "--task", "cue_r1"]
    assert main(argv) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["best_depths"] == {"cue_r1": 1}


def test_runtime_failure_exit_code(monkeypatch, tmp_path):
    import locrad.runner

    def boom(*a, **kw):
        raise RuntimeError("boom")

    monkeypatch.setattr(locrad.runner, "run_scaling", boom)
    assert main(["scale", "--out-dir", str(tmp_path)]) == EXIT_RUNTIME
