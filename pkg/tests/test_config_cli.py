import csv
import json

import pytest

from evoforge.cli import main
from evoforge.config import ConfigError, build_setup, load_config
from evoforge.evaluators import BenchmarkEvaluator, SyntheticEvaluator
from evoforge.llm import MockProvider

BASE_CONFIG = {
    "llm": {"provider": "mock"},
    "es": {"mu": 3, "lambda": 4, "budget": 14, "seed": 2},
    "guidance": {"n_trees": 8, "max_depth": 2},
    "eval": {"kind": "synthetic"},
}


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


class TestConfigValidation:
    def test_minimal_config_builds(self, tmp_path):
        setup = build_setup(load_config(write_config(tmp_path, BASE_CONFIG)))
        assert isinstance(setup.provider, MockProvider)
        assert isinstance(setup.evaluator, SyntheticEvaluator)
        assert setup.run_config.mu == 3

    def test_unknown_section_rejected(self, tmp_path):
        bad = dict(BASE_CONFIG, extra={"x": 1})
        with pytest.raises(ConfigError, match="unknown config sections"):
            load_config(write_config(tmp_path, bad))

    def test_unknown_key_rejected(self, tmp_path):
        bad = dict(BASE_CONFIG, llm={"provider": "mock", "modle": "typo"})
        with pytest.raises(ConfigError, match="unknown keys"):
            load_config(write_config(tmp_path, bad))

    def test_wrong_type_rejected(self, tmp_path):
        bad = dict(BASE_CONFIG, es={"mu": "three"})
        with pytest.raises(ConfigError, match="es.mu"):
            load_config(write_config(tmp_path, bad))

    def test_bool_is_not_int(self, tmp_path):
        bad = dict(BASE_CONFIG, es={"mu": True})
        with pytest.raises(ConfigError, match="es.mu"):
            load_config(write_config(tmp_path, bad))

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(path)

    def test_unknown_weight_feature_rejected(self, tmp_path):
        bad = dict(BASE_CONFIG, eval={"kind": "synthetic", "weights": {"nope": 1.0}})
        with pytest.raises(ConfigError, match="unknown features"):
            build_setup(load_config(write_config(tmp_path, bad)))

    def test_unknown_mutation_kind_rejected(self, tmp_path):
        bad = dict(BASE_CONFIG, prompts={"mutations": {"mystery": "do things"}})
        with pytest.raises(ConfigError, match="mutation prompt kinds"):
            build_setup(load_config(write_config(tmp_path, bad)))

    def test_http_requires_endpoint(self, tmp_path):
        bad = dict(BASE_CONFIG, llm={"provider": "http"})
        with pytest.raises(ConfigError, match="endpoint"):
            build_setup(load_config(write_config(tmp_path, bad)))

    def test_benchmark_evaluator_built(self, tmp_path):
        cfg = dict(BASE_CONFIG, eval={"kind": "benchmark", "fids": [1, 2], "instances": 2, "dim": 3})
        setup = build_setup(load_config(write_config(tmp_path, cfg)))
        assert isinstance(setup.evaluator, BenchmarkEvaluator)
        assert len(setup.evaluator.problems) == 4

    def test_cli_seed_overrides_config(self, tmp_path):
        setup = build_setup(load_config(write_config(tmp_path, BASE_CONFIG)), seed=99)
        assert setup.run_config.seed == 99


@pytest.fixture(scope="module")
def run_dirs(tmp_path_factory):
    root = tmp_path_factory.mktemp("runs")
    config_path = root / "config.json"
    config_path.write_text(json.dumps(BASE_CONFIG))
    dirs = []
    for seed in (1, 2):
        out = root / f"run-{seed}"
        code = main(["run", "--config", str(config_path), "--seed", str(seed), "--out", str(out)])
        assert code == 0
        dirs.append(out)
    return root, dirs


class TestCliRun:
    def test_outputs_exist(self, run_dirs):
        _, dirs = run_dirs
        for out in dirs:
            assert (out / "archive.jsonl").exists()
            assert (out / "manifest.json").exists()

    def test_identical_seed_identical_hash(self, run_dirs, tmp_path):
        root, dirs = run_dirs
        out = tmp_path / "replay"
        code = main(["run", "--config", str(root / "config.json"), "--seed", "1", "--out", str(out)])
        assert code == 0
        original = json.loads((dirs[0] / "manifest.json").read_text())["archive_hash"]
        replay = json.loads((out / "manifest.json").read_text())["archive_hash"]
        assert original == replay

    def test_missing_config_is_config_error(self, tmp_path):
        code = main(["run", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")])
        assert code == 2

    def test_unknown_flag_exits_two(self, run_dirs):
        root, _ = run_dirs
        with pytest.raises(SystemExit) as err:
            main(["run", "--config", str(root / "config.json"), "--frobnicate", "1", "--out", "x"])
        assert err.value.code == 2


class TestCliFeatures:
    def test_golden_vector(self, tmp_path, capsys):
        import pathlib

        golden = json.loads(
            (pathlib.Path(__file__).parent / "data" / "random_search_golden.json").read_text()
        )
        source = tmp_path / "candidate.py"
        source.write_text(golden["source"])
        assert main(["features", "--file", str(source)]) == 0
        printed = json.loads(capsys.readouterr().out)
        assert printed == golden["features"]
        assert list(printed) == list(golden["features"])  # canonical order preserved

    def test_unparseable_file_is_runtime_error(self, tmp_path):
        source = tmp_path / "bad.py"
        source.write_text("def broken(:\n")
        assert main(["features", "--file", str(source)]) == 3


class TestCliAnalyze:
    def test_report_written(self, run_dirs, tmp_path):
        _, dirs = run_dirs
        report_path = tmp_path / "report.json"
        code = main(["analyze", "--runs", str(dirs[0]), str(dirs[1]), "--out", str(report_path)])
        assert code == 0
        report = json.loads(report_path.read_text())
        assert len(report["runs"]) == 2
        assert report["runs"][0]["evaluations"] == 14
        assert "convergence" in report["aggregate"]


class TestCliCeg:
    def test_dot_export(self, run_dirs, tmp_path):
        _, dirs = run_dirs
        out = tmp_path / "graph.dot"
        code = main([
            "ceg", "--archive", str(dirs[0] / "archive.jsonl"),
            "--feature", "mean_parameter_count", "--format", "dot", "--out", str(out),
        ])
        assert code == 0
        text = out.read_text()
        assert text.startswith("digraph")

    def test_json_export_counts(self, run_dirs, tmp_path):
        _, dirs = run_dirs
        out = tmp_path / "graph.json"
        code = main([
            "ceg", "--archive", str(dirs[0] / "archive.jsonl"),
            "--feature", "mean_parameter_count", "--format", "json", "--out", str(out),
        ])
        assert code == 0
        doc = json.loads(out.read_text())
        records = [json.loads(line) for line in (dirs[0] / "archive.jsonl").read_text().splitlines()]
        roots = sum(1 for r in records if r["parent_id"] is None)
        assert len(doc["nodes"]) == len(records)
        assert len(doc["edges"]) == len(records) - roots


class TestCliCompare:
    def test_curves_csv(self, run_dirs, tmp_path, capsys):
        _, dirs = run_dirs
        out = tmp_path / "curves.csv"
        code = main(["compare", "--a", str(dirs[0]), "--b", str(dirs[1]), "--out", str(out)])
        assert code == 0
        with out.open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0][0] == "evaluation"
        assert len(rows) == 15  # header + 14 evaluations
        effect = json.loads(capsys.readouterr().out)
        assert "cliffs_delta" in effect
