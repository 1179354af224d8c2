import json
import sys

import numpy as np
import pytest

from causaldebug.cli import main
from causaldebug.datasets import running_example

from goldens import golden_commands


def running_args(fixtures):
    return ["--schema", str(fixtures / "running_schema.json"), "--data", str(fixtures / "running.csv")]


class TestGoldens:
    def test_fixture_inputs_are_current(self, fixtures):
        table = running_example()
        assert (fixtures / "running.csv").read_text() == table.to_csv()
        assert (fixtures / "running_schema.json").read_text() == table.schema.dumps()

    @pytest.mark.parametrize("name", ["running_discover.json", "running_paths.json", "running_diagnose.json",
                                      "sim3", "sim3_repair.json", "sim3_score.json"])
    def test_byte_identical(self, fixtures, tmp_path, name):
        argv = golden_commands(fixtures, tmp_path)[name]
        assert main(argv) in (0, 4)
        produced = tmp_path / name
        if produced.is_dir():
            for f in sorted((fixtures / name).iterdir()):
                assert (produced / f.name).read_bytes() == f.read_bytes(), f.name
        else:
            assert produced.read_bytes() == (fixtures / name).read_bytes()
        if name == "running_discover.json":
            assert (tmp_path / "running.dot").read_bytes() == (fixtures / "running.dot").read_bytes()

    def test_running_example_graph(self, fixtures):
        dot = (fixtures / "running.dot").read_text()
        for a, b in [("gpu_growth", "swap_mem"), ("swap_mem", "latency"), ("resource_use", "latency")]:
            assert f'"{a}" -> "{b}"' in dot
        assert dot.count("->") == 3

    def test_repeat_runs_identical(self, fixtures, tmp_path):
        for k in (1, 2):
            assert main(["diagnose", *running_args(fixtures), "--out", str(tmp_path / f"d{k}.json")]) == 0
        assert (tmp_path / "d1.json").read_bytes() == (tmp_path / "d2.json").read_bytes()

    def test_repair_twice(self, fixtures, tmp_path):
        argv = golden_commands(fixtures, tmp_path)["sim3_repair.json"]
        main(argv)
        first = (tmp_path / "sim3_repair.json").read_bytes()
        main(argv)
        assert (tmp_path / "sim3_repair.json").read_bytes() == first
        assert json.loads(first)["status"] == "fixed"


class TestExitCodes:
    def test_no_subcommand(self, capsys):
        assert main([]) == 1

    def test_unknown_flag(self):
        assert main(["discover", "--bogus"]) == 1

    def test_missing_file(self, tmp_path):
        assert main(["discover", "--schema", str(tmp_path / "none.json"), "--data", str(tmp_path / "x.csv")]) == 1

    def test_bad_csv(self, fixtures, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("gpu_growth,swap_mem\n0.5,oops\n")
        assert main(["discover", "--schema", str(fixtures / "running_schema.json"), "--data", str(bad)]) == 2

    def test_fault_free_table(self, fixtures, tmp_path, capsys):
        table = running_example(300)
        data = table.data.copy()
        data[:, 3] = 5.0
        from causaldebug.data_model import ObservationTable
        flat = tmp_path / "flat.csv"
        flat.write_text(ObservationTable(table.schema, data).to_csv())
        code = main(["diagnose", "--schema", str(fixtures / "running_schema.json"), "--data", str(flat), "--json"])
        assert code == 3
        out = json.loads(capsys.readouterr().out)
        assert out["exit_code"] == 3 and out["error"] == "NoFaultObserved"

    def test_repair_not_fixed(self, fixtures, tmp_path):
        stuck = tmp_path / "stuck.py"
        stuck.write_text('import json; print(json.dumps({"events": {"resource_use": 60.0}, "nfps": {"latency": 10.0}}))')
        code = main(["repair", *running_args(fixtures), "--budget", "2", "--repeats", "1",
                     "--evaluator-cmd", f"{sys.executable} {stuck}", "--out", str(tmp_path / "o.json")])
        assert code == 4
        assert json.loads((tmp_path / "o.json").read_text())["status"] == "budget_exhausted"

    def test_repair_needs_evaluator(self, fixtures):
        assert main(["repair", *running_args(fixtures)]) == 1

    def test_unknown_target(self, fixtures):
        assert main(["diagnose", *running_args(fixtures), "--targets", "nope"]) == 2


class TestOutputs:
    def test_paths_json(self, fixtures):
        paths = json.loads((fixtures / "running_paths.json").read_text())
        nodes = {tuple(p["nodes"]) for p in paths["paths"]}
        assert nodes == {("gpu_growth", "swap_mem", "latency"), ("resource_use", "latency")}

    def test_diagnose_json(self, fixtures):
        report = json.loads((fixtures / "running_diagnose.json").read_text())
        assert set(report) >= {"fault", "paths", "root_causes", "repairs", "best_repair", "flags"}
        assert set(report["root_causes"]) == {"gpu_growth", "swap_mem"}

    def test_simulate_shapes(self, tmp_path):
        assert main(["simulate", "--seed", "1", "--rows", "20", "--latents", "1", "--out", str(tmp_path)]) == 0
        rows = (tmp_path / "data.csv").read_text().strip().splitlines()
        assert len(rows) == 21
        assert np.isfinite(json.loads((tmp_path / "scm.json").read_text())["jitter"])
