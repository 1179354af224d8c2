import json
import sys

import numpy as np
import pytest

from causaldebug.data_model import (
    DType,
    FaultSpec,
    ObservationTable,
    Schema,
    VariableKind,
    VariableMeta,
    fault_thresholds,
)
from causaldebug.datasets import running_example, running_example_schema
from causaldebug.engine import (
    Budget,
    DiagnosisConfig,
    SessionStatus,
    SubprocessEvaluator,
    bootstrap_samples,
    diagnose,
    measure_averaged,
    repair_loop,
    select_faulty_row,
)
from causaldebug.errors import EvaluatorFailure, NoFaultObserved
from causaldebug.simulator import (
    ScmSpec,
    SimulatorEvaluator,
    generate_scm,
    oracle_ace,
    sample_observational,
)

LATENCY = FaultSpec(("latency",))


class Stuck:
    """Reports the same faulty measurement for every configuration."""

    def __init__(self, table, row):
        d = table.row_dict(row)
        self.out = {"events": {"resource_use": d["resource_use"]}, "nfps": {"latency": d["latency"]}}
        self.calls = 0

    def measure(self, assignment, repeat):
        self.calls += 1
        return json.loads(json.dumps(self.out))


class Flaky:
    def __init__(self, inner, fail_every=2):
        self.inner = inner
        self.n = 0
        self.fail_every = fail_every

    def measure(self, assignment, repeat):
        self.n += 1
        if self.n % self.fail_every == 1:
            raise EvaluatorFailure("transient", 1)
        return self.inner.measure(assignment, repeat)


class Broken:
    def measure(self, assignment, repeat):
        raise EvaluatorFailure("down", 1)


@pytest.fixture(scope="module")
def example():
    return running_example()


class TestBudget:
    def test_defaults(self):
        b = Budget()
        assert (b.max_evaluations, b.repeats_per_measurement, b.wallclock_limit) == (25, 5, None)

    @pytest.mark.parametrize("kwargs", [{"max_evaluations": 0}, {"repeats_per_measurement": 0}, {"wallclock_limit": 0}])
    def test_positive(self, kwargs):
        with pytest.raises(ValueError):
            Budget(**kwargs)


class TestDiagnose:
    def test_running_example(self, example):
        report = diagnose(example, LATENCY)
        assert set(report.root_causes) == {"gpu_growth", "swap_mem"}
        assert report.paths[0].nodes in {("gpu_growth", "swap_mem", "latency"), ("resource_use", "latency")}
        assert report.best_repair is not None and report.best_repair.ite > 0
        assert report.fault["faulty_row_index"] == report.factual_row

    def test_nfp_independent_of_options(self):
        rng = np.random.default_rng(0)
        base = running_example()
        data = base.data.copy()
        data[:, 0] = rng.permutation(data[:, 0])
        data[:, 1] = rng.permutation(data[:, 1])
        r = data[:, 2]
        data[:, 3] = np.clip(r / 10 + rng.normal(0, 0.1, len(r)), 0, 10)
        report = diagnose(ObservationTable(running_example_schema(), data), LATENCY)
        assert "no_intervenable_option" in report.flags
        assert report.root_causes == [] and report.repairs == []

    def test_planted_root_cause(self):
        hits = 0
        for seed in range(20):
            scm = generate_scm(ScmSpec(seed=seed))
            planted = max(scm.schema.options, key=lambda o: oracle_ace(scm, "nfp0", o))
            report = diagnose(sample_observational(scm, 2000, seed + 1), FaultSpec(("nfp0",)), DiagnosisConfig(seed=seed))
            hits += planted in report.root_causes
        assert hits >= 16

    def test_fault_free_row(self, example):
        thr = fault_thresholds(example, LATENCY)
        ok = int(np.argmin(example.column("latency")))
        with pytest.raises(NoFaultObserved):
            select_faulty_row(example, FaultSpec(("latency",), 99.0, ok), thr)

    def test_worst_row_selected(self, example):
        thr = fault_thresholds(example, LATENCY)
        assert select_faulty_row(example, LATENCY, thr) == int(np.argmax(example.column("latency")))

    def test_deterministic(self, example):
        assert diagnose(example, LATENCY).dumps() == diagnose(example, LATENCY).dumps()


def small_system(seed=3):
    scm = generate_scm(ScmSpec(seed=seed))
    return scm, sample_observational(scm, 2000, seed + 1)


class TestRepairLoop:
    def test_fixes_simulated_fault(self):
        scm, table = small_system()
        out = repair_loop(table, FaultSpec(("nfp0",)), SimulatorEvaluator(scm, 4))
        assert out.status is SessionStatus.FIXED
        assert len(out.evaluations) <= 25
        last = out.evaluations[-1]
        assert not last.faulty and last.gain["nfp0"] > 0

    def test_table_grows_by_one_per_evaluation(self):
        scm, table = small_system()
        before = table.data.copy()
        out = repair_loop(table, FaultSpec(("nfp0",)), SimulatorEvaluator(scm, 4))
        assert out.table.n_rows == table.n_rows + len(out.evaluations)
        assert np.array_equal(out.table.data[: table.n_rows], before)
        assert np.array_equal(table.data, before)

    def test_stuck_evaluator_exhausts_budget(self, example):
        thr = fault_thresholds(example, LATENCY)
        row = select_faulty_row(example, LATENCY, thr)
        ev = Stuck(example, row)
        out = repair_loop(example, LATENCY, ev, Budget(max_evaluations=4, repeats_per_measurement=2))
        assert out.status is SessionStatus.BUDGET_EXHAUSTED
        assert len(out.evaluations) == 4 and ev.calls == 8
        assert out.report is not None
        assert len({tuple(sorted(e.assignment.items())) for e in out.evaluations}) == 4
        assert all(e.faulty for e in out.evaluations)

    def test_runs_out_of_candidates(self):
        schema = Schema((
            VariableMeta("o", VariableKind.CONFIG_OPTION, DType.ORDINAL, (0, 1)),
            VariableMeta("y", VariableKind.NFP, DType.CONTINUOUS, (0.0, 10.0)),
        ))
        rng = np.random.default_rng(0)
        o = rng.integers(2, size=1000)
        y = 5.0 + 3.0 * o + rng.normal(0, 0.2, 1000)
        table = ObservationTable(schema, np.column_stack([o, y]))

        class Always:
            def measure(self, assignment, repeat):
                return {"events": {}, "nfps": {"y": 9.9}}

        out = repair_loop(table, FaultSpec(("y",)), Always(), Budget(max_evaluations=10, repeats_per_measurement=1))
        assert out.status is SessionStatus.NON_IMPROVING
        assert len(out.evaluations) == 2

    def test_already_below_threshold(self, example):
        ok = int(np.argmin(example.column("latency")))
        with pytest.raises(NoFaultObserved):
            repair_loop(example, FaultSpec(("latency",), 99.0, ok), Stuck(example, ok))

    def test_retry_then_succeed(self):
        scm, table = small_system()
        out = repair_loop(table, FaultSpec(("nfp0",)), Flaky(SimulatorEvaluator(scm, 4)), Budget(repeats_per_measurement=2))
        assert out.status is SessionStatus.FIXED and not out.skipped

    def test_persistent_failure_skips(self, example):
        out = repair_loop(example, LATENCY, Broken(), Budget(max_evaluations=3, repeats_per_measurement=1))
        assert out.status is SessionStatus.BUDGET_EXHAUSTED
        assert len(out.skipped) == 3 and out.evaluations == []
        assert out.table.n_rows == example.n_rows

    def test_target_gain(self):
        scm, table = small_system()
        out = repair_loop(table, FaultSpec(("nfp0",)), SimulatorEvaluator(scm, 4), target_gain=1e6)
        assert out.status is not SessionStatus.FIXED

    def test_deterministic(self):
        scm, table = small_system()
        a = repair_loop(table, FaultSpec(("nfp0",)), SimulatorEvaluator(scm, 4)).dumps()
        b = repair_loop(table, FaultSpec(("nfp0",)), SimulatorEvaluator(scm, 4)).dumps()
        assert a == b

    def test_wallclock(self, example):
        thr = fault_thresholds(example, LATENCY)
        row = select_faulty_row(example, LATENCY, thr)
        out = repair_loop(example, LATENCY, Stuck(example, row), Budget(wallclock_limit=1e-9))
        assert len(out.evaluations) <= 1


class TestMeasure:
    def test_mean_and_mode(self):
        schema = running_example_schema()
        vals = iter([10.0, 20.0, 20.0, 60.0])
        lat = iter([1.0, 2.0, 3.0, 6.0])

        class Seq:
            def measure(self, assignment, repeat):
                return {"events": {"resource_use": next(vals)}, "nfps": {"latency": next(lat)}}

        out = measure_averaged(Seq(), schema, {"gpu_growth": 0.5, "swap_mem": 1.0}, 4)
        assert out == {"events": {"resource_use": 20.0}, "nfps": {"latency": 3.0}}

    def test_missing_nfp(self):
        class Bad:
            def measure(self, assignment, repeat):
                return {"events": {"resource_use": 10.0}, "nfps": {}}

        with pytest.raises(EvaluatorFailure):
            measure_averaged(Bad(), running_example_schema(), {}, 1)


class TestBootstrap:
    def schema(self):
        return Schema((
            VariableMeta("g", VariableKind.CONFIG_OPTION, DType.CONTINUOUS, (0.0, 1.0)),
            VariableMeta("s", VariableKind.CONFIG_OPTION, DType.ORDINAL, (1, 2, 3, 4)),
            VariableMeta("y", VariableKind.NFP, DType.CONTINUOUS, (0.0, 1.0)),
        ))

    def test_distinct(self):
        bs = bootstrap_samples(self.schema(), 25)
        assert len(bs) == 25 and not bs.exhaustive
        assert len({tuple(sorted(a.items())) for a in bs}) == 25

    def test_exhaustive(self):
        bs = bootstrap_samples(self.schema(), 50)
        assert bs.exhaustive and len(bs) == 40

    def test_seeded(self):
        assert bootstrap_samples(self.schema(), 25, 3).assignments == bootstrap_samples(self.schema(), 25, 3).assignments
        assert bootstrap_samples(self.schema(), 25, 3).assignments != bootstrap_samples(self.schema(), 25, 4).assignments

    def test_positive(self):
        with pytest.raises(ValueError):
            bootstrap_samples(self.schema(), 0)


ECHO = """
import json, sys
req = json.loads(sys.stdin.read())
a = req["assignment"]
print(json.dumps({"events": {"resource_use": 20.0}, "nfps": {"latency": a["swap_mem"] + req["repeat"]}}))
"""


class TestSubprocess:
    def test_protocol(self, tmp_path):
        script = tmp_path / "ev.py"
        script.write_text(ECHO)
        ev = SubprocessEvaluator([sys.executable, str(script)])
        assert ev.measure({"gpu_growth": 0.5, "swap_mem": 2.0}, 1) == {"events": {"resource_use": 20.0}, "nfps": {"latency": 3.0}}

    @pytest.mark.parametrize("body", ["import sys; sys.exit(3)", "print('not json')", "print('{\"nfps\": {}}')"])
    def test_failures(self, tmp_path, body):
        script = tmp_path / "bad.py"
        script.write_text(body)
        with pytest.raises(EvaluatorFailure):
            SubprocessEvaluator([sys.executable, str(script)]).measure({}, 0)

    def test_missing_command(self):
        with pytest.raises(EvaluatorFailure):
            SubprocessEvaluator(["/nonexistent/evaluator"]).measure({}, 0)
