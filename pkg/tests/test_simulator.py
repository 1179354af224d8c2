import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causaldebug.data_model import DType, Schema, VariableKind, VariableMeta
from causaldebug.errors import EmptyRequest, IncompleteAssignment
from causaldebug.simulator import (
    GroundTruthScm,
    Node,
    ScmSpec,
    SimulatorEvaluator,
    diagnosis_metrics,
    evaluate,
    exact_model,
    generate_scm,
    interventional_mean,
    oracle_ace,
    oracle_ite,
    sample_observational,
    score_diagnosis,
    true_root_causes,
)
from causaldebug.causal_inference import DiagnosisReport, ite
from causaldebug.data_model import FaultSpec


def tiny_scm(option_probs=(0.5, 0.5), e_noise=(0.7, 0.3), y_noise=(0.2, 0.8)):
    """X -> E -> Y, all binary.

    E = clip(X + nE), nE in {0, 1};  Y = clip(E + nY), nY in {-1, 0}.
    """
    schema = Schema((
        VariableMeta("x", VariableKind.CONFIG_OPTION, DType.ORDINAL, (0.0, 1.0)),
        VariableMeta("e", VariableKind.SYSTEM_EVENT, DType.ORDINAL, (0.0, 1.0)),
        VariableMeta("y", VariableKind.NFP, DType.ORDINAL, (0.0, 1.0)),
    ))
    nodes = (
        Node("x", "option", 2, (), (), 0, (0, 1), tuple(option_probs)),
        Node("e", "event", 2, (0,), ((0, 1),), 0, (0, 1), tuple(e_noise)),
        Node("y", "nfp", 2, (1,), ((0, 1),), 0, (-1, 0), tuple(y_noise)),
    )
    return GroundTruthScm(schema, nodes)


class TestGenerate:
    def test_same_seed_same_system(self):
        assert generate_scm(ScmSpec(seed=7)).dumps() == generate_scm(ScmSpec(seed=7)).dumps()
        assert generate_scm(ScmSpec(seed=7)).dumps() != generate_scm(ScmSpec(seed=8)).dumps()

    def test_no_latents_no_bidirected(self):
        for seed in range(10):
            assert not generate_scm(ScmSpec(seed=seed)).admg().bidirected

    def test_latent_projects_to_bidirected(self):
        scm = generate_scm(ScmSpec(n_latents=2, seed=0))
        assert len(scm.latents) == 2
        assert scm.admg().bidirected

    @pytest.mark.parametrize("seed", range(10))
    def test_every_nfp_reachable(self, seed):
        scm = generate_scm(ScmSpec(n_options=5, n_events=3, n_nfps=2, seed=seed))
        admg = scm.admg()
        reach = admg.descendants([admg.index(o) for o in scm.schema.options])
        assert all(admg.index(n) in reach for n in scm.schema.nfps)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000), st.integers(0, 3))
    def test_structure_invariants(self, seed, latents):
        scm = generate_scm(ScmSpec(n_latents=latents, seed=seed))
        order = scm.topological_order()
        for v, node in enumerate(scm.nodes):
            assert all(order.index(u) < order.index(v) for u in node.parents)
            if node.kind == "option":
                assert node.parents == ()
            if node.kind == "nfp":
                assert not scm.children(v)
            if node.kind == "latent":
                assert len(scm.children(v)) >= 2
            assert sum(node.noise_probs) == pytest.approx(1.0)

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            ScmSpec(n_options=0)
        with pytest.raises(ValueError):
            ScmSpec(n_nfps=0)

    def test_json_round_trip(self):
        scm = generate_scm(ScmSpec(n_latents=1, seed=3))
        again = GroundTruthScm.loads(scm.dumps())
        assert again.dumps() == scm.dumps()
        assert again.admg() == scm.admg()


class TestSampling:
    def test_empty_request(self):
        with pytest.raises(EmptyRequest):
            sample_observational(tiny_scm(), 0)

    def test_deterministic_system_is_constant(self):
        scm = tiny_scm(option_probs=(0.0, 1.0), e_noise=(1.0, 0.0), y_noise=(0.0, 1.0))
        t = sample_observational(scm, 50, 1)
        assert np.all(t.data == t.data[0])
        assert list(t.data[0]) == [1.0, 1.0, 1.0]

    def test_marginals_converge(self):
        # P(E=1) = 0.5 + 0.5 * 0.3 = 0.65 and P(Y=1) = 0.65 * 0.8 = 0.52
        t = sample_observational(tiny_scm(), 100_000, 0)
        for col, p1 in ((1, 0.65), (2, 0.52)):
            emp = t.data[:, col].mean()
            assert abs(emp - p1) < 0.02

    def test_seeded(self):
        scm = generate_scm(ScmSpec(seed=2))
        assert np.array_equal(sample_observational(scm, 100, 4).data, sample_observational(scm, 100, 4).data)
        assert not np.array_equal(sample_observational(scm, 100, 4).data, sample_observational(scm, 100, 5).data)

    def test_latents_not_in_output(self):
        scm = generate_scm(ScmSpec(n_latents=2, seed=1))
        t = sample_observational(scm, 10)
        assert t.schema.names == scm.schema.names
        assert t.data.shape[1] == scm.n_visible


class TestEvaluate:
    def test_deterministic(self):
        scm = tiny_scm(e_noise=(1.0, 0.0), y_noise=(0.0, 1.0))
        assert evaluate(scm, {"x": 1.0}, repeats=3) == {"events": {"e": 1.0}, "nfps": {"y": 1.0}}
        assert evaluate(scm, {"x": 0.0}, repeats=7) == {"events": {"e": 0.0}, "nfps": {"y": 0.0}}

    def test_converges_to_interventional_mean(self):
        scm = generate_scm(ScmSpec(seed=4))
        assignment = {o: 1.0 for o in scm.schema.options}
        got = evaluate(scm, assignment, repeats=10_000, seed=0)["nfps"]["nfp0"]
        want = interventional_mean(scm, "nfp0", {o: 1 for o in scm.schema.options})
        assert abs(got - want) < 0.02

    def test_missing_option(self):
        with pytest.raises(IncompleteAssignment):
            evaluate(generate_scm(ScmSpec(seed=0)), {"opt0": 0.0})

    def test_matches_observational_conditional(self):
        scm = generate_scm(ScmSpec(n_options=2, n_events=2, seed=6))
        t = sample_observational(scm, 40_000, 0)
        opts = t.data[:, :2]
        mask = np.all(opts == [1.0, 0.0], axis=1)
        want = t.data[mask, -1].mean()
        got = evaluate(scm, {"opt0": 1.0, "opt1": 0.0}, repeats=10_000, seed=1)["nfps"]["nfp0"]
        assert abs(got - want) < 0.05

    def test_evaluator_independent_of_call_order(self):
        scm = generate_scm(ScmSpec(seed=3))
        a = {o: 0.0 for o in scm.schema.options}
        b = {o: 1.0 for o in scm.schema.options}
        e1, e2 = SimulatorEvaluator(scm, 9), SimulatorEvaluator(scm, 9)
        first = [e1.measure(a, 0), e1.measure(b, 0)]
        second = [e2.measure(b, 0), e2.measure(a, 0)]
        assert first == second[::-1]
        assert e1.calls == 2


class TestOracles:
    def test_unaffected_target(self):
        scm = generate_scm(ScmSpec(seed=0))
        assert oracle_ace(scm, "opt1", "opt0") == 0.0

    def test_tiny_ace_by_hand(self):
        # E[Y | do(X=0)] = 0.3 * 0.8 = 0.24, E[Y | do(X=1)] = 0.8
        assert oracle_ace(tiny_scm(), "y", "x") == pytest.approx(0.56)

    def test_tiny_ite_golden(self):
        # factual x=1, e=1, y=1.  e = 1 for either nE, so nE keeps its prior (0.7, 0.3);
        # y = 1 with e = 1 pins nY = 0.  Under do(x=0): e = nE, y = e, so P(y=0) = 0.7 and P(y=1) = 0.3.
        scm = tiny_scm()
        fact = {"x": 1, "e": 1, "y": 1}
        assert oracle_ite(scm, fact, {"x": 0}, {"y": 0.5}) == pytest.approx(0.4, abs=1e-12)
        assert oracle_ite(scm, fact, {"x": 1}, {"y": 0.5}) == pytest.approx(-1.0, abs=1e-12)
        model = exact_model(scm)
        assert ite(model, {"x": 0.0}, [1, 1, 1], FaultSpec(("y",)), {"y": 0.5}).ite == pytest.approx(0.4, abs=1e-12)

    def test_oracles_are_seed_free(self):
        a = generate_scm(ScmSpec(seed=5))
        b = GroundTruthScm.loads(a.dumps())
        assert oracle_ace(a, "nfp0", "opt0") == oracle_ace(b, "nfp0", "opt0")

    def test_true_root_causes(self):
        assert true_root_causes(tiny_scm(), ["y"]) == ["x"]


class TestMetrics:
    def test_identical(self):
        assert diagnosis_metrics(["a", "b"], ["a", "b"]) == {"accuracy": 1.0, "precision": 1.0, "recall": 1.0}

    def test_disjoint(self):
        assert diagnosis_metrics(["a"], ["b"]) == {"accuracy": 0.0, "precision": 0.0, "recall": 0.0}

    def test_one_extra(self):
        m = diagnosis_metrics(["a", "b", "c"], ["a", "b"])
        assert m["precision"] == pytest.approx(2 / 3)
        assert m["recall"] == 1.0
        assert m["accuracy"] == pytest.approx(2 / 3)

    def test_empty_prediction(self):
        assert diagnosis_metrics([], ["a"])["precision"] == 0.0

    def test_half_overlap(self):
        # |{a}| / |{a, b, c}|
        m = diagnosis_metrics(["a", "b"], ["a", "c"])
        assert m == {"accuracy": pytest.approx(1 / 3), "precision": 0.5, "recall": 0.5}

    def test_score_report(self):
        report = DiagnosisReport({"targets": ["y"]}, {}, None, [], ["x"], [], None)
        assert score_diagnosis(report, tiny_scm())["accuracy"] == 1.0

    @settings(max_examples=100)
    @given(st.sets(st.sampled_from("abcdef")), st.sets(st.sampled_from("abcdef"), min_size=1))
    def test_bounds(self, pred, true):
        m = diagnosis_metrics(sorted(pred), sorted(true))
        assert all(0.0 <= v <= 1.0 for v in m.values())
        assert m["accuracy"] <= min(m["precision"], m["recall"]) + 1e-12 or not pred
