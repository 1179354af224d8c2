import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2_contingency, fisher_exact

from causaldebug.ci_tests import (
    CiConfig,
    CITestResult,
    fisher_exact_2x2,
    g_square_test,
    independence_test,
    is_independent,
)
from causaldebug.data_model import DiscreteTable


def table_of(*cols):
    return DiscreteTable.from_codes(np.column_stack(cols))


def reference_g2(x, y, z=None):
    """Pooled G² from per-stratum scipy log-likelihood statistics."""
    strata = [np.ones(len(x), bool)] if z is None else [z == v for v in np.unique(z)]
    total = 0.0
    for mask in strata:
        xs, ys = x[mask], y[mask]
        counts = np.zeros((x.max() + 1, y.max() + 1))
        np.add.at(counts, (xs, ys), 1)
        counts = counts[counts.sum(1) > 0][:, counts.sum(0) > 0]
        if counts.shape[0] > 1 and counts.shape[1] > 1:
            total += chi2_contingency(counts, correction=False, lambda_="log-likelihood")[0]
    return total


class TestGSquare:
    def test_independent_coins(self):
        # one batch of 100 has a binomial spread of about 2 around 95, so the
        # acceptance rate is measured over 20 batches of 100
        accepted = 0
        for seed in range(2000):
            rng = np.random.default_rng(seed)
            t = table_of(rng.integers(2, size=1000), rng.integers(2, size=1000))
            accepted += g_square_test(t, 0, 1).p_value > 0.05
        assert accepted / 2000 >= 0.94

    def test_perfect_copy(self):
        x = np.random.default_rng(0).integers(2, size=200)
        assert g_square_test(table_of(x, x), 0, 1).p_value < 1e-6

    def test_chain_conditional_independence(self):
        rng = np.random.default_rng(1)
        x = rng.integers(2, size=3000)
        z = np.where(rng.random(3000) < 0.85, x, 1 - x)
        y = np.where(rng.random(3000) < 0.85, z, 1 - z)
        t = table_of(x, z, y)
        assert g_square_test(t, 0, 2).p_value < 0.05
        assert g_square_test(t, 0, 2, [1]).p_value > 0.05

    def test_statistic_matches_reference(self):
        rng = np.random.default_rng(2)
        x = rng.integers(3, size=500)
        z = rng.integers(2, size=500)
        y = (x + z + rng.integers(2, size=500)) % 4
        t = table_of(x, y, z)
        assert g_square_test(t, 0, 1).statistic == pytest.approx(reference_g2(x, y), rel=1e-9)
        res = g_square_test(t, 0, 1, [2])
        assert res.statistic == pytest.approx(reference_g2(x, y, z), rel=1e-9)
        assert res.dof == (3 - 1) * (4 - 1) * 2

    def test_not_effective_when_sparse(self):
        rng = np.random.default_rng(3)
        t = table_of(rng.integers(5, size=40), rng.integers(5, size=40))
        res = g_square_test(t, 0, 1)
        assert not res.effective and res.p_value == 1.0
        assert is_independent(res)

    def test_degenerate_variable(self):
        t = table_of(np.zeros(50, int), np.arange(50) % 2)
        res = g_square_test(t, 0, 1)
        assert not res.effective and is_independent(res)

    def test_rejects_overlap(self):
        t = table_of(np.arange(10) % 2, np.arange(10) % 3, np.arange(10) % 2)
        with pytest.raises(ValueError):
            g_square_test(t, 0, 0)
        with pytest.raises(ValueError):
            g_square_test(t, 0, 1, [1])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_symmetric(self, seed):
        rng = np.random.default_rng(seed)
        x, y, z = rng.integers(3, size=300), rng.integers(2, size=300), rng.integers(2, size=300)
        t = table_of(x, y, z)
        a, b = g_square_test(t, 0, 1, [2]), g_square_test(t, 1, 0, [2])
        assert a.statistic == pytest.approx(b.statistic, rel=1e-12)
        assert a.p_value == pytest.approx(b.p_value, rel=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.permutations(range(3)))
    def test_relabel_invariant(self, seed, perm):
        rng = np.random.default_rng(seed)
        x = rng.integers(3, size=300)
        y = (x + rng.integers(2, size=300)) % 3
        before = g_square_test(table_of(x, y), 0, 1)
        after = g_square_test(table_of(np.asarray(perm)[x], y), 0, 1)
        assert after.statistic == pytest.approx(before.statistic, rel=1e-9, abs=1e-12)

    def test_nested_false_positive_rate(self):
        # independent x, y: dependence declared at most about alpha of the time at each level
        cfg = CiConfig(alpha=0.05)
        rejections = np.zeros(3)
        for seed in range(200):
            rng = np.random.default_rng(seed)
            cols = [rng.integers(2, size=800) for _ in range(4)]
            t = table_of(*cols)
            for k in range(3):
                rejections[k] += not is_independent(g_square_test(t, 0, 1, list(range(2, 2 + k))), cfg)
        assert np.all(rejections / 200 <= 0.05 + 3 * math.sqrt(0.05 * 0.95 / 200))


def hypergeom_p(counts):
    """Two-sided Fisher p-value by listing every table with the same margins."""
    (a, b), (c, d) = counts
    r1, c1, n = a + b, a + c, a + b + c + d
    pmf = {}
    for k in range(max(0, c1 - (n - r1)), min(r1, c1) + 1):
        pmf[k] = math.comb(r1, k) * math.comb(n - r1, c1 - k) / math.comb(n, c1)
    return sum(p for p in pmf.values() if p <= pmf[a] * (1 + 1e-7)), pmf


class TestFisher:
    def test_extreme_table_is_point_mass(self):
        counts = [[6, 0], [0, 4]]
        p, pmf = hypergeom_p(counts)
        # the two extreme tables for these margins are both this one
        assert fisher_exact_2x2(counts) == pytest.approx(pmf[6], rel=1e-12)
        assert p == pytest.approx(pmf[6], rel=1e-12)

    def test_extreme_unbalanced(self):
        counts = [[7, 0], [0, 3]]
        p, pmf = hypergeom_p(counts)
        assert fisher_exact_2x2(counts) == pytest.approx(p, rel=1e-12)
        # the other tail (k = 4) is far more likely, so only the observed table counts
        assert fisher_exact_2x2(counts) == pytest.approx(pmf[7], rel=1e-12)
        assert pmf[7] == pytest.approx(1 / 120)

    def test_balanced(self):
        assert fisher_exact_2x2([[5, 5], [5, 5]]) == pytest.approx(1.0)

    @given(st.lists(st.integers(0, 15), min_size=4, max_size=4).filter(lambda v: sum(v) > 0))
    def test_matches_enumeration_and_scipy(self, v):
        counts = [[v[0], v[1]], [v[2], v[3]]]
        ours = fisher_exact_2x2(counts)
        assert ours == pytest.approx(hypergeom_p(counts)[0], rel=1e-9)
        assert ours == pytest.approx(fisher_exact(counts)[1], rel=1e-6, abs=1e-12)
        assert ours == pytest.approx(fisher_exact_2x2([[v[0], v[2]], [v[1], v[3]]]), rel=1e-12)

    def test_dispatch_to_fisher(self):
        x = np.array([0, 0, 1, 1] * 10)
        y = np.array([0, 1, 0, 1] * 10)
        assert independence_test(table_of(x, y), 0, 1).method == "fisher"
        assert independence_test(table_of(x, y, x), 0, 1, [2]).method != "fisher"


class TestIsIndependent:
    @pytest.mark.parametrize("p, expected", [(0.2, True), (0.01, False)])
    def test_threshold(self, p, expected):
        assert is_independent(CITestResult(1.0, p, 1, True), CiConfig(alpha=0.05)) is expected

    def test_not_effective(self):
        assert is_independent(CITestResult(50.0, 0.0, 1, False))

    def test_config_bounds(self):
        for bad in (0.0, 1.0):
            with pytest.raises(ValueError):
                CiConfig(alpha=bad)
