import math

import numpy as np
import pytest

from oracles import all_dags, brute_sid, random_dag
from shapley_pc.graph import MixedGraph, build_dag, dag_to_cpdag
from shapley_pc.metrics import (
    MetricRow,
    NodeCountMismatchError,
    adjustment_valid,
    confusion,
    evaluate,
    normalized_shd,
    penalize_undirected,
    rates,
    saturation,
    shd,
    sid,
)

TRUTH4 = build_dag(5, [(0, 1), (1, 2), (3, 2), (2, 4)])


def brute_shd(est: MixedGraph, truth) -> int:
    e = set(est.directed_edges())
    t = set(truth.edges())
    e_sk = {frozenset(x) for x in e}
    t_sk = {frozenset(x) for x in t}
    extra = len(e_sk - t_sk)
    missing = len(t_sk - e_sk)
    rev = len({(a, b) for a, b in e if (b, a) in t})
    return extra + missing + rev


class TestPenalty:
    def test_undirected_chain(self):
        g = MixedGraph.from_edges(3, undirected=[(0, 1), (1, 2)])
        assert penalize_undirected(g).num_edges == 0

    def test_collider_unchanged(self):
        g = dag_to_cpdag(build_dag(3, [(0, 2), (1, 2)]))
        assert penalize_undirected(g) == g

    def test_mixed(self):
        g = MixedGraph.from_edges(3, directed=[(0, 1)], undirected=[(1, 2)])
        assert penalize_undirected(g).directed_edges() == [(0, 1)]


class TestConfusion:
    def test_identity(self):
        c = confusion(TRUTH4, TRUTH4)
        assert (c.tp, c.fp, c.reversed, c.extra, c.missing) == (4, 0, 0, 0, 0)

    def test_one_reversed(self):
        est = build_dag(5, [(1, 0), (1, 2), (3, 2), (2, 4)])
        c = confusion(est, TRUTH4)
        assert c.reversed == 1 and c.tp == 3

    def test_empty_estimate(self):
        c = confusion(build_dag(5, []), TRUTH4)
        assert c.missing == 4 and c.fn == 4 and c.tp == 0

    def test_node_mismatch(self):
        with pytest.raises(NodeCountMismatchError):
            confusion(build_dag(3, []), TRUTH4)

    def test_rejects_unpenalized(self):
        with pytest.raises(ValueError):
            confusion(MixedGraph.from_edges(5, undirected=[(0, 1)]), TRUTH4)


class TestShd:
    def test_identity(self):
        c = confusion(TRUTH4, TRUTH4)
        assert shd(c) == 0 and normalized_shd(c) == 0.0

    def test_one_reversal_of_eight(self):
        truth = build_dag(9, [(v, v + 1) for v in range(8)])
        est = build_dag(9, [(1, 0)] + [(v, v + 1) for v in range(1, 8)])
        c = confusion(est, truth)
        assert shd(c) == 1 and normalized_shd(c) == 0.125

    def test_empty_estimate(self):
        c = confusion(build_dag(5, []), TRUTH4)
        assert shd(c) == 4 and normalized_shd(c) == 1.0

    def test_edgeless_truth(self):
        with pytest.raises(ZeroDivisionError):
            normalized_shd(confusion(build_dag(3, []), build_dag(3, [])))

    def test_matches_set_operations(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            n = int(rng.integers(2, 7))
            m = n * (n - 1) // 2
            truth = random_dag(rng, n, int(rng.integers(0, m + 1)))
            est = MixedGraph.from_dag(random_dag(rng, n, int(rng.integers(0, m + 1))))
            c = confusion(est, truth)
            assert shd(c) == brute_shd(est, truth)
            assert c.tp + c.reversed + c.fp == est.num_edges


class TestRates:
    def test_identity(self):
        r = rates(confusion(TRUTH4, TRUTH4))
        assert r["precision"] == r["recall"] == 1.0 and r["fdr"] == 0.0

    def test_empty_estimate(self):
        r = rates(confusion(build_dag(5, []), TRUTH4))
        assert r["recall"] == 0.0 and math.isnan(r["precision"])

    def test_one_reversed_of_four(self):
        est = build_dag(5, [(1, 0), (1, 2), (3, 2), (2, 4)])
        r = rates(confusion(est, TRUTH4))
        assert r["fdr"] == 0.25
        assert r["tpr"] == 0.75
        assert r["fpr"] == pytest.approx(1 / 6)


class TestSaturation:
    def test_reference_values(self):
        assert saturation(10, 4) == pytest.approx(8 / 9)
        assert round(saturation(10, 4), 1) == 0.9
        assert saturation(50, 4) == pytest.approx(400 / 2450)
        assert round(saturation(50, 4), 2) == 0.16
        assert saturation(5, 0.8) == pytest.approx(0.4)

    def test_monotone_and_bounded(self):
        for n in range(2, 30):
            full = (n - 1) / 2
            vals = [saturation(n, d) for d in np.linspace(0, full, 7)]
            assert vals == sorted(vals) and vals[-1] == pytest.approx(1.0)

    def test_too_small(self):
        with pytest.raises(ValueError):
            saturation(1, 0)


class TestSid:
    def test_identity_examples(self):
        assert sid(TRUTH4, TRUTH4) == 0
        chain = build_dag(3, [(0, 1), (1, 2)])
        assert sid(chain, chain) == 0

    def test_reversed_pair(self):
        assert sid(build_dag(2, [(1, 0)]), build_dag(2, [(0, 1)])) == 2

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_zero_on_self_exhaustive(self, n):
        for g in all_dags(n):
            assert sid(g, g) == 0

    def test_matches_path_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(500):
            n = int(rng.integers(2, 6))
            m = n * (n - 1) // 2
            truth = random_dag(rng, n, int(rng.integers(0, m + 1)))
            est = random_dag(rng, n, int(rng.integers(0, m + 1)))
            assert sid(est, truth) == brute_sid(est, truth)

    def test_adjustment_examples(self):
        conf = build_dag(3, [(2, 0), (2, 1), (0, 1)])
        assert adjustment_valid(conf, 0, 1, {2})
        assert not adjustment_valid(conf, 0, 1, set())
        med = build_dag(3, [(0, 1), (1, 2)])
        assert not adjustment_valid(med, 0, 2, {1})


class TestEvaluate:
    def test_cpdag_penalty(self):
        row = evaluate(dag_to_cpdag(TRUTH4), TRUTH4)
        assert row.missing == 1 and row.shd == 1 and row.nshd == 0.25
        assert row.egs == 3

    def test_row_fields(self):
        row = evaluate(TRUTH4, TRUTH4)
        assert list(row.as_dict()) == MetricRow.FIELDS
        assert row.nsid_pairs == 0.0

    def test_normalised_sid(self):
        row = evaluate(build_dag(2, [(1, 0)]), build_dag(2, [(0, 1)]))
        assert row.sid == 2 and row.nsid == 2.0 and row.nsid_pairs == 1.0

    def test_edgeless_truth_marks_undefined(self):
        row = evaluate(build_dag(3, []), build_dag(3, []))
        assert math.isnan(row.nshd) and math.isnan(row.nsid) and math.isnan(row.precision)
