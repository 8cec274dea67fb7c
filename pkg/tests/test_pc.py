from math import comb

import numpy as np
import pytest

from oracles import dag_population, random_dag
from shapley_pc.citest import PValueCache, oracle_cit
from shapley_pc.graph import MixedGraph, build_dag, dag_to_cpdag
from shapley_pc.pc import orient_v_structures, run_pc, skeleton_search
from shapley_pc.shapley import DecisionRule
from shapley_pc.simulate import simulate_linear, standardize

CHAIN = build_dag(3, [(0, 1), (1, 2)])
COLLIDER = build_dag(3, [(0, 2), (1, 2)])


class PathTester:
    """Hand-set p-values on the path 0 - 1 - 2 - 3.

    For the triple (0, 1, 2): phi(1) = -0.8 and p* = 0.9.
    For the triple (1, 2, 3): phi(2) = -0.2 and p* = 0.7.
    Accepting both would orient 1 - 2 both ways.
    """

    num_nodes = 4
    P02 = {(): 0.9, (1,): 0.1, (3,): 0.9, (1, 3): 0.1}
    P13 = {(): 0.7, (2,): 0.5, (0,): 0.7, (0, 2): 0.5}

    def test(self, i, j, cond=()):
        key = tuple(sorted(cond))
        table = self.P02 if {i, j} == {0, 2} else self.P13
        assert {i, j} in ({0, 2}, {1, 3})
        return table[key]


PATH = MixedGraph.from_edges(4, undirected=[(0, 1), (1, 2), (2, 3)])


class CountingTester:
    def __init__(self, inner):
        self.inner, self.num_nodes, self.sizes = inner, inner.num_nodes, []

    def test(self, i, j, cond=()):
        cond = tuple(cond)
        self.sizes.append(len(cond))
        return self.inner.test(i, j, cond)


class TestSkeleton:
    def test_chain(self):
        g, store = skeleton_search(oracle_cit(CHAIN))
        assert g == MixedGraph.from_edges(3, undirected=[(0, 1), (1, 2)])
        assert store.get(0, 2) == [frozenset({1})]

    def test_collider(self):
        g, store = skeleton_search(oracle_cit(COLLIDER))
        assert g == MixedGraph.from_edges(3, undirected=[(0, 2), (1, 2)])
        assert store.get(1, 0) == [frozenset()]

    def test_oracle_recovers_skeleton(self):
        for dag in dag_population(200, seed=21, sizes=range(3, 7)):
            g, store = skeleton_search(oracle_cit(dag), alpha=0.01)
            assert np.array_equal(g.skeleton_matrix(), dag_to_cpdag(dag).skeleton_matrix())
            for a, b in store.pairs():
                for s, p in store.entries(a, b):
                    assert p >= 0.01

    def test_max_cond_size(self):
        dag = build_dag(6, [(0, 5), (1, 5), (2, 5), (3, 5), (4, 5)])
        t = CountingTester(oracle_cit(dag))
        skeleton_search(t, max_cond_size=1)
        assert max(t.sizes) == 1

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            skeleton_search(oracle_cit(CHAIN), alpha=1.5)


class TestOrientation:
    def test_oracle_collider_and_chain(self):
        for rule in DecisionRule:
            sk = MixedGraph.from_edges(3, undirected=[(0, 2), (1, 2)])
            _, store = skeleton_search(oracle_cit(COLLIDER))
            g, _ = orient_v_structures(sk, oracle_cit(COLLIDER), rule, store)
            assert g == MixedGraph.from_dag(COLLIDER), rule
            _, store = skeleton_search(oracle_cit(CHAIN))
            sk = MixedGraph.from_edges(3, undirected=[(0, 1), (1, 2)])
            g, _ = orient_v_structures(sk, oracle_cit(CHAIN), rule, store)
            assert g == sk, rule

    @pytest.mark.parametrize("rule", ["spc", "maxpc"])
    def test_conflict_resolved_by_priority(self, rule):
        g, reports = orient_v_structures(PATH, PathTester(), rule)
        assert g == MixedGraph.from_edges(4, directed=[(0, 1), (2, 1)], undirected=[(2, 3)])
        if rule == "spc":
            phis = {tuple(r.triple): r.middle_phi for r in reports}
            assert phis == pytest.approx({(0, 1, 2): -0.8, (1, 2, 3): -0.2})


class TestRunPc:
    def test_oracle_spc_returns_cpdag(self):
        for dag in dag_population(200, seed=22, sizes=range(3, 7)):
            assert run_pc(dag, rule="spc").cpdag == dag_to_cpdag(dag)

    @pytest.mark.parametrize("rule", ["maxpc", "cpc", "mpc", "vanilla"])
    def test_oracle_baselines_return_cpdag(self, rule):
        for dag in dag_population(60, seed=23, sizes=range(3, 7)):
            assert run_pc(dag, rule=rule).cpdag == dag_to_cpdag(dag)

    def test_edgeless(self):
        res = run_pc(build_dag(5, []))
        assert res.cpdag.num_edges == 0 and res.num_tests == comb(5, 2)

    def test_result_fields(self):
        res = run_pc(CHAIN)
        assert res.num_tests > 0 and res.elapsed >= 0
        assert res.siv_reports and res.siv_reports[0].decision is False

    def test_accepts_cache(self):
        cache = PValueCache(oracle_cit(COLLIDER))
        assert run_pc(cache).cpdag == MixedGraph.from_dag(COLLIDER)

    def test_rejects_unknown_source(self):
        with pytest.raises(TypeError):
            run_pc("data.csv")

    def test_fisher_z_collider_recovery(self):
        hits = 0
        for seed in range(100):
            ds, _ = simulate_linear(COLLIDER, "gauss", 5000, seed)
            hits += run_pc(standardize(ds).values, alpha=0.01).cpdag == MixedGraph.from_dag(COLLIDER)
        assert hits >= 95

    def test_outputs_are_acyclic_pdags(self):
        rng = np.random.default_rng(24)
        for rep in range(30):
            dag = random_dag(rng, 8, 12)
            ds, _ = simulate_linear(dag, "gauss", 200, rep)
            for rule in DecisionRule:
                g = run_pc(standardize(ds).values, rule=rule).cpdag
                assert g.is_directed_acyclic()

    @pytest.mark.parametrize("rule", ["spc", "cpc", "mpc"])
    def test_label_equivariance_on_data(self, rule):
        rng = np.random.default_rng(25)
        dag = random_dag(rng, 10, 15)
        ds, _ = simulate_linear(dag, "gauss", 300, 5)
        x = standardize(ds).values
        base = run_pc(x, rule=rule).cpdag
        for _ in range(5):
            perm = rng.permutation(10)
            xp = np.empty_like(x)
            xp[:, perm] = x
            assert run_pc(xp, rule=rule).cpdag == base.relabel(perm.tolist())
