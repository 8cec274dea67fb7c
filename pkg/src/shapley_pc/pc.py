"""PC-stable adjacency search, v-structure orientation and the full pipeline."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable

import numpy as np

from .citest import DEFAULT_ALPHA, CITester, DSeparationOracle, FisherZ, PValueCache, check_alpha
from .graph import Dag, MixedGraph, UnshieldedTriple, meek_closure, orient_if_safe, unshielded_triples
from .shapley import (
    DecisionRule,
    SivReport,
    SpcConfig,
    cpc_decide,
    maxpc_decide,
    mpc_decide,
    separating_sets,
    spc_decide,
)

logger = logging.getLogger(__name__)


class SepSetStore:
    """Separating sets found during adjacency search, keyed by unordered pair."""

    def __init__(self) -> None:
        self._sets: dict[tuple[int, int], list[tuple[frozenset[int], float]]] = {}

    @staticmethod
    def _key(i: int, j: int) -> tuple[int, int]:
        return (i, j) if i < j else (j, i)

    def add(self, i: int, j: int, cond: Iterable[int], p: float) -> None:
        self._sets.setdefault(self._key(i, j), []).append((frozenset(cond), p))

    def get(self, i: int, j: int) -> list[frozenset[int]]:
        return [s for s, _ in self._sets.get(self._key(i, j), [])]

    def entries(self, i: int, j: int) -> list[tuple[frozenset[int], float]]:
        return list(self._sets.get(self._key(i, j), []))

    def pairs(self) -> list[tuple[int, int]]:
        return sorted(self._sets)

    def __contains__(self, pair: tuple[int, int]) -> bool:
        return self._key(*pair) in self._sets


def skeleton_search(
    cit: CITester,
    num_nodes: int | None = None,
    alpha: float = DEFAULT_ALPHA,
    max_cond_size: int | None = None,
) -> tuple[MixedGraph, SepSetStore]:
    """Order-independent (PC-stable) adjacency search.

    At level ``l`` every remaining edge ``i - k`` is tested against all
    ``l``-subsets of the adjacency sets of ``i`` and ``k`` as they stood at
    the start of the level; removals are applied when the level ends.
    """
    alpha = check_alpha(alpha)
    n = cit.num_nodes if num_nodes is None else num_nodes
    g = MixedGraph.complete(n)
    store = SepSetStore()
    level = 0
    while max_cond_size is None or level <= max_cond_size:
        snapshot = [g.adjacent(v) for v in range(n)]
        if all(len(a) - 1 < level for a in snapshot):
            break
        removals = []
        for i, k in g.undirected_edges():
            found = None
            for x, y in ((i, k), (k, i)):
                pool = [v for v in snapshot[x] if v != y]
                if len(pool) < level:
                    continue
                for cond in combinations(pool, level):
                    p = cit.test(i, k, cond)
                    if p >= alpha:
                        found = (cond, p)
                        break
                if found:
                    break
            if found:
                removals.append((i, k))
                store.add(i, k, found[0], found[1])
        for i, k in removals:
            g.remove_edge(i, k)
        level += 1
    return g, store


def _orient_collider(g: MixedGraph, t: UnshieldedTriple) -> bool:
    """Orient ``i -> j <- k`` only if both arrows are safe together."""
    trial = g.copy()
    if orient_if_safe(trial, t.i, t.j) and orient_if_safe(trial, t.k, t.j):
        g.amat[:] = trial.amat
        return True
    return False


def _drop_conflicts(accepted: list[UnshieldedTriple]) -> list[UnshieldedTriple]:
    arrows = {(t.i, t.j) for t in accepted} | {(t.k, t.j) for t in accepted}
    return [t for t in accepted if (t.j, t.i) not in arrows and (t.j, t.k) not in arrows]


def orient_v_structures(
    skeleton: MixedGraph,
    cit: CITester,
    rule: DecisionRule | str = DecisionRule.SPC,
    store: SepSetStore | None = None,
    alpha: float = DEFAULT_ALPHA,
    spc_config: SpcConfig | None = None,
    maxpc_prefer_without_middle: bool = True,
) -> tuple[MixedGraph, list[SivReport]]:
    """Orient unshielded colliders of ``skeleton`` according to ``rule``.

    Accepted triples are applied in priority order: ascending middle SIV for
    SPC, descending maximal p-value for Max-PC.  For the set-counting rules
    (CPC, MPC, vanilla) a triple whose arrows are contradicted by another
    accepted triple is dropped, then the rest are applied in canonical order.
    A triple is never half-oriented.
    """
    rule = DecisionRule.parse(rule)
    g = skeleton.copy()
    reports: list[SivReport] = []
    triples = unshielded_triples(skeleton)
    if rule is DecisionRule.SPC:
        scored = []
        for t in triples:
            report, ok = spc_decide(cit, skeleton, tuple(t), spc_config)
            reports.append(report)
            if ok:
                scored.append((report.middle_phi, t.sort_key(), t))
        ordered = [t for *_, t in sorted(scored)]
    elif rule is DecisionRule.MAXPC:
        scored = []
        for t in triples:
            ok, p_star, _ = maxpc_decide(cit, skeleton, tuple(t), maxpc_prefer_without_middle)
            if ok:
                scored.append((-p_star, t.sort_key(), t))
        ordered = [t for *_, t in sorted(scored)]
    else:
        accepted = []
        for t in triples:
            if rule is DecisionRule.VANILLA:
                sets = store.get(t.i, t.k) if store is not None else []
                ok = bool(sets) and t.j not in sets[0]
            else:
                sets = separating_sets(cit, skeleton, tuple(t), alpha)
                ok = cpc_decide(sets, t.j) if rule is DecisionRule.CPC else mpc_decide(sets, t.j)
            if ok:
                accepted.append(t)
        ordered = _drop_conflicts(accepted)
    for t in ordered:
        if not _orient_collider(g, t):
            logger.debug("skipped unsafe v-structure %s", t)
    return g, reports


@dataclass
class PcRunResult:
    cpdag: MixedGraph
    skeleton: MixedGraph
    sepsets: SepSetStore
    num_tests: int
    elapsed: float
    siv_reports: list[SivReport] = field(default_factory=list)
    singular_fallbacks: int = 0


def as_tester(source: "np.ndarray | Dag | CITester") -> CITester:
    """Fisher-z on a data matrix, the d-separation oracle on a DAG, or a tester as-is."""
    if isinstance(source, Dag):
        return DSeparationOracle(source)
    if isinstance(source, np.ndarray):
        return FisherZ(source)
    if hasattr(source, "test") and hasattr(source, "num_nodes"):
        return source
    raise TypeError(f"cannot build a tester from {type(source).__name__}")


def run_pc(
    source: "np.ndarray | Dag | CITester",
    alpha: float = DEFAULT_ALPHA,
    rule: DecisionRule | str = DecisionRule.SPC,
    spc_config: SpcConfig | None = None,
    maxpc_prefer_without_middle: bool = True,
    max_cond_size: int | None = None,
) -> PcRunResult:
    """Adjacency search, v-structure orientation and Meek closure.

    ``source`` is a data matrix (Fisher-z test), a :class:`Dag` (perfect
    oracle) or any tester.  ``num_tests`` counts distinct tests evaluated.
    """
    alpha = check_alpha(alpha)
    tester = as_tester(source)
    cache = tester if isinstance(tester, PValueCache) else PValueCache(tester)
    start = time.perf_counter()
    skeleton, store = skeleton_search(cache, alpha=alpha, max_cond_size=max_cond_size)
    pdag, reports = orient_v_structures(
        skeleton,
        cache,
        rule,
        store=store,
        alpha=alpha,
        spc_config=spc_config,
        maxpc_prefer_without_middle=maxpc_prefer_without_middle,
    )
    cpdag = meek_closure(pdag)
    elapsed = time.perf_counter() - start
    return PcRunResult(
        cpdag=cpdag,
        skeleton=skeleton,
        sepsets=store,
        num_tests=cache.num_tests,
        elapsed=elapsed,
        siv_reports=reports,
        singular_fallbacks=getattr(tester, "singular_count", 0),
    )
