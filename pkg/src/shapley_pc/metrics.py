"""Graph-recovery metrics: SHD, SID, edge-rate metrics and saturation.

All metrics compare a directed estimate against the true DAG.  CPDAG
estimates are first passed through :func:`penalize_undirected`, which drops
undirected edges so that they count as missing.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .graph import Dag, MixedGraph, d_separated

NA = float("nan")


class NodeCountMismatchError(ValueError):
    pass


def penalize_undirected(est: MixedGraph) -> MixedGraph:
    """Keep only the oriented edges of ``est``."""
    out = MixedGraph(est.num_nodes)
    for a, b in est.directed_edges():
        out.add_directed(a, b)
    return out


def _directed_matrix(g: MixedGraph | Dag) -> np.ndarray:
    if isinstance(g, Dag):
        return np.array(g.adjacency, dtype=bool)
    if g.undirected_edges():
        raise ValueError("estimate has undirected edges; apply penalize_undirected first")
    return g.amat & ~g.amat.T


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int
    reversed: int
    extra: int
    missing: int
    true_edges: int
    non_edges: int

    @property
    def predicted(self) -> int:
        return self.tp + self.reversed + self.fp


def confusion(est: MixedGraph | Dag, truth: Dag) -> ConfusionCounts:
    """Edge-level confusion counts of a directed estimate against the truth.

    An estimated edge is a true positive when it matches a true edge with its
    direction, reversed when only the direction is wrong, and a false
    positive (extra) when the pair is not adjacent in the truth.  Missing
    edges (also the false negatives) are true edges absent from the
    estimate's skeleton.
    """
    e = _directed_matrix(est)
    t = np.array(truth.adjacency, dtype=bool)
    if e.shape != t.shape:
        raise NodeCountMismatchError(f"estimate has {e.shape[0]} nodes, truth has {t.shape[0]}")
    n = t.shape[0]
    tp = int((e & t).sum())
    rev = int((e & t.T & ~t).sum())
    fp = int((e & ~t & ~t.T).sum())
    e_skel = np.triu(e | e.T)
    t_skel = np.triu(t | t.T)
    missing = int((t_skel & ~e_skel).sum())
    true_edges = int(t_skel.sum())
    non_edges = n * (n - 1) // 2 - true_edges
    return ConfusionCounts(
        tp=tp,
        fp=fp,
        tn=non_edges - fp,
        fn=missing,
        reversed=rev,
        extra=fp,
        missing=missing,
        true_edges=true_edges,
        non_edges=non_edges,
    )


def shd(counts: ConfusionCounts) -> int:
    return counts.extra + counts.missing + counts.reversed


def normalized_shd(counts: ConfusionCounts) -> float:
    if counts.true_edges == 0:
        raise ZeroDivisionError("normalised SHD is undefined for an edgeless true graph")
    return shd(counts) / counts.true_edges


def _ratio(num: int, den: int) -> float:
    return num / den if den > 0 else NA


def rates(counts: ConfusionCounts) -> dict[str, float]:
    """Precision, recall, FDR, TPR and FPR; ``nan`` marks a zero denominator."""
    c = counts
    return {
        "precision": _ratio(c.tp, c.tp + c.fp),
        "recall": _ratio(c.tp, c.tp + c.fn),
        "fdr": _ratio(c.reversed + c.fp, c.predicted),
        "tpr": _ratio(c.tp, c.true_edges),
        "fpr": _ratio(c.reversed + c.fp, c.non_edges),
    }


def saturation(num_nodes: int, density: float) -> float:
    """Edge count relative to the maximum for a DAG: ``2 |V| d / (|V| (|V| - 1))``."""
    if num_nodes < 2:
        raise ValueError("saturation needs at least two nodes")
    return 2.0 * num_nodes * density / (num_nodes * (num_nodes - 1))


# ---------------------------------------------------------------------------
# Structural intervention distance


def _causal_children(truth: Dag, i: int, j: int) -> set[int]:
    """Children of ``i`` that lie on a directed path from ``i`` to ``j``."""
    anc_j = truth.ancestors([j])
    return {c for c in truth.children(i) if c in anc_j}


def adjustment_valid(truth: Dag, i: int, j: int, adj: set[int]) -> bool:
    """Generalised adjustment criterion for the effect of ``i`` on ``j``.

    ``adj`` must avoid descendants of every node other than ``i`` on a
    directed path from ``i`` to ``j``, and d-separate ``i`` from ``j`` once
    the first edge of each such path is removed.
    """
    if j in adj or i in adj:
        return False
    first_hops = _causal_children(truth, i, j)
    forbidden: set[int] = set()
    for c in first_hops:
        forbidden |= truth.descendants(c) | {c}
    if adj & forbidden:
        return False
    if not first_hops:
        return d_separated(truth, i, j, adj)
    keep = np.array(truth.adjacency, dtype=bool)
    for c in first_hops:
        keep[i, c] = False
    return d_separated(Dag(keep), i, j, adj)


def _pair_correct(truth: Dag, est_parents: Sequence[frozenset[int]], i: int, j: int, desc_i: set[int]) -> bool:
    z = set(est_parents[i])
    if j in z:
        # the estimate claims no effect of i on j
        return j not in desc_i
    return adjustment_valid(truth, i, j, z)


def sid(est: MixedGraph | Dag, truth: Dag) -> int:
    """Structural intervention distance of a directed estimate.

    Counts ordered pairs ``(i, j)`` for which adjusting for the estimated
    parents of ``i`` does not identify the interventional effect of ``i`` on
    ``j`` in the true graph.
    """
    e = _directed_matrix(est)
    n = truth.num_nodes
    if e.shape[0] != n:
        raise NodeCountMismatchError(f"estimate has {e.shape[0]} nodes, truth has {n}")
    est_parents = [frozenset(np.flatnonzero(e[:, v]).tolist()) for v in range(n)]
    wrong = 0
    for i in range(n):
        desc_i = truth.descendants(i)
        for j in range(n):
            if i != j and not _pair_correct(truth, est_parents, i, j, desc_i):
                wrong += 1
    return wrong


# ---------------------------------------------------------------------------


@dataclass
class MetricRow:
    shd: int
    nshd: float
    sid: int
    nsid: float
    nsid_pairs: float
    precision: float
    recall: float
    fdr: float
    tpr: float
    fpr: float
    egs: int
    tp: int
    fp: int
    tn: int
    fn: int
    reversed: int
    extra: int
    missing: int

    FIELDS = (
        "shd nshd sid nsid nsid_pairs precision recall fdr tpr fpr egs tp fp tn fn reversed extra missing".split()
    )

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(est: MixedGraph | Dag, truth: Dag) -> MetricRow:
    """All metrics of ``est`` against ``truth``, undirected edges penalised.

    Normalised SHD and SID divide by the number of true edges (``nan`` for an
    edgeless truth); ``nsid_pairs`` divides SID by the ordered pair count.
    """
    directed = penalize_undirected(est) if isinstance(est, MixedGraph) else MixedGraph.from_dag(est)
    c = confusion(directed, truth)
    s = shd(c)
    sd = sid(directed, truth)
    r = rates(c)
    norm = c.true_edges
    return MetricRow(
        shd=s,
        nshd=s / norm if norm else NA,
        sid=sd,
        nsid=sd / norm if norm else NA,
        nsid_pairs=sd / (truth.num_nodes * (truth.num_nodes - 1)) if truth.num_nodes > 1 else NA,
        egs=c.predicted,
        tp=c.tp,
        fp=c.fp,
        tn=c.tn,
        fn=c.fn,
        reversed=c.reversed,
        extra=c.extra,
        missing=c.missing,
        **r,
    )


def is_undefined(x: float) -> bool:
    return isinstance(x, float) and math.isnan(x)
