"""Graph types and exact graph algorithms.

Two graph types are used throughout the package:

* :class:`Dag` -- an immutable directed acyclic graph over nodes ``0..n-1``.
* :class:`MixedGraph` -- a mutable graph whose adjacent pairs carry either an
  undirected mark or a single arrowhead.  Skeletons, PDAGs and CPDAGs are all
  represented with it.

Both are backed by a dense boolean matrix; for ``MixedGraph`` the pair
``(i, j)`` is undirected when ``amat[i, j]`` and ``amat[j, i]`` are both set
and is ``i -> j`` when only ``amat[i, j]`` is set.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np


class GraphError(ValueError):
    """Base class for graph construction and manipulation errors."""


class CycleError(GraphError):
    pass


class DuplicateEdgeError(GraphError):
    pass


class SelfLoopError(GraphError):
    pass


class NotAdjacentError(GraphError):
    pass


def _check_node(num_nodes: int, *nodes: int) -> None:
    for v in nodes:
        if not 0 <= v < num_nodes:
            raise IndexError(f"node {v} out of range for graph with {num_nodes} nodes")


class Dag:
    """Immutable directed acyclic graph.

    Use :func:`build_dag` (or :meth:`from_matrix`) to construct one; both
    validate acyclicity.
    """

    __slots__ = ("_adj", "_parents", "_children")

    def __init__(self, adj: np.ndarray):
        adj = np.array(adj, dtype=bool)
        adj.setflags(write=False)
        self._adj = adj
        n = adj.shape[0]
        self._parents = tuple(frozenset(np.flatnonzero(adj[:, j]).tolist()) for j in range(n))
        self._children = tuple(frozenset(np.flatnonzero(adj[i]).tolist()) for i in range(n))

    @classmethod
    def from_matrix(cls, adj: np.ndarray) -> "Dag":
        adj = np.asarray(adj)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise GraphError("adjacency matrix must be square")
        n = adj.shape[0]
        edges = [(int(i), int(j)) for i, j in zip(*np.nonzero(adj))]
        return build_dag(n, edges)

    @property
    def num_nodes(self) -> int:
        return self._adj.shape[0]

    @property
    def adjacency(self) -> np.ndarray:
        """Read-only boolean matrix with ``adjacency[i, j]`` set for ``i -> j``."""
        return self._adj

    def parents(self, j: int) -> frozenset[int]:
        return self._parents[j]

    def children(self, i: int) -> frozenset[int]:
        return self._children[i]

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self._adj[i, j])

    def edges(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self._adj))]

    @property
    def num_edges(self) -> int:
        return int(self._adj.sum())

    def descendants(self, i: int) -> set[int]:
        """Nodes reachable from ``i`` by a directed path, ``i`` excluded."""
        return _reach(self._children, [i]) - {i}

    def ancestors(self, nodes: Iterable[int]) -> set[int]:
        """Nodes with a directed path into ``nodes``, the nodes themselves included."""
        return _reach(self._parents, list(nodes))

    def relabel(self, perm: Sequence[int]) -> "Dag":
        """Return the graph with node ``v`` renamed to ``perm[v]``."""
        return build_dag(self.num_nodes, [(perm[a], perm[b]) for a, b in self.edges()])

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Dag) and np.array_equal(self._adj, other._adj)

    def __hash__(self) -> int:
        return hash((self.num_nodes, self._adj.tobytes()))

    def __repr__(self) -> str:
        return f"Dag(num_nodes={self.num_nodes}, edges={self.edges()})"


def _reach(neighbours: Sequence[Iterable[int]], start: list[int]) -> set[int]:
    seen = set(start)
    stack = list(start)
    while stack:
        v = stack.pop()
        for w in neighbours[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def build_dag(num_nodes: int, edges: Iterable[tuple[int, int]]) -> Dag:
    """Build a :class:`Dag` with exactly the given ordered edges.

    Raises
    ------
    SelfLoopError, DuplicateEdgeError, CycleError, IndexError
    """
    if num_nodes < 0:
        raise GraphError("num_nodes must be non-negative")
    adj = np.zeros((num_nodes, num_nodes), dtype=bool)
    for a, b in edges:
        _check_node(num_nodes, a, b)
        if a == b:
            raise SelfLoopError(f"self-loop on node {a}")
        if adj[a, b]:
            raise DuplicateEdgeError(f"duplicate edge {a}->{b}")
        adj[a, b] = True
    if _kahn_order(adj) is None:
        raise CycleError("edges contain a directed cycle")
    return Dag(adj)


def _kahn_order(adj: np.ndarray) -> list[int] | None:
    # Smallest available index first so the order is deterministic.
    import heapq

    n = adj.shape[0]
    indeg = adj.sum(axis=0).astype(int).tolist()
    heap = [v for v in range(n) if indeg[v] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for w in np.flatnonzero(adj[v]).tolist():
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(heap, w)
    return order if len(order) == n else None


def topological_order(g: Dag) -> list[int]:
    """Topological order, breaking ties by smallest node index."""
    order = _kahn_order(g.adjacency)
    assert order is not None
    return order


def d_separated(g: Dag, i: int, j: int, cond: Iterable[int]) -> bool:
    """Return True iff ``cond`` d-separates ``i`` and ``j`` in ``g``.

    Reachability ("Bayes-ball") search over (node, direction) states: a
    trail is active when every collider on it is an ancestor of ``cond`` and
    no non-collider is in ``cond``.
    """
    n = g.num_nodes
    cond = set(cond)
    _check_node(n, i, j, *cond)
    if i == j:
        raise ValueError("d_separated needs two distinct nodes")
    if i in cond or j in cond:
        raise ValueError("endpoints must not be in the conditioning set")
    anc = g.ancestors(cond)
    # direction "up": arrived at the node from one of its children;
    # "down": arrived from one of its parents.
    visited: set[tuple[int, bool]] = set()
    queue = deque([(i, True)])
    while queue:
        v, up = queue.popleft()
        if (v, up) in visited:
            continue
        visited.add((v, up))
        if v == j:
            return False
        if up and v not in cond:
            for p in g.parents(v):
                queue.append((p, True))
            for c in g.children(v):
                queue.append((c, False))
        elif not up:
            if v not in cond:
                for c in g.children(v):
                    queue.append((c, False))
            if v in anc:
                for p in g.parents(v):
                    queue.append((p, True))
    return True


# ---------------------------------------------------------------------------
# Mixed graphs


@dataclass(frozen=True, order=True)
class UnshieldedTriple:
    """``i - j - k`` with ``i`` and ``k`` non-adjacent; always ``i < k``."""

    i: int
    j: int
    k: int

    def __iter__(self) -> Iterator[int]:
        return iter((self.i, self.j, self.k))

    def sort_key(self) -> tuple[int, int, int]:
        return (self.j, self.i, self.k)


class MixedGraph:
    """Graph whose adjacent pairs are either undirected or singly directed."""

    __slots__ = ("amat",)

    def __init__(self, num_nodes: int):
        self.amat = np.zeros((num_nodes, num_nodes), dtype=bool)

    @classmethod
    def complete(cls, num_nodes: int) -> "MixedGraph":
        g = cls(num_nodes)
        g.amat[:] = True
        np.fill_diagonal(g.amat, False)
        return g

    @classmethod
    def from_edges(
        cls,
        num_nodes: int,
        directed: Iterable[tuple[int, int]] = (),
        undirected: Iterable[tuple[int, int]] = (),
    ) -> "MixedGraph":
        g = cls(num_nodes)
        for a, b in undirected:
            g.add_undirected(a, b)
        for a, b in directed:
            g.add_directed(a, b)
        return g

    @classmethod
    def from_dag(cls, dag: Dag) -> "MixedGraph":
        g = cls(dag.num_nodes)
        g.amat[:] = dag.adjacency
        return g

    @property
    def num_nodes(self) -> int:
        return self.amat.shape[0]

    def copy(self) -> "MixedGraph":
        g = MixedGraph(self.num_nodes)
        g.amat[:] = self.amat
        return g

    # -- queries ----------------------------------------------------------

    def is_adjacent(self, i: int, j: int) -> bool:
        return bool(self.amat[i, j] or self.amat[j, i])

    def is_undirected(self, i: int, j: int) -> bool:
        return bool(self.amat[i, j] and self.amat[j, i])

    def is_directed(self, i: int, j: int) -> bool:
        """True iff the pair is oriented ``i -> j``."""
        return bool(self.amat[i, j] and not self.amat[j, i])

    def adjacent(self, i: int) -> list[int]:
        return np.flatnonzero(self.amat[i] | self.amat[:, i]).tolist()

    def parents(self, j: int) -> list[int]:
        return np.flatnonzero(self.amat[:, j] & ~self.amat[j]).tolist()

    def children(self, i: int) -> list[int]:
        return np.flatnonzero(self.amat[i] & ~self.amat[:, i]).tolist()

    def neighbours(self, i: int) -> list[int]:
        """Nodes joined to ``i`` by an undirected edge."""
        return np.flatnonzero(self.amat[i] & self.amat[:, i]).tolist()

    def directed_edges(self) -> list[tuple[int, int]]:
        m = self.amat & ~self.amat.T
        return [(int(a), int(b)) for a, b in zip(*np.nonzero(m))]

    def undirected_edges(self) -> list[tuple[int, int]]:
        m = np.triu(self.amat & self.amat.T)
        return [(int(a), int(b)) for a, b in zip(*np.nonzero(m))]

    @property
    def num_edges(self) -> int:
        return int(np.triu(self.amat | self.amat.T).sum())

    def skeleton(self) -> "MixedGraph":
        g = MixedGraph(self.num_nodes)
        g.amat[:] = self.amat | self.amat.T
        return g

    def skeleton_matrix(self) -> np.ndarray:
        return self.amat | self.amat.T

    def has_directed_path(self, src: int, dst: int) -> bool:
        """Directed path ``src -> ... -> dst`` using only oriented edges."""
        directed = self.amat & ~self.amat.T
        seen = {src}
        stack = [src]
        while stack:
            v = stack.pop()
            for w in np.flatnonzero(directed[v]).tolist():
                if w == dst:
                    return True
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return False

    def is_directed_acyclic(self) -> bool:
        return _kahn_order(self.amat & ~self.amat.T) is not None

    def to_dag(self) -> Dag:
        """Convert a fully directed graph to a :class:`Dag`."""
        if self.undirected_edges():
            raise GraphError("graph still has undirected edges")
        return build_dag(self.num_nodes, self.directed_edges())

    def relabel(self, perm: Sequence[int]) -> "MixedGraph":
        g = MixedGraph(self.num_nodes)
        p = np.asarray(perm)
        g.amat[np.ix_(p, p)] = self.amat
        return g

    # -- mutation ---------------------------------------------------------

    def add_undirected(self, i: int, j: int) -> None:
        _check_node(self.num_nodes, i, j)
        if i == j:
            raise SelfLoopError(f"self-loop on node {i}")
        self.amat[i, j] = self.amat[j, i] = True

    def add_directed(self, i: int, j: int) -> None:
        _check_node(self.num_nodes, i, j)
        if i == j:
            raise SelfLoopError(f"self-loop on node {i}")
        self.amat[i, j] = True
        self.amat[j, i] = False

    def remove_edge(self, i: int, j: int) -> None:
        self.amat[i, j] = self.amat[j, i] = False

    def __eq__(self, other: object) -> bool:
        return isinstance(other, MixedGraph) and np.array_equal(self.amat, other.amat)

    def __repr__(self) -> str:
        return (
            f"MixedGraph(num_nodes={self.num_nodes}, directed={self.directed_edges()}, "
            f"undirected={self.undirected_edges()})"
        )


def unshielded_triples(g: MixedGraph) -> list[UnshieldedTriple]:
    """All unshielded triples of the skeleton of ``g``, sorted by (j, i, k)."""
    skel = g.skeleton_matrix()
    out = []
    for j in range(g.num_nodes):
        nbrs = np.flatnonzero(skel[j]).tolist()
        for i, k in combinations(nbrs, 2):
            if not skel[i, k]:
                out.append(UnshieldedTriple(i, j, k))
    return out


def orient_if_safe(g: MixedGraph, i: int, j: int) -> bool:
    """Orient ``i -> j`` unless that creates a bidirected pair or a cycle.

    Returns True when the edge ends up oriented ``i -> j``; on False the
    graph is left untouched.
    """
    if not g.is_adjacent(i, j):
        raise NotAdjacentError(f"{i} and {j} are not adjacent")
    if g.is_directed(i, j):
        return True
    if g.is_directed(j, i):
        return False
    if g.has_directed_path(j, i):
        return False
    g.add_directed(i, j)
    return True


def _meek_proposals(g: MixedGraph) -> set[tuple[int, int]]:
    """Orientations implied by Meek rules R1-R3 on the current graph."""
    a = g.amat
    directed = a & ~a.T
    undirected = a & a.T
    adj = a | a.T
    proposals: set[tuple[int, int]] = set()
    for b, c in zip(*np.nonzero(undirected)):
        b, c = int(b), int(c)
        # R1: a -> b - c, a and c non-adjacent => b -> c
        pa_b = directed[:, b]
        if np.any(pa_b & ~adj[:, c] & (np.arange(g.num_nodes) != c)):
            proposals.add((b, c))
            continue
        # R2: b -> x -> c with b - c => b -> c
        if np.any(directed[b] & directed[:, c]):
            proposals.add((b, c))
            continue
        # R3: b - x, b - y, x -> c, y -> c, x and y non-adjacent => b -> c
        cands = np.flatnonzero(undirected[b] & directed[:, c]).tolist()
        for x, y in combinations(cands, 2):
            if not adj[x, y]:
                proposals.add((b, c))
                break
    return proposals


def meek_closure(g: MixedGraph) -> MixedGraph:
    """Apply Meek rules R1-R3 until nothing changes; returns a new graph.

    Rules are evaluated on a snapshot each round.  An edge that the snapshot
    implies in both directions is left alone, and the remaining proposals are
    applied through :func:`orient_if_safe` in index order, which keeps the
    result independent of node labelling on consistent input.
    """
    out = g.copy()
    while True:
        proposals = _meek_proposals(out)
        changed = False
        for b, c in sorted(proposals):
            if (c, b) in proposals:
                continue
            if out.is_undirected(b, c) and orient_if_safe(out, b, c):
                changed = True
        if not changed:
            return out


def v_structures(g: Dag) -> set[tuple[int, int, int]]:
    """Unshielded colliders ``(i, j, k)`` with ``i < k`` and ``i -> j <- k``."""
    out = set()
    skel = g.adjacency | g.adjacency.T
    for j in range(g.num_nodes):
        for i, k in combinations(sorted(g.parents(j)), 2):
            if not skel[i, k]:
                out.add((i, j, k))
    return out


def dag_to_cpdag(g: Dag) -> MixedGraph:
    """CPDAG of the Markov equivalence class of ``g``."""
    out = MixedGraph.from_dag(g).skeleton()
    for i, j, k in sorted(v_structures(g)):
        out.add_directed(i, j)
        out.add_directed(k, j)
    return meek_closure(out)


# ---------------------------------------------------------------------------
# Edge-list text format:  "nodes N" header, then one "i j mark" line per edge
# with mark "->" or "--".


def format_edge_list(g: MixedGraph | Dag) -> str:
    if isinstance(g, Dag):
        g = MixedGraph.from_dag(g)
    lines = [f"nodes {g.num_nodes}"]
    edges = [(a, b, "->") for a, b in g.directed_edges()]
    edges += [(a, b, "--") for a, b in g.undirected_edges()]
    for a, b, mark in sorted(edges):
        lines.append(f"{a} {b} {mark}")
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str) -> MixedGraph:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 2 or rows[0][0] != "nodes":
        raise GraphError("edge list must start with a 'nodes N' header")
    g = MixedGraph(int(rows[0][1]))
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3 or row[2] not in ("->", "--"):
            raise GraphError(f"malformed edge line {lineno}: {' '.join(row)!r}")
        a, b = int(row[0]), int(row[1])
        if g.is_adjacent(a, b):
            raise DuplicateEdgeError(f"pair {a},{b} listed twice")
        if row[2] == "->":
            g.add_directed(a, b)
        else:
            g.add_undirected(a, b)
    return g


def write_edge_list(g: MixedGraph | Dag, path: str | Path) -> None:
    Path(path).write_text(format_edge_list(g))


def read_edge_list(path: str | Path) -> MixedGraph:
    return parse_edge_list(Path(path).read_text())
