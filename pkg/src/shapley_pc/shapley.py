"""Shapley Independence Values and the v-structure decision rules.

For an unshielded triple ``i - j - k`` of a skeleton, every node adjacent to
``i`` or ``k`` is a candidate collider.  A candidate's Shapley Independence
Value (SIV) is the Shapley-weighted average change in the p-value of the
``(i, k)`` test when the candidate joins a conditioning set drawn from the
subsets of the two endpoints' adjacency sets.  A true collider lowers the
p-value (negative SIV), any other node raises it.

The module also holds the baseline rules (Max-PC, conservative and majority
PC) so that all decisions for a triple are computed from the same tests.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from itertools import chain, combinations
from typing import Iterable, Sequence

from .citest import CITester
from .graph import MixedGraph, UnshieldedTriple


class NotUnshieldedTripleError(ValueError):
    pass


class InvalidCoalitionError(ValueError):
    pass


class EmptyTestSetError(ValueError):
    pass


class DecisionRule(str, enum.Enum):
    SPC = "spc"
    MAXPC = "maxpc"
    CPC = "cpc"
    MPC = "mpc"
    VANILLA = "vanilla"

    @classmethod
    def parse(cls, value: "str | DecisionRule") -> "DecisionRule":
        if isinstance(value, cls):
            return value
        try:
            return cls(value.lower().replace("-", ""))
        except ValueError:
            names = ", ".join(r.value for r in cls)
            raise ValueError(f"unknown decision rule {value!r}; expected one of {names}") from None


def shapley_weight(coalition_size: int, n: int) -> float:
    """Shapley weighting factor ``|S|! (n - |S| - 1)! / n!``.

    ``n = 0`` (only the empty coalition) is given weight 1.
    """
    if n == 0 and coalition_size == 0:
        return 1.0
    if coalition_size < 0 or n < 0 or coalition_size >= n:
        raise InvalidCoalitionError(f"coalition of size {coalition_size} invalid for n={n}")
    return math.factorial(coalition_size) * math.factorial(n - coalition_size - 1) / math.factorial(n)


def _powerset(items: Sequence[int]) -> Iterable[tuple[int, ...]]:
    return chain.from_iterable(combinations(items, r) for r in range(len(items) + 1))


@dataclass(frozen=True)
class CoalitionFamily:
    """Conditioning sets over which a candidate's SIV is averaged.

    ``n`` is the number of distinct variables appearing in the family; the
    candidate itself is never among them.
    """

    candidate: int
    sets: tuple[frozenset[int], ...]
    player_pool: frozenset[int]

    @property
    def n(self) -> int:
        return len(self.player_pool)

    @property
    def num_players(self) -> int:
        """Size of the Shapley game: the pool plus the candidate."""
        return self.n + 1


def _check_triple(g: MixedGraph, triple: Sequence[int]) -> tuple[int, int, int]:
    i, j, k = triple
    if not (g.is_adjacent(i, j) and g.is_adjacent(j, k)) or g.is_adjacent(i, k) or i == k:
        raise NotUnshieldedTripleError(f"({i}, {j}, {k}) is not an unshielded triple")
    return i, j, k


def candidates(g: MixedGraph, triple: Sequence[int]) -> list[int]:
    """Candidate colliders: ``adj(i) | adj(k)`` minus the endpoints, sorted."""
    i, _, k = _check_triple(g, triple)
    return sorted((set(g.adjacent(i)) | set(g.adjacent(k))) - {i, k})


def coalition_family(
    g: MixedGraph, triple: Sequence[int], candidate: int, dedup: bool = True
) -> CoalitionFamily:
    """All subsets of ``adj(i) - {c, k}`` together with all subsets of ``adj(k) - {c, i}``.

    With ``dedup=False`` a set contained in both power sets is listed twice.
    """
    i, _, k = _check_triple(g, triple)
    left = sorted(set(g.adjacent(i)) - {candidate, k})
    right = sorted(set(g.adjacent(k)) - {candidate, i})
    sets = [frozenset(s) for s in _powerset(left)] + [frozenset(s) for s in _powerset(right)]
    if dedup:
        sets = list(dict.fromkeys(sets))
    sets.sort(key=lambda s: (len(s), sorted(s)))
    return CoalitionFamily(candidate, tuple(sets), frozenset(left) | frozenset(right))


@dataclass(frozen=True)
class CoalitionTerm:
    cond: frozenset[int]
    weight: float
    delta: float  # p(i, k | S + c) - p(i, k | S)


@dataclass(frozen=True)
class SivEntry:
    candidate: int
    phi: float
    n: int
    terms: tuple[CoalitionTerm, ...]

    @property
    def weight_total(self) -> float:
        return sum(t.weight for t in self.terms)


def siv_entry(
    cit: CITester, g: MixedGraph, triple: Sequence[int], candidate: int, dedup: bool = True
) -> SivEntry:
    i, _, k = triple
    fam = coalition_family(g, triple, candidate, dedup=dedup)
    terms = []
    phi = 0.0
    for s in fam.sets:
        w = shapley_weight(len(s), fam.num_players)
        delta = cit.test(i, k, s | {candidate}) - cit.test(i, k, s)
        terms.append(CoalitionTerm(s, w, delta))
        phi += w * delta
    return SivEntry(candidate, phi, fam.n, tuple(terms))


def siv(cit: CITester, g: MixedGraph, triple: Sequence[int], candidate: int, dedup: bool = True) -> float:
    """Shapley Independence Value of ``candidate`` for the pair ``(i, k)``."""
    return siv_entry(cit, g, triple, candidate, dedup=dedup).phi


@dataclass
class SpcConfig:
    """Knobs of the SIV collider decision.

    selection
        ``"min"``: the middle node must attain the smallest SIV among all
        candidates (ties go to the lowest index).  ``"threshold"``: the middle
        node is a collider when its SIV is below ``tau``.
    require_negative_siv
        Additionally require the middle node's SIV to be strictly negative.
    dedup
        Deduplicate coalitions shared by both endpoints' power sets.
    """

    selection: str = "threshold"
    tau: float = 0.0
    require_negative_siv: bool = True
    dedup: bool = True

    def __post_init__(self) -> None:
        if self.selection not in ("min", "threshold"):
            raise ValueError("selection must be 'min' or 'threshold'")


@dataclass
class SivReport:
    triple: UnshieldedTriple
    entries: list[SivEntry]
    decision: bool = False

    def phi(self, candidate: int) -> float:
        for e in self.entries:
            if e.candidate == candidate:
                return e.phi
        raise KeyError(candidate)

    @property
    def middle_phi(self) -> float:
        return self.phi(self.triple.j)

    def to_json(self) -> dict:
        return {
            "triple": [self.triple.i, self.triple.j, self.triple.k],
            "decision": self.decision,
            "entries": [
                {
                    "candidate": e.candidate,
                    "phi": e.phi,
                    "n": e.n,
                    "weight_total": e.weight_total,
                    "terms": [
                        {"cond": sorted(t.cond), "weight": t.weight, "delta": t.delta} for t in e.terms
                    ],
                }
                for e in self.entries
            ],
        }


def spc_decide(
    cit: CITester, g: MixedGraph, triple: Sequence[int], config: SpcConfig | None = None
) -> tuple[SivReport, bool]:
    """Score every candidate collider of ``triple`` and decide on the middle node."""
    config = config or SpcConfig()
    i, j, k = _check_triple(g, triple)
    entries = [siv_entry(cit, g, (i, j, k), c, dedup=config.dedup) for c in candidates(g, (i, j, k))]
    phis = {e.candidate: e.phi for e in entries}
    phi_j = phis[j]
    if config.selection == "min":
        lowest = min(phis.values())
        decision = phi_j == lowest and min(c for c, v in phis.items() if v == lowest) == j
    else:
        decision = phi_j < config.tau
    if config.require_negative_siv:
        decision = decision and phi_j < 0
    report = SivReport(UnshieldedTriple(min(i, k), j, max(i, k)), entries, decision)
    return report, decision


def conditioning_family(g: MixedGraph, triple: Sequence[int]) -> list[frozenset[int]]:
    """Conditioning sets examined by the baseline rules: all subsets of ``adj(i)``
    and of ``adj(k)``.

    This is exactly the set of tests the SIV of the middle node touches.
    """
    i, _, k = _check_triple(g, triple)
    left = sorted(set(g.adjacent(i)) - {k})
    right = sorted(set(g.adjacent(k)) - {i})
    sets = list(dict.fromkeys(frozenset(s) for s in chain(_powerset(left), _powerset(right))))
    sets.sort(key=lambda s: (len(s), sorted(s)))
    return sets


def maxpc_decide(
    cit: CITester, g: MixedGraph, triple: Sequence[int], prefer_without_middle: bool = True
) -> tuple[bool, float, frozenset[int]]:
    """Max-PC: orient iff the highest-p test does not condition on the middle node.

    Returns ``(decision, p_star, s_star)``.  Among sets tied at the maximum
    p-value, one without the middle node wins when ``prefer_without_middle``.
    """
    i, j, k = _check_triple(g, triple)
    family = conditioning_family(g, (i, j, k))
    if not family:
        raise EmptyTestSetError(f"no tests for triple {(i, j, k)}")
    scored = [(cit.test(i, k, s), s) for s in family]
    p_star = max(p for p, _ in scored)
    tied = [s for p, s in scored if p == p_star]
    if prefer_without_middle:
        without = [s for s in tied if j not in s]
        s_star = without[0] if without else tied[0]
    else:
        with_j = [s for s in tied if j in s]
        s_star = with_j[0] if with_j else tied[0]
    return j not in s_star, p_star, s_star


def separating_sets(
    cit: CITester, g: MixedGraph, triple: Sequence[int], alpha: float
) -> list[frozenset[int]]:
    """Sets from :func:`conditioning_family` under which ``i`` and ``k`` test independent."""
    i, _, k = _check_triple(g, triple)
    return [s for s in conditioning_family(g, triple) if cit.test(i, k, s) >= alpha]


def cpc_decide(sepsets: Sequence[Iterable[int]], middle: int) -> bool:
    """Conservative rule: the middle node is in none of the separating sets."""
    sepsets = [set(s) for s in sepsets]
    if not sepsets:
        return False
    return all(middle not in s for s in sepsets)


def mpc_decide(sepsets: Sequence[Iterable[int]], middle: int) -> bool:
    """Majority rule: the middle node is in strictly fewer than half of them."""
    sepsets = [set(s) for s in sepsets]
    if not sepsets:
        return False
    hits = sum(middle in s for s in sepsets)
    return 2 * hits < len(sepsets)


__all__ = [
    "CoalitionFamily",
    "CoalitionTerm",
    "DecisionRule",
    "EmptyTestSetError",
    "InvalidCoalitionError",
    "NotUnshieldedTripleError",
    "SivEntry",
    "SivReport",
    "SpcConfig",
    "candidates",
    "coalition_family",
    "cpc_decide",
    "maxpc_decide",
    "mpc_decide",
    "separating_sets",
    "shapley_weight",
    "siv",
    "siv_entry",
    "spc_decide",
    "conditioning_family",
]
