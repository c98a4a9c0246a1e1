"""Objective quorum structures.

Federated Byzantine quorum systems (one global slice function), quorum
enumeration, projection, intact servers, v-blocking sets, and classical
dissemination quorum systems together with the FBQS -> DQS induction.

Every exponential computation is capped at ``DEFAULT_CAP`` nodes. Internally
node sets are bitmasks over the universe in canonical node order; the public
API speaks frozensets.
"""

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import AbstractSet, Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Tuple

from .errors import CapacityError, DomainError, InvariantError, PreconditionError
from .nodes import fmt_set, set_key, sort_nodes, sort_sets
from .report import AxiomReport, Verdict, verdict

DEFAULT_CAP = 16


def _popcount(m: int) -> int:
    return bin(m).count("1")


def _submasks(m: int) -> Iterator[int]:
    """Non-empty submasks of ``m``, in decreasing numeric order."""
    s = m
    while s:
        yield s
        s = (s - 1) & m


@dataclass(frozen=True, eq=False)
class Fbqs:
    """A slice function ``slices: V -> non-empty set of slices``; each slice contains its owner."""

    universe: FrozenSet
    slices: Mapping

    def __post_init__(self):
        universe = frozenset(self.universe)
        if not universe:
            raise DomainError("universe must be non-empty")
        sort_nodes(universe)  # rejects unorderable ids early
        norm = {}
        for v, qs in self.slices.items():
            if v not in universe:
                raise DomainError(f"slices given for node {v!r} outside the universe")
            qs = frozenset(frozenset(q) for q in qs)
            if not qs:
                raise DomainError(f"node {v!r} has no slices")
            for q in qs:
                if v not in q:
                    raise DomainError(f"slice {fmt_set(q)} of node {v!r} must contain its owner")
                if not q <= universe:
                    raise DomainError(f"slice {fmt_set(q)} of node {v!r} leaves the universe")
            norm[v] = qs
        missing = universe - norm.keys()
        if missing:
            raise DomainError(f"nodes without slices: {fmt_set(missing)}")
        object.__setattr__(self, "universe", universe)
        object.__setattr__(self, "slices", {v: norm[v] for v in sort_nodes(norm)})

    @classmethod
    def from_lists(cls, slices: Mapping) -> "Fbqs":
        return cls(frozenset(slices), {v: [frozenset(q) for q in qs] for v, qs in slices.items()})

    def __eq__(self, other):
        if not isinstance(other, Fbqs):
            return NotImplemented
        return self.universe == other.universe and self.slices == other.slices

    def __hash__(self):
        return hash((self.universe, frozenset(self.slices.items())))

    def __repr__(self):
        body = ", ".join(f"{v}: {sorted(map(sorted, qs))}" for v, qs in self.slices.items())
        return f"Fbqs({{{body}}})"

    # -- bitmask plumbing -------------------------------------------------

    @cached_property
    def nodes(self) -> Tuple:
        return sort_nodes(self.universe)

    @cached_property
    def _index(self) -> Dict:
        return {v: i for i, v in enumerate(self.nodes)}

    @cached_property
    def full_mask(self) -> int:
        return (1 << len(self.nodes)) - 1

    @cached_property
    def _slice_masks(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(tuple(self.mask(q) for q in sort_sets(self.slices[v])) for v in self.nodes)

    @cached_property
    def _good_cache(self) -> Dict[int, bool]:
        return {}

    def mask(self, s: Iterable) -> int:
        m = 0
        idx = self._index
        for v in s:
            try:
                m |= 1 << idx[v]
            except KeyError:
                raise DomainError(f"node {v!r} is not in the universe") from None
        return m

    def unmask(self, m: int) -> frozenset:
        return frozenset(v for i, v in enumerate(self.nodes) if m >> i & 1)

    def _check_cap(self, cap: int):
        if len(self.nodes) > cap:
            raise CapacityError(
                f"universe has {len(self.nodes)} nodes, above the cap of {cap}", size=len(self.nodes)
            )

    def _members(self, m: int) -> Iterator[int]:
        i = 0
        while m:
            if m & 1:
                yield i
            m >>= 1
            i += 1

    def _is_quorum_mask(self, m: int, within: Optional[int] = None) -> bool:
        # quorum of the projection to `within` (or of self when None); m must lie inside `within`
        if not m:
            return False
        sm = self._slice_masks
        if within is None:
            within = self.full_mask
        for i in self._members(m):
            if not any((q & within) & ~m == 0 for q in sm[i]):
                return False
        return True

    def _greatest_quorum_within(self, x: int, within: Optional[int] = None) -> int:
        """Union of all quorums (of the projection to ``within``) contained in ``x``."""
        if within is None:
            within = self.full_mask
        sm = self._slice_masks
        changed = True
        while changed and x:
            changed = False
            for i in self._members(x):
                if not any((q & within) & ~x == 0 for q in sm[i]):
                    x &= ~(1 << i)
                    changed = True
        return x

    def _quorums_within(self, within: int) -> List[int]:
        return [m for m in _submasks(within) if self._is_quorum_mask(m, within)]

    def _has_intersection_within(self, within: int) -> bool:
        # disjoint quorums exist iff some quorum leaves another quorum in its complement
        for m in self._quorums_within(within):
            if self._greatest_quorum_within(within & ~m, within):
                return False
        return True

    def _good(self, i: int) -> bool:
        """``i`` is empty or a quorum, and the projection to ``i`` has quorum intersection."""
        cache = self._good_cache
        hit = cache.get(i)
        if hit is None:
            hit = i == 0 or (self._is_quorum_mask(i) and self._has_intersection_within(i))
            cache[i] = hit
        return hit


@dataclass(frozen=True)
class QuorumSystem:
    quorums: FrozenSet[FrozenSet]

    def __post_init__(self):
        object.__setattr__(self, "quorums", frozenset(frozenset(q) for q in self.quorums))

    def sorted(self) -> Tuple[frozenset, ...]:
        return sort_sets(self.quorums)

    def __contains__(self, s) -> bool:
        return frozenset(s) in self.quorums

    def __iter__(self):
        return iter(self.sorted())

    def __len__(self):
        return len(self.quorums)

    def minimal(self) -> FrozenSet[FrozenSet]:
        return minimal_sets(self.quorums)

    def violations(self) -> Optional[Tuple[str, tuple]]:
        """First violated quorum-system condition as ``(condition, witness)``, or None."""
        qs = self.sorted()
        if not qs:
            return ("non_empty_family", ())
        for q in qs:
            if not q:
                return ("non_empty_members", (q,))
        for a, b in combinations(qs, 2):
            if not a & b:
                return ("intersection", (a, b))
        for a, b in combinations(qs, 2):
            if a | b not in self.quorums:
                return ("union_closure", (a, b))
        return None


@dataclass(frozen=True)
class FailProneSystem:
    fail_sets: FrozenSet[FrozenSet]

    def __post_init__(self):
        object.__setattr__(self, "fail_sets", frozenset(frozenset(b) for b in self.fail_sets))

    def sorted(self) -> Tuple[frozenset, ...]:
        return sort_sets(self.fail_sets)

    def __iter__(self):
        return iter(self.sorted())

    def __len__(self):
        return len(self.fail_sets)

    def __contains__(self, s) -> bool:
        return frozenset(s) in self.fail_sets

    def covers(self, bad: AbstractSet) -> bool:
        return any(bad <= b for b in self.fail_sets)

    def violations(self) -> Optional[Tuple[str, tuple]]:
        bs = self.sorted()
        if not bs:
            return ("non_empty_family", ())
        for a, b in combinations(bs, 2):
            if a <= b:
                return ("antichain", (a, b))
        return None


@dataclass(frozen=True)
class Dqs:
    quorum_system: QuorumSystem
    fail_prone: FailProneSystem

    @classmethod
    def of(cls, quorums: Iterable, fail_sets: Iterable) -> "Dqs":
        return cls(QuorumSystem(frozenset(map(frozenset, quorums))), FailProneSystem(frozenset(map(frozenset, fail_sets))))

    @cached_property
    def minimal_quorums(self) -> Tuple[frozenset, ...]:
        return sort_sets(minimal_sets(self.quorum_system.quorums))


@dataclass(frozen=True)
class FailureScenario:
    universe: FrozenSet
    bad: FrozenSet = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "universe", frozenset(self.universe))
        object.__setattr__(self, "bad", frozenset(self.bad))
        if not self.bad <= self.universe:
            raise DomainError(f"faulty set {fmt_set(self.bad - self.universe)} outside the universe")

    @property
    def ok(self) -> frozenset:
        return self.universe - self.bad


def minimal_sets(sets: Iterable[AbstractSet]) -> FrozenSet[FrozenSet]:
    """The subset-minimal members of a family of sets."""
    kept: List[frozenset] = []
    for s in sort_sets(sets):
        if not any(k <= s for k in kept):
            kept.append(s)
    return frozenset(kept)


def maximal_sets(sets: Iterable[AbstractSet]) -> FrozenSet[FrozenSet]:
    kept: List[frozenset] = []
    for s in reversed(sort_sets(sets)):
        if not any(s <= k for k in kept):
            kept.append(s)
    return frozenset(kept)


# -- operations -----------------------------------------------------------


def is_quorum(fbqs: Fbqs, u: AbstractSet) -> bool:
    """A non-empty set containing one of its own slices for every member."""
    return fbqs._is_quorum_mask(fbqs.mask(u))


def _quorum_masks(fbqs: Fbqs, cap: int) -> List[int]:
    fbqs._check_cap(cap)
    return fbqs._quorums_within(fbqs.full_mask)


def enumerate_quorums(fbqs: Fbqs, cap: int = DEFAULT_CAP) -> QuorumSystem:
    """Every quorum of ``fbqs``, by brute force over all subsets of the universe."""
    return QuorumSystem(frozenset(fbqs.unmask(m) for m in _quorum_masks(fbqs, cap)))


def minimal_quorums(fbqs: Fbqs, cap: int = DEFAULT_CAP) -> FrozenSet[FrozenSet]:
    return minimal_sets(enumerate_quorums(fbqs, cap).quorums)


def has_quorum_intersection(fbqs: Fbqs, cap: int = DEFAULT_CAP) -> bool:
    mins = sort_sets(minimal_quorums(fbqs, cap))
    return all(a & b for a, b in combinations(mins, 2))


def disjoint_quorums(fbqs: Fbqs, cap: int = DEFAULT_CAP) -> Optional[Tuple[frozenset, frozenset]]:
    mins = sort_sets(minimal_quorums(fbqs, cap))
    for a, b in combinations(mins, 2):
        if not a & b:
            return a, b
    return None


def project(fbqs: Fbqs, i: AbstractSet) -> Fbqs:
    """Restrict the universe to ``i`` and intersect every slice of a node in ``i`` with ``i``."""
    i = frozenset(i)
    if not i:
        raise DomainError("cannot project to the empty set")
    fbqs.mask(i)
    return Fbqs(i, {v: frozenset(q & i for q in fbqs.slices[v]) for v in i})


def _bad_of(fbqs: Fbqs, scenario) -> frozenset:
    bad = scenario.bad if isinstance(scenario, FailureScenario) else frozenset(scenario)
    fbqs.mask(bad)
    return bad


def _require_intersection(fbqs: Fbqs, cap: int):
    witness = disjoint_quorums(fbqs, cap)
    if witness:
        raise PreconditionError(
            f"FBQS lacks quorum intersection: {fmt_set(witness[0])} and {fmt_set(witness[1])} are disjoint"
        )


def intact_set(fbqs: Fbqs, scenario, cap: int = DEFAULT_CAP) -> frozenset:
    """Intact servers for a failure scenario (or a bare faulty set).

    Computed as the union of all correct candidates ``I`` that are empty or a
    quorum and whose projection keeps quorum intersection. The union is then
    re-checked against the same two conditions.
    """
    _require_intersection(fbqs, cap)
    bad = _bad_of(fbqs, scenario)
    union = 0
    for i in _submasks(fbqs.full_mask & ~fbqs.mask(bad)):
        if not i & ~union:
            continue  # adds nothing to the union
        if fbqs._good(i):
            union |= i
    if not fbqs._good(union):
        raise InvariantError(f"union of intact candidates {fmt_set(fbqs.unmask(union))} is not itself a candidate")
    return fbqs.unmask(union)


def is_intact_candidate(fbqs: Fbqs, i: AbstractSet) -> bool:
    """``i`` is empty or a quorum, and the projection to ``i`` enjoys quorum intersection."""
    return fbqs._good(fbqs.mask(i))


def is_v_blocking(fbqs: Fbqs, v, b: AbstractSet) -> bool:
    if v not in fbqs.universe:
        raise DomainError(f"node {v!r} is not in the universe")
    b = frozenset(b)
    fbqs.mask(b)
    return all(q & b for q in fbqs.slices[v])


def check_dqs(dqs: Dqs, scenario: Optional[FailureScenario] = None) -> AxiomReport:
    """Evaluate the DQS axioms by exhaustive search, with witnesses for failures."""
    qs = dqs.quorum_system.sorted()
    bs = dqs.fail_prone.sorted()
    out = []

    bad_qs = dqs.quorum_system.violations()
    out.append(verdict("quorum_system", bad_qs is None, bad_qs and (bad_qs[0],) + bad_qs[1]))
    bad_bs = dqs.fail_prone.violations()
    out.append(verdict("fail_prone_antichain", bad_bs is None, bad_bs and (bad_bs[0],) + bad_bs[1]))

    witness = None
    for k, u1 in enumerate(qs):
        for u2 in qs[k:]:
            inter = u1 & u2
            for b in bs:
                if inter <= b:
                    witness = (u1, u2, b)
                    break
            if witness:
                break
        if witness:
            break
    out.append(verdict("d_consistency", witness is None, witness))

    witness = None
    for b in bs:
        if not any(not (u & b) for u in qs):
            witness = b
            break
    out.append(verdict("d_availability", witness is None, witness))

    context = {}
    if scenario is not None:
        covered = dqs.fail_prone.covers(scenario.bad)
        context["bad"] = scenario.bad
        out.append(
            Verdict("fail_prone_covers_bad", "pass" if covered else "fail", None if covered else scenario.bad, required=False)
        )
    return AxiomReport("dqs axioms", tuple(out), context)


def intact_candidates(fbqs: Fbqs, cap: int = DEFAULT_CAP) -> FrozenSet[FrozenSet]:
    """All non-empty candidate intact sets, ignoring which servers are faulty."""
    fbqs._check_cap(cap)
    return frozenset(fbqs.unmask(i) for i in _submasks(fbqs.full_mask) if fbqs._good(i))


def induced_fail_prone(fbqs: Fbqs, cap: int = DEFAULT_CAP) -> FailProneSystem:
    """Maximal ``B`` whose failure leaves some intact server.

    ``intact_set(B)`` is non-empty iff some non-empty candidate avoids ``B``, so
    the maximal such ``B`` are the complements of the minimal candidates.
    """
    _require_intersection(fbqs, cap)
    cands = minimal_sets(intact_candidates(fbqs, cap))
    return FailProneSystem(maximal_sets(fbqs.universe - c for c in cands))


def induced_dqs(fbqs: Fbqs, cap: int = DEFAULT_CAP) -> Dqs:
    dqs = Dqs(enumerate_quorums(fbqs, cap), induced_fail_prone(fbqs, cap))
    report = check_dqs(dqs)
    if not report.passed:
        raise InvariantError("induced DQS violates its axioms:\n" + report.text())
    return dqs


# -- well-known structures --------------------------------------------------


def threshold_fbqs(nodes: Iterable, k: int) -> Fbqs:
    """Every server has one slice per ``k``-subset of the universe that contains it."""
    nodes = sort_nodes(nodes)
    slices = {v: frozenset(frozenset(c) for c in combinations(nodes, k) if v in c) for v in nodes}
    return Fbqs(frozenset(nodes), slices)


def cardinality_dqs(nodes: Iterable, f: int) -> Dqs:
    """Quorums: all sets of at least ``2f+1`` servers; fail-prone sets: all ``f``-sets."""
    nodes = sort_nodes(nodes)
    n = len(nodes)
    quorums = [frozenset(c) for r in range(2 * f + 1, n + 1) for c in combinations(nodes, r)]
    return Dqs.of(quorums, [frozenset(c) for c in combinations(nodes, f)])


def describe_sets(sets) -> List[str]:
    return [fmt_set(s) for s in sort_sets(sets)]


__all__ = [
    "DEFAULT_CAP",
    "Dqs",
    "FailProneSystem",
    "FailureScenario",
    "Fbqs",
    "QuorumSystem",
    "cardinality_dqs",
    "describe_sets",
    "check_dqs",
    "disjoint_quorums",
    "enumerate_quorums",
    "has_quorum_intersection",
    "induced_dqs",
    "induced_fail_prone",
    "intact_candidates",
    "intact_set",
    "is_intact_candidate",
    "is_quorum",
    "is_v_blocking",
    "maximal_sets",
    "minimal_quorums",
    "minimal_sets",
    "project",
    "set_key",
    "threshold_fbqs",
]
