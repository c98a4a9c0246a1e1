"""Per-view quorum structures: each correct server holds its own FBQS.

Views must agree on the slices of correct servers; they may disagree on the
slices of faulty ones (which is how equivocation about trust choices is
modelled). Faulty servers have no view at all.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, Mapping, Optional

from .errors import DomainError, InvariantError, PreconditionError
from .nodes import fmt_set, sort_nodes, sort_sets
from .quorum_core import (
    DEFAULT_CAP,
    Dqs,
    FailureScenario,
    Fbqs,
    QuorumSystem,
    disjoint_quorums,
    enumerate_quorums,
    has_quorum_intersection,
    induced_fail_prone,
    intact_set,
    is_v_blocking,
)
from .report import AxiomReport, Verdict, verdict


@dataclass(frozen=True, eq=False)
class SubjectiveFbqs:
    universe: FrozenSet
    scenario: FailureScenario
    views: Mapping
    check: bool = True

    def __post_init__(self):
        universe = frozenset(self.universe)
        object.__setattr__(self, "universe", universe)
        if self.scenario.universe != universe:
            raise DomainError("failure scenario is over a different universe")
        ok = self.scenario.ok
        keys = frozenset(self.views)
        if keys != ok:
            extra, missing = keys - ok, ok - keys
            if extra:
                raise DomainError(f"views given for faulty or unknown servers {fmt_set(extra)}")
            raise DomainError(f"correct servers without a view: {fmt_set(missing)}")
        for v, view in self.views.items():
            if not isinstance(view, Fbqs):
                raise DomainError(f"view of {v!r} is not an Fbqs")
            if view.universe != universe:
                raise DomainError(f"view of {v!r} is over a different universe")
        object.__setattr__(self, "views", {v: self.views[v] for v in sort_nodes(keys)})
        if self.check:
            report = validate_agreement(self)
            if not report.passed:
                v1, v2, v = report["agreement"].witness
                raise DomainError(f"views of {v1!r} and {v2!r} disagree on the slices of correct server {v!r}")

    @classmethod
    def from_shared(cls, slices: Mapping, bad=(), overrides: Optional[Mapping] = None, check: bool = True):
        """Build views from one shared slice map plus per-viewer overrides for faulty servers.

        ``overrides[viewer][faulty] = slices`` replaces what ``viewer`` believes
        about ``faulty``.
        """
        base = Fbqs.from_lists(slices)
        scenario = FailureScenario(base.universe, frozenset(bad))
        overrides = overrides or {}
        for viewer, table in overrides.items():
            if viewer not in scenario.ok:
                raise DomainError(f"override given for non-correct viewer {viewer!r}")
            for node in table:
                if node not in scenario.bad and check:
                    raise DomainError(f"viewer {viewer!r} overrides slices of correct server {node!r}")
        views = {}
        for v in sort_nodes(scenario.ok):
            table = dict(base.slices)
            for node, qs in overrides.get(v, {}).items():
                table[node] = [frozenset(q) for q in qs]
            views[v] = Fbqs(base.universe, table)
        return cls(base.universe, scenario, views, check)

    @classmethod
    def uniform(cls, fbqs: Fbqs, bad=()) -> "SubjectiveFbqs":
        """Every correct server holds the same view."""
        scenario = FailureScenario(fbqs.universe, frozenset(bad))
        return cls(fbqs.universe, scenario, {v: fbqs for v in scenario.ok})

    @property
    def bad(self) -> frozenset:
        return self.scenario.bad

    @property
    def ok(self) -> frozenset:
        return self.scenario.ok

    def view(self, v) -> Fbqs:
        try:
            return self.views[v]
        except KeyError:
            raise DomainError(f"server {v!r} is faulty or unknown and has no view") from None

    def __eq__(self, other):
        if not isinstance(other, SubjectiveFbqs):
            return NotImplemented
        return self.scenario == other.scenario and self.views == other.views

    def __hash__(self):
        return hash((self.scenario, frozenset(self.views.items())))


@dataclass(frozen=True)
class SubjectiveQuorumSystem:
    per_view: Mapping

    def __getitem__(self, v) -> QuorumSystem:
        return self.per_view[v]

    def all_quorums(self) -> FrozenSet[FrozenSet]:
        out = set()
        for qs in self.per_view.values():
            out |= qs.quorums
        return frozenset(out)


@dataclass(frozen=True, eq=False)
class SubjectiveDqs:
    per_view_quorums: SubjectiveQuorumSystem
    per_view_fail_prone: Mapping
    scenario: FailureScenario

    def view(self, v) -> Dqs:
        if v not in self.per_view_fail_prone:
            raise DomainError(f"server {v!r} is faulty or unknown and has no view")
        return self._views[v]

    @cached_property
    def _views(self) -> Dict:
        return {v: Dqs(self.per_view_quorums[v], self.per_view_fail_prone[v]) for v in self.per_view_fail_prone}

    def __eq__(self, other):
        if not isinstance(other, SubjectiveDqs):
            return NotImplemented
        return self.scenario == other.scenario and self._views == other._views

    def __hash__(self):
        return hash((self.scenario, frozenset(self._views.items())))


def validate_agreement(sfbqs: SubjectiveFbqs) -> AxiomReport:
    """Check that all views agree on the slices of every correct server."""
    ok = sort_nodes(sfbqs.ok)
    witness = None
    for i, v1 in enumerate(ok):
        for v2 in ok[i + 1:]:
            for v in ok:
                if sfbqs.views[v1].slices[v] != sfbqs.views[v2].slices[v]:
                    witness = (v1, v2, v)
                    break
            if witness:
                break
        if witness:
            break
    return AxiomReport("view agreement", (verdict("agreement", witness is None, witness),))


def subjective_quorum_intersection(sfbqs: SubjectiveFbqs, cap: int = DEFAULT_CAP) -> bool:
    return all(has_quorum_intersection(view, cap) for view in sfbqs.views.values())


def _require_intersection(sfbqs: SubjectiveFbqs, cap: int):
    for v, view in sfbqs.views.items():
        witness = disjoint_quorums(view, cap)
        if witness:
            raise PreconditionError(
                f"view of {v!r} lacks quorum intersection: {fmt_set(witness[0])} and {fmt_set(witness[1])}"
            )


def induce_subjective_quorums(sfbqs: SubjectiveFbqs, cap: int = DEFAULT_CAP) -> SubjectiveQuorumSystem:
    _require_intersection(sfbqs, cap)
    return SubjectiveQuorumSystem({v: enumerate_quorums(view, cap) for v, view in sfbqs.views.items()})


def subjective_intact_set(sfbqs: SubjectiveFbqs, cap: int = DEFAULT_CAP) -> frozenset:
    """Intact servers, computed in every view; all views must yield the same set."""
    _require_intersection(sfbqs, cap)
    results = {v: intact_set(view, sfbqs.scenario, cap) for v, view in sfbqs.views.items()}
    distinct = set(results.values())
    if len(distinct) > 1:
        detail = ", ".join(f"{v}: {fmt_set(s)}" for v, s in results.items())
        raise InvariantError(f"per-view intact sets differ: {detail}")
    return distinct.pop()


def check_subjective_dqs(sdqs: SubjectiveDqs) -> AxiomReport:
    scen = sdqs.scenario
    bad = scen.bad
    viewers = sort_nodes(sdqs.per_view_fail_prone)
    out = []

    if frozenset(viewers) != scen.ok or frozenset(sdqs.per_view_quorums.per_view) != scen.ok:
        out.append(verdict("views_cover_correct", False, scen.ok))

    witness = None
    for v in viewers:
        problem = sdqs.per_view_quorums[v].violations() or sdqs.per_view_fail_prone[v].violations()
        if problem:
            witness = (v, problem[0]) + problem[1]
            break
    out.append(verdict("per_view_structure", witness is None, witness))

    witness = next((v for v in viewers if not sdqs.per_view_fail_prone[v].covers(bad)), None)
    out.append(verdict("sd_safety", witness is None, witness))

    everyone = sort_sets(sdqs.per_view_quorums.all_quorums())
    weak = strong = None
    for v in viewers:
        fail_sets = sdqs.per_view_fail_prone[v].sorted()
        for u1 in sdqs.per_view_quorums[v].sorted():
            for u2 in everyone:
                inter = u1 & u2
                for b in fail_sets:
                    if inter <= b:
                        if strong is None:
                            strong = (v, u1, u2, b)
                        if weak is None and bad <= b:
                            weak = (v, u1, u2, b)
                if weak:
                    break
            if weak:
                break
        if weak:
            break
    out.append(verdict("sd_consistency", weak is None, weak))

    witness = None
    for v in viewers:
        qs = sdqs.per_view_quorums[v].sorted()
        for b in sdqs.per_view_fail_prone[v].sorted():
            if not any(not (u & b) for u in qs):
                witness = (v, b)
                break
        if witness:
            break
    out.append(verdict("sd_availability", witness is None, witness))

    if weak is not None and strong is None:
        raise InvariantError("weak SD-consistency failed while the strong variant held")
    out.append(Verdict("strong_sd_consistency", "pass" if strong is None else "fail", strong, required=False))
    return AxiomReport("subjective dqs axioms", tuple(out), {"bad": bad})


def induced_subjective_dqs(sfbqs: SubjectiveFbqs, cap: int = DEFAULT_CAP) -> SubjectiveDqs:
    """Per-view quorums plus per-view maximal fail-prone sets leaving some intact server."""
    quorums = induce_subjective_quorums(sfbqs, cap)
    if not subjective_intact_set(sfbqs, cap):
        raise PreconditionError("no intact server: the induced subjective DQS is undefined")
    fail_prone = {v: induced_fail_prone(view, cap) for v, view in sfbqs.views.items()}
    sdqs = SubjectiveDqs(quorums, fail_prone, sfbqs.scenario)
    report = check_subjective_dqs(sdqs)
    if not report.passed:
        raise InvariantError("induced subjective DQS violates its axioms:\n" + report.text())
    return sdqs


def subjective_v_blocking(sfbqs: SubjectiveFbqs, v, b) -> bool:
    """``b`` overlaps every slice of ``v`` as known by ``v`` itself."""
    return is_v_blocking(sfbqs.view(v), v, b)


def uniform_dqs(dqs: Dqs, scenario: FailureScenario) -> SubjectiveDqs:
    """Every correct server holds the same classical DQS."""
    return SubjectiveDqs(
        SubjectiveQuorumSystem({v: dqs.quorum_system for v in sort_nodes(scenario.ok)}),
        {v: dqs.fail_prone for v in sort_nodes(scenario.ok)},
        scenario,
    )


__all__ = [
    "SubjectiveDqs",
    "SubjectiveFbqs",
    "SubjectiveQuorumSystem",
    "check_subjective_dqs",
    "induce_subjective_quorums",
    "induced_subjective_dqs",
    "subjective_intact_set",
    "subjective_quorum_intersection",
    "subjective_v_blocking",
    "uniform_dqs",
    "validate_agreement",
]
