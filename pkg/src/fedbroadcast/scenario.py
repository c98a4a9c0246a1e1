"""Declarative run descriptions and their JSON file format.

A scenario fixes the universe, the slices (optionally per-view overrides of
faulty servers' slices), the faulty servers, the client's behaviour, the
protocol variant, a scripted adversary, the scheduler and exploration bounds.

File schema (unknown keys are rejected)::

    {
      "name": "example14",                 # optional
      "description": "...",                # optional
      "universe": [1, 2, 3, 4],
      "slices": {"1": [[1, 2], [1, 4]], ...},
      "views": {"2": {"3": [[2, 3]]}},     # optional: viewer -> faulty node -> slices
      "faulty": [3],
      "client": {"value": "a"}  or  {"split": {"1": "a", "4": "a'"}},
      "variant": "STELLAR",
      "line12": true,                      # optional, test-only switch
      "adversary": [{"actor": 3, "op": "send", "kind": "ECHO", "value": "a",
                     "to": [1, 2], "trigger": {"at": "start"}}, ...],
      "scheduler": {"mode": "fifo", "seed": 0},
      "bounds": {"max_steps": 10000, "max_in_flight": 1000, "max_states": 2000000}
    }

Triggers: ``{"at": "start"}``, ``{"at_step": k}``, ``{"after_receive": {"receiver": r,
"kind": K, "sender": s, "value": v}}`` (ECHO/READY: ``r`` has recorded ``s``; BCAST:
``r`` has echoed, ``v`` if given) and ``{"after_deliver": r}``. Only correct servers can be
receivers in a trigger.
"""

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Dict, FrozenSet, Optional, Tuple

from .errors import ConfigError, DomainError, PreconditionError, ScenarioParseError
from .nodes import sort_nodes, sort_sets
from .protocols import BCAST, CLIENT, KINDS, SUBJECTIVE, Message, ProtocolVariant, Variant
from .quorum_core import Fbqs, FailureScenario, has_quorum_intersection, induced_dqs, intact_set
from .subjective import SubjectiveFbqs, induced_subjective_dqs, subjective_intact_set, subjective_quorum_intersection

MODES = ("fifo", "random", "exhaustive")


@dataclass(frozen=True)
class ClientSpec:
    """Either a correct client broadcasting ``value`` or a faulty one sending per-server values."""

    value: Any = None
    split: Optional[Tuple[Tuple[Any, Any], ...]] = None  # ((server, value-or-None), ...)

    def __post_init__(self):
        if (self.value is None) == (self.split is None):
            raise DomainError("client needs exactly one of value / split")
        if self.split is not None:
            split = dict(self.split)
            object.__setattr__(self, "split", tuple((n, split[n]) for n in sort_nodes(split)))

    @property
    def correct(self) -> bool:
        return self.value is not None

    def sends(self, universe) -> Tuple:
        if self.correct:
            return tuple((v, Message(BCAST, self.value, CLIENT)) for v in sort_nodes(universe))
        return tuple((v, Message(BCAST, a, CLIENT)) for v, a in self.split if a is not None)

    def values(self) -> Tuple:
        if self.correct:
            return (self.value,)
        return tuple(sorted({a for _, a in self.split if a is not None}, key=str))


@dataclass(frozen=True)
class Trigger:
    at: str = "start"  # start | step | receive | deliver
    step: int = 0
    receiver: Any = None
    kind: Optional[str] = None
    sender: Any = None
    value: Any = None

    def describe(self) -> str:
        if self.at == "start":
            return "start"
        if self.at == "step":
            return f"step>={self.step}"
        if self.at == "deliver":
            return f"deliver@{self.receiver}"
        return f"recv@{self.receiver}:{self.kind}({self.value})<-{self.sender}"


@dataclass(frozen=True)
class Action:
    actor: Any
    op: str = "send"  # send | drop
    kind: Optional[str] = None
    value: Any = None
    to: Tuple = ()
    trigger: Trigger = field(default_factory=Trigger)

    def messages(self) -> Tuple:
        sender = CLIENT if self.kind == BCAST else self.actor
        msg = Message(self.kind, self.value, sender)
        return tuple((d, msg) for d in self.to)


@dataclass(frozen=True)
class SchedulerPolicy:
    mode: str = "fifo"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"unknown scheduler mode {self.mode!r}")


@dataclass(frozen=True)
class Bounds:
    max_steps: int = 10_000
    max_in_flight: int = 1_000
    max_states: int = 2_000_000


@dataclass(frozen=True)
class Scenario:
    universe: Tuple
    faulty: FrozenSet
    client: ClientSpec
    structure: Any  # Fbqs, or SubjectiveFbqs when views differ
    variant: Variant
    adversary: Tuple[Action, ...] = ()
    scheduler: SchedulerPolicy = field(default_factory=SchedulerPolicy)
    bounds: Bounds = field(default_factory=Bounds)
    line12: bool = True
    name: str = ""
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "universe", sort_nodes(self.universe))
        object.__setattr__(self, "faulty", frozenset(self.faulty))
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "adversary", tuple(self.adversary))
        uni = frozenset(self.universe)
        if not self.faulty <= uni:
            raise DomainError("faulty servers must belong to the universe")
        if self.client.split is not None:
            for n, _ in self.client.split:
                if n not in uni:
                    raise DomainError(f"client split names unknown server {n!r}")
        if isinstance(self.structure, SubjectiveFbqs):
            if self.structure.bad != self.faulty or self.structure.universe != uni:
                raise DomainError("subjective views must be keyed exactly by the correct servers")
        elif isinstance(self.structure, Fbqs):
            if self.structure.universe != uni:
                raise DomainError("slices are over a different universe")
        else:
            raise DomainError("structure must be an Fbqs or a SubjectiveFbqs")
        for k, a in enumerate(self.adversary):
            if a.actor not in self.faulty:
                raise DomainError(f"adversary action {k}: actor {a.actor!r} is not a faulty server")
            if a.op == "send":
                if a.kind not in KINDS:
                    raise DomainError(f"adversary action {k}: unknown message kind {a.kind!r}")
                if not frozenset(a.to) <= uni:
                    raise DomainError(f"adversary action {k}: destination outside the universe")
            elif a.op != "drop":
                raise DomainError(f"adversary action {k}: unknown op {a.op!r}")
            t = a.trigger
            if t.at in ("receive", "deliver") and t.receiver not in self.correct:
                raise DomainError(f"adversary action {k}: trigger receiver must be a correct server")

    @property
    def correct(self) -> FrozenSet:
        return frozenset(self.universe) - self.faulty

    @property
    def subjective(self) -> bool:
        return isinstance(self.structure, SubjectiveFbqs)

    @property
    def failure(self) -> FailureScenario:
        return FailureScenario(frozenset(self.universe), self.faulty)

    def with_changes(self, **kw) -> "Scenario":
        return replace(self, **kw)

    def subjective_structure(self) -> SubjectiveFbqs:
        if self.subjective:
            return self.structure
        return SubjectiveFbqs.uniform(self.structure, self.faulty)

    def has_quorum_intersection(self) -> bool:
        if self.subjective:
            return subjective_quorum_intersection(self.structure)
        return has_quorum_intersection(self.structure)

    @cached_property
    def intact(self) -> FrozenSet:
        """Intact servers; empty when quorum intersection fails and intactness is undefined."""
        if not self.has_quorum_intersection():
            return frozenset()
        if self.subjective:
            return subjective_intact_set(self.structure)
        return intact_set(self.structure, self.failure)

    @cached_property
    def protocol(self) -> ProtocolVariant:
        return self.protocol_for(self.variant)

    def protocol_for(self, tag, line12: Optional[bool] = None) -> ProtocolVariant:
        tag = Variant(tag)
        line12 = self.line12 if line12 is None else line12
        try:
            if tag in SUBJECTIVE:
                sfbqs = self.subjective_structure()
                if tag is Variant.STELLAR_SUBJECTIVE:
                    return ProtocolVariant(tag, sfbqs, line12)
                return ProtocolVariant(tag, induced_subjective_dqs(sfbqs), line12)
            if self.subjective:
                raise ConfigError(f"{tag} needs one shared FBQS, but the scenario has per-view slices")
            if tag in (Variant.STELLAR, Variant.STELLAR_OPEN):
                return ProtocolVariant(tag, self.structure, line12)
            return ProtocolVariant(tag, induced_dqs(self.structure), line12)
        except PreconditionError as e:
            raise ConfigError(f"{tag}: {e}") from e

    def hypotheses(self) -> Dict[str, bool]:
        """Standing assumptions: some intact server exists; some fail-prone set covers the faulty set."""
        intact = bool(self.intact)
        out = {"intact_exists": intact}
        if self.variant in (Variant.BRACHA, Variant.ECHO_DELIVER):
            out["fail_prone_covers_bad"] = self.protocol.structure.fail_prone.covers(self.faulty)
        elif self.variant is Variant.BRACHA_SUBJECTIVE:
            sdqs = self.protocol.structure
            out["fail_prone_covers_bad"] = all(fp.covers(self.faulty) for fp in sdqs.per_view_fail_prone.values())
        return out


# -- file format --------------------------------------------------------------

_TOP = {
    "name", "description", "universe", "slices", "views", "faulty", "client",
    "variant", "line12", "adversary", "scheduler", "bounds",
}
_REQUIRED = ("universe", "slices", "client", "variant")


def _node_lookup(universe) -> Dict[str, Any]:
    table = {}
    for n in universe:
        k = str(n)
        if k in table:
            raise ScenarioParseError(f"node names {table[k]!r} and {n!r} collide", "universe")
        table[k] = n
    return table


def _node(table, raw, where):
    if isinstance(raw, bool) or not isinstance(raw, (int, str)):
        raise ScenarioParseError(f"expected a node name, got {raw!r}", where)
    key = str(raw)
    if key not in table:
        raise ScenarioParseError(f"unknown node {raw!r}", where)
    return table[key]


def _nodes(table, raw, where):
    if not isinstance(raw, list):
        raise ScenarioParseError("expected a list of nodes", where)
    return frozenset(_node(table, x, f"{where}[{i}]") for i, x in enumerate(raw))


def _keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ScenarioParseError("expected an object", where)
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ScenarioParseError(f"unknown field {extra[0]!r}", where)


def _value(raw, where):
    if raw is None or isinstance(raw, bool) or not isinstance(raw, (str, int)):
        raise ScenarioParseError(f"broadcast values must be strings or integers, got {raw!r}", where)
    return raw


def _slices(table, raw, owner, where):
    if not isinstance(raw, list) or not raw:
        raise ScenarioParseError("expected a non-empty list of slices", where)
    out = []
    for i, q in enumerate(raw):
        q = _nodes(table, q, f"{where}[{i}]")
        if owner not in q:
            raise ScenarioParseError("slice must contain its owner", f"{where}[{i}]")
        out.append(q)
    return out


def _trigger(table, raw, where) -> Trigger:
    if raw is None:
        return Trigger()
    _keys(raw, {"at", "at_step", "after_receive", "after_deliver"}, where)
    if len(raw) != 1:
        raise ScenarioParseError("a trigger has exactly one of at / at_step / after_receive / after_deliver", where)
    if "at" in raw:
        if raw["at"] != "start":
            raise ScenarioParseError("only \"start\" is allowed for at", where)
        return Trigger()
    if "at_step" in raw:
        k = raw["at_step"]
        if isinstance(k, bool) or not isinstance(k, int) or k < 0:
            raise ScenarioParseError("at_step must be a non-negative integer", where)
        return Trigger("step", step=k)
    if "after_deliver" in raw:
        return Trigger("deliver", receiver=_node(table, raw["after_deliver"], f"{where}.after_deliver"))
    spec = raw["after_receive"]
    w = f"{where}.after_receive"
    _keys(spec, {"receiver", "kind", "sender", "value"}, w)
    if "receiver" not in spec or "kind" not in spec:
        raise ScenarioParseError("receiver and kind are required", w)
    kind = spec["kind"]
    if kind not in KINDS:
        raise ScenarioParseError(f"unknown message kind {kind!r}", w)
    sender = spec.get("sender")
    if kind == BCAST and "sender" in spec:
        raise ScenarioParseError("BCAST triggers take no sender", w)
    if kind != BCAST:
        if sender is None or "value" not in spec:
            raise ScenarioParseError("ECHO/READY triggers need sender and value", w)
        sender = _node(table, sender, f"{w}.sender")
    return Trigger(
        "receive",
        receiver=_node(table, spec["receiver"], f"{w}.receiver"),
        kind=kind,
        sender=sender,
        value=_value(spec["value"], f"{w}.value") if "value" in spec else None,
    )


def _action(table, raw, where) -> Action:
    _keys(raw, {"actor", "op", "kind", "value", "to", "trigger"}, where)
    if "actor" not in raw:
        raise ScenarioParseError("actor is required", where)
    actor = _node(table, raw["actor"], f"{where}.actor")
    op = raw.get("op", "send")
    trigger = _trigger(table, raw.get("trigger"), f"{where}.trigger")
    if op == "drop":
        extra = sorted({"kind", "value", "to"} & set(raw))
        if extra:
            raise ScenarioParseError(f"drop actions take no {extra[0]!r}", where)
        return Action(actor, "drop", trigger=trigger)
    if op != "send":
        raise ScenarioParseError(f"unknown op {op!r}", f"{where}.op")
    if raw.get("kind") not in KINDS:
        raise ScenarioParseError(f"kind must be one of {', '.join(KINDS)}", f"{where}.kind")
    if "value" not in raw or "to" not in raw:
        raise ScenarioParseError("send actions need value and to", where)
    to = sort_nodes(_nodes(table, raw["to"], f"{where}.to"))
    return Action(actor, "send", raw["kind"], _value(raw["value"], f"{where}.value"), to, trigger)


def scenario_from_dict(doc: Dict) -> Scenario:
    _keys(doc, _TOP, "scenario")
    for k in _REQUIRED:
        if k not in doc:
            raise ScenarioParseError("missing required field", k)
    raw_uni = doc["universe"]
    if not isinstance(raw_uni, list) or not raw_uni:
        raise ScenarioParseError("expected a non-empty list of nodes", "universe")
    for i, n in enumerate(raw_uni):
        if isinstance(n, bool) or not isinstance(n, (int, str)):
            raise ScenarioParseError(f"node names are integers or strings, got {n!r}", f"universe[{i}]")
    if len(set(map(str, raw_uni))) != len(raw_uni):
        raise ScenarioParseError("duplicate node", "universe")
    table = _node_lookup(raw_uni)
    universe = frozenset(raw_uni)
    faulty = _nodes(table, doc.get("faulty", []), "faulty")

    raw_slices = doc["slices"]
    _keys(raw_slices, table, "slices")
    slices = {}
    for k, qs in raw_slices.items():
        owner = table[k]
        slices[owner] = _slices(table, qs, owner, f"slices.{k}")
    missing = sort_nodes(universe - slices.keys())
    if missing:
        raise ScenarioParseError(f"node {missing[0]!r} has no slices", "slices")

    views = doc.get("views")
    try:
        if views:
            _keys(views, table, "views")
            overrides = {}
            for vk, per in views.items():
                viewer = table[vk]
                if viewer in faulty:
                    raise ScenarioParseError("views may only be keyed by correct servers", f"views.{vk}")
                _keys(per, table, f"views.{vk}")
                overrides[viewer] = {}
                for nk, qs in per.items():
                    node = table[nk]
                    if node not in faulty:
                        raise ScenarioParseError(
                            "only faulty servers' slices may differ between views", f"views.{vk}.{nk}"
                        )
                    overrides[viewer][node] = _slices(table, qs, node, f"views.{vk}.{nk}")
            structure = SubjectiveFbqs.from_shared(slices, faulty, overrides)
        else:
            structure = Fbqs(universe, slices)
    except DomainError as e:
        raise ScenarioParseError(str(e), "views" if views else "slices") from e

    client = doc["client"]
    _keys(client, {"value", "split"}, "client")
    if len(client) != 1:
        raise ScenarioParseError("exactly one of value / split", "client")
    if "value" in client:
        client_spec = ClientSpec(value=_value(client["value"], "client.value"))
    else:
        split = client["split"]
        _keys(split, table, "client.split")
        client_spec = ClientSpec(
            split=tuple(
                (table[k], None if v is None else _value(v, f"client.split.{k}")) for k, v in split.items()
            )
        )

    try:
        variant = Variant(doc["variant"])
    except ValueError:
        raise ScenarioParseError(f"unknown variant {doc['variant']!r}", "variant") from None
    line12 = doc.get("line12", True)
    if not isinstance(line12, bool):
        raise ScenarioParseError("expected true or false", "line12")

    raw_adv = doc.get("adversary", [])
    if not isinstance(raw_adv, list):
        raise ScenarioParseError("expected a list of actions", "adversary")
    adversary = tuple(_action(table, a, f"adversary[{i}]") for i, a in enumerate(raw_adv))
    for i, a in enumerate(adversary):
        if a.actor not in faulty:
            raise ScenarioParseError("actor must be a faulty server", f"adversary[{i}].actor")
        if a.trigger.at in ("receive", "deliver") and a.trigger.receiver in faulty:
            raise ScenarioParseError("trigger receiver must be a correct server", f"adversary[{i}].trigger")

    sched = doc.get("scheduler", {})
    _keys(sched, {"mode", "seed"}, "scheduler")
    mode = sched.get("mode", "fifo")
    if mode not in MODES:
        raise ScenarioParseError(f"mode must be one of {', '.join(MODES)}", "scheduler.mode")
    seed = sched.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ScenarioParseError("seed must be an integer", "scheduler.seed")

    raw_bounds = doc.get("bounds", {})
    _keys(raw_bounds, {"max_steps", "max_in_flight", "max_states"}, "bounds")
    for k, v in raw_bounds.items():
        if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
            raise ScenarioParseError("bounds must be positive integers", f"bounds.{k}")

    for k in ("name", "description"):
        if k in doc and not isinstance(doc[k], str):
            raise ScenarioParseError("expected a string", k)

    try:
        return Scenario(
            universe=tuple(universe),
            faulty=faulty,
            client=client_spec,
            structure=structure,
            variant=variant,
            adversary=adversary,
            scheduler=SchedulerPolicy(mode, seed),
            bounds=Bounds(**raw_bounds),
            line12=line12,
            name=doc.get("name", ""),
            description=doc.get("description", ""),
        )
    except DomainError as e:
        raise ScenarioParseError(str(e), "scenario") from e


def parse_scenario(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioParseError(f"syntax error at line {e.lineno}, column {e.colno}: {e.msg}") from None
    return scenario_from_dict(doc)


def _jnode(n):
    return n


def _jset(s):
    return [_jnode(n) for n in sort_nodes(s)]


def _jslices(qs):
    return [_jset(q) for q in sort_sets(qs)]


def scenario_to_dict(s: Scenario) -> Dict:
    doc: Dict[str, Any] = {}
    if s.name:
        doc["name"] = s.name
    if s.description:
        doc["description"] = s.description
    doc["universe"] = list(s.universe)
    if s.subjective:
        views = s.structure.views
        first = views[sort_nodes(views)[0]]
        # faulty servers' slices: take the first viewer's as the shared default
        base = {v: first.slices[v] for v in s.universe}
        doc["slices"] = {str(v): _jslices(base[v]) for v in s.universe}
        overrides = {}
        for viewer, view in views.items():
            diff = {str(n): _jslices(view.slices[n]) for n in sort_nodes(s.faulty) if view.slices[n] != base[n]}
            if diff:
                overrides[str(viewer)] = diff
        doc["views"] = overrides
    else:
        doc["slices"] = {str(v): _jslices(s.structure.slices[v]) for v in s.universe}
    doc["faulty"] = _jset(s.faulty)
    if s.client.correct:
        doc["client"] = {"value": s.client.value}
    else:
        doc["client"] = {"split": {str(n): a for n, a in s.client.split}}
    doc["variant"] = s.variant.value
    if not s.line12:
        doc["line12"] = False
    adv = []
    for a in s.adversary:
        item: Dict[str, Any] = {"actor": a.actor, "op": a.op}
        if a.op == "send":
            item.update(kind=a.kind, value=a.value, to=list(a.to))
        t = a.trigger
        if t.at == "start":
            item["trigger"] = {"at": "start"}
        elif t.at == "step":
            item["trigger"] = {"at_step": t.step}
        elif t.at == "deliver":
            item["trigger"] = {"after_deliver": t.receiver}
        else:
            rec = {"receiver": t.receiver, "kind": t.kind}
            if t.sender is not None:
                rec["sender"] = t.sender
            if t.value is not None:
                rec["value"] = t.value
            item["trigger"] = {"after_receive": rec}
        adv.append(item)
    doc["adversary"] = adv
    doc["scheduler"] = {"mode": s.scheduler.mode, "seed": s.scheduler.seed}
    doc["bounds"] = {
        "max_steps": s.bounds.max_steps,
        "max_in_flight": s.bounds.max_in_flight,
        "max_states": s.bounds.max_states,
    }
    return doc


def serialize_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2) + "\n"


__all__ = [
    "Action",
    "Bounds",
    "ClientSpec",
    "MODES",
    "Scenario",
    "SchedulerPolicy",
    "Trigger",
    "parse_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "serialize_scenario",
]
