"""Broadcast state machines.

One server-side transition function covers the whole protocol family: the
classical echo/ready broadcast over a DQS, its federated variants over an
FBQS (quorums must contain the receiver; the amplification rule uses
v-blocking sets), an "open" federated variant that only swaps the
amplification rule, per-view versions of both, and a deliberately broken
echo-then-deliver variant kept for tests.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Dict, FrozenSet, NamedTuple, Optional, Tuple

from .errors import ConfigError, InvariantError
from .nodes import sort_nodes, sort_sets, value_key
from .quorum_core import Dqs, Fbqs, check_dqs, enumerate_quorums, has_quorum_intersection, minimal_sets
from .subjective import (
    SubjectiveDqs,
    SubjectiveFbqs,
    check_subjective_dqs,
    subjective_quorum_intersection,
    validate_agreement,
)

BCAST = "BCAST"
ECHO = "ECHO"
READY = "READY"
KINDS = (BCAST, ECHO, READY)

CLIENT = "client"


class Variant(str, Enum):
    BRACHA = "BRACHA"
    STELLAR = "STELLAR"
    STELLAR_OPEN = "STELLAR_OPEN"
    BRACHA_SUBJECTIVE = "BRACHA_SUBJECTIVE"
    STELLAR_SUBJECTIVE = "STELLAR_SUBJECTIVE"
    ECHO_DELIVER = "ECHO_DELIVER"  # test-only

    def __str__(self):
        return self.value


PUBLIC_VARIANTS = tuple(v for v in Variant if v is not Variant.ECHO_DELIVER)
STELLAR_FAMILY = frozenset({Variant.STELLAR, Variant.STELLAR_OPEN, Variant.STELLAR_SUBJECTIVE})
MEMBERSHIP_REQUIRED = frozenset({Variant.STELLAR, Variant.STELLAR_SUBJECTIVE})
SUBJECTIVE = frozenset({Variant.BRACHA_SUBJECTIVE, Variant.STELLAR_SUBJECTIVE})


class Message(NamedTuple):
    kind: str
    value: Any
    sender: Any

    def __str__(self):
        return f"{self.kind}({self.value})"


def _freeze_senders(table: Dict) -> Tuple:
    return tuple(sorted(table.items(), key=lambda kv: value_key(kv[0])))


class ServerState(NamedTuple):
    me: Any
    echoed: bool = False
    ready: bool = False
    delivered: bool = False
    echo_senders: Tuple = ()  # ((value, frozenset of senders), ...) in value order
    ready_senders: Tuple = ()
    delivered_value: Any = None
    echo_value: Any = None
    ready_value: Any = None

    def echoes(self, value) -> frozenset:
        for v, s in self.echo_senders:
            if v == value:
                return s
        return frozenset()

    def readies(self, value) -> frozenset:
        for v, s in self.ready_senders:
            if v == value:
                return s
        return frozenset()

    def check(self):
        if self.delivered != (self.delivered_value is not None):
            raise InvariantError(f"server {self.me!r}: delivered flag and delivered value disagree")
        if self.ready != (self.ready_value is not None) or self.echoed != (self.echo_value is not None):
            raise InvariantError(f"server {self.me!r}: flag and recorded value disagree")
        for table in (self.echo_senders, self.ready_senders):
            values = [v for v, _ in table]
            if len(set(values)) != len(values):
                raise InvariantError(f"server {self.me!r}: duplicate value rows in a sender map")


def initial_state(me) -> ServerState:
    return ServerState(me)


class StepOutput(NamedTuple):
    outbound: Tuple = ()  # ((destination, Message), ...)
    delivery: Any = None


@dataclass(frozen=True)
class ServerRules:
    """Everything one server consults when evaluating its guards."""

    ready_quorums: Tuple[FrozenSet, ...]  # minimal usable quorums for the echo->ready and deliver rules
    fail_sets: Optional[Tuple[FrozenSet, ...]] = None  # classical amplification rule
    slices: Optional[Tuple[FrozenSet, ...]] = None  # federated amplification rule (v-blocking)
    amplify: bool = True
    echo_deliver: bool = False


@dataclass(frozen=True, eq=False)
class ProtocolVariant:
    tag: Variant
    structure: Any
    line12: bool = True  # test-only toggle for the amplification rule
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "tag", Variant(self.tag))
        if self.validate:
            self._validate()

    def _validate(self):
        t, s = self.tag, self.structure
        if t in (Variant.BRACHA, Variant.ECHO_DELIVER):
            if not isinstance(s, Dqs):
                raise ConfigError(f"{t} needs a Dqs, got {type(s).__name__}")
            report = check_dqs(s)
            if not report.passed:
                raise ConfigError(f"{t} over a structure that is not a DQS:\n" + report.text())
        elif t in (Variant.STELLAR, Variant.STELLAR_OPEN):
            if not isinstance(s, Fbqs):
                raise ConfigError(f"{t} needs an Fbqs, got {type(s).__name__}")
            if not has_quorum_intersection(s):
                raise ConfigError(f"{t} needs an FBQS with quorum intersection")
        elif t is Variant.BRACHA_SUBJECTIVE:
            if not isinstance(s, SubjectiveDqs):
                raise ConfigError(f"{t} needs a SubjectiveDqs, got {type(s).__name__}")
            report = check_subjective_dqs(s)
            if not report.passed:
                raise ConfigError(f"{t} over a structure that is not a subjective DQS:\n" + report.text())
        elif t is Variant.STELLAR_SUBJECTIVE:
            if not isinstance(s, SubjectiveFbqs):
                raise ConfigError(f"{t} needs a SubjectiveFbqs, got {type(s).__name__}")
            if not validate_agreement(s).passed:
                raise ConfigError(f"{t}: views disagree on correct servers' slices")
            if not subjective_quorum_intersection(s):
                raise ConfigError(f"{t} needs every view to have quorum intersection")

    @cached_property
    def universe(self) -> Tuple:
        s = self.structure
        if isinstance(s, Fbqs):
            return s.nodes
        if isinstance(s, SubjectiveFbqs):
            return sort_nodes(s.universe)
        if isinstance(s, SubjectiveDqs):
            return sort_nodes(s.scenario.universe)
        nodes = set()
        for q in s.quorum_system.quorums:
            nodes |= q
        for b in s.fail_prone.fail_sets:
            nodes |= b
        return sort_nodes(nodes)

    @cached_property
    def _rules(self) -> Dict:
        return {}

    def rules(self, me) -> ServerRules:
        r = self._rules.get(me)
        if r is None:
            r = self._rules[me] = self._compile(me)
        return r

    def _compile(self, me) -> ServerRules:
        t, s = self.tag, self.structure
        if t in (Variant.BRACHA, Variant.ECHO_DELIVER, Variant.BRACHA_SUBJECTIVE):
            dqs = s.view(me) if t is Variant.BRACHA_SUBJECTIVE else s
            return ServerRules(
                ready_quorums=dqs.minimal_quorums,
                fail_sets=dqs.fail_prone.sorted(),
                amplify=self.line12 and t is not Variant.ECHO_DELIVER,
                echo_deliver=t is Variant.ECHO_DELIVER,
            )
        view = s.view(me) if t is Variant.STELLAR_SUBJECTIVE else s
        quorums = enumerate_quorums(view).quorums
        if t in MEMBERSHIP_REQUIRED:
            quorums = [q for q in quorums if me in q]
        return ServerRules(
            ready_quorums=sort_sets(minimal_sets(quorums)),
            slices=sort_sets(view.slices[me]),
            amplify=self.line12,
        )


def client_broadcast(value, universe) -> Tuple:
    """One BCAST(value) per server, in node order."""
    msg = Message(BCAST, value, CLIENT)
    return tuple((v, msg) for v in sort_nodes(universe))


def guard_echo(state: ServerState, msg: Message) -> bool:
    return msg.kind == BCAST and not state.echoed


def _contains_quorum(senders: frozenset, quorums) -> bool:
    return any(q <= senders for q in quorums)


def guard_ready_quorum(state: ServerState, variant: ProtocolVariant, value) -> bool:
    rules = variant.rules(state.me)
    if state.ready or rules.echo_deliver:
        return False
    return _contains_quorum(state.echoes(value), rules.ready_quorums)


def guard_ready_blocking(state: ServerState, variant: ProtocolVariant, value) -> bool:
    rules = variant.rules(state.me)
    if state.ready or not rules.amplify:
        return False
    senders = state.readies(value)
    if not senders:
        return False
    if rules.slices is not None:
        return all(q & senders for q in rules.slices)
    # some non-empty subset escapes every fail-prone set iff the whole set does
    return not any(senders <= b for b in rules.fail_sets)


def guard_deliver(state: ServerState, variant: ProtocolVariant, value) -> bool:
    if state.delivered:
        return False
    rules = variant.rules(state.me)
    senders = state.echoes(value) if rules.echo_deliver else state.readies(value)
    return _contains_quorum(senders, rules.ready_quorums)


def _add_sender(table: Tuple, value, sender) -> Optional[Tuple]:
    """New table with ``sender`` recorded for ``value``; None if already present."""
    d = dict(table)
    senders = d.get(value, frozenset())
    if sender in senders:
        return None
    d[value] = senders | {sender}
    return _freeze_senders(d)


def _to_all(universe, kind, value, me) -> Tuple:
    msg = Message(kind, value, me)
    return tuple((v, msg) for v in universe)


def handle(state: ServerState, variant: ProtocolVariant, msg: Message) -> Tuple[ServerState, StepOutput]:
    """Consume one message, then fire enabled handlers until none is enabled.

    Handler order is fixed: echo, ready on an echo quorum, ready on an
    amplifying set, deliver.
    """
    state.check()
    universe = variant.universe
    out = []
    delivery = None

    if msg.kind == BCAST:
        if guard_echo(state, msg):
            state = state._replace(echoed=True, echo_value=msg.value)
            out.extend(_to_all(universe, ECHO, msg.value, state.me))
    elif msg.kind == ECHO:
        table = _add_sender(state.echo_senders, msg.value, msg.sender)
        if table is None:
            return state, StepOutput()
        state = state._replace(echo_senders=table)
    elif msg.kind == READY:
        table = _add_sender(state.ready_senders, msg.value, msg.sender)
        if table is None:
            return state, StepOutput()
        state = state._replace(ready_senders=table)
    else:
        raise InvariantError(f"unknown message kind {msg.kind!r}")

    changed = True
    while changed:
        changed = False
        if not state.ready:
            for value, _ in state.echo_senders:
                if guard_ready_quorum(state, variant, value):
                    state = state._replace(ready=True, ready_value=value)
                    out.extend(_to_all(universe, READY, value, state.me))
                    changed = True
                    break
        if not state.ready:
            for value, _ in state.ready_senders:
                if guard_ready_blocking(state, variant, value):
                    state = state._replace(ready=True, ready_value=value)
                    out.extend(_to_all(universe, READY, value, state.me))
                    changed = True
                    break
        if not state.delivered:
            table = state.echo_senders if variant.rules(state.me).echo_deliver else state.ready_senders
            for value, _ in table:
                if guard_deliver(state, variant, value):
                    state = state._replace(delivered=True, delivered_value=value)
                    delivery = value
                    changed = True
                    break
    return state, StepOutput(tuple(out), delivery)


__all__ = [
    "BCAST",
    "CLIENT",
    "ECHO",
    "KINDS",
    "MEMBERSHIP_REQUIRED",
    "Message",
    "PUBLIC_VARIANTS",
    "ProtocolVariant",
    "READY",
    "STELLAR_FAMILY",
    "SUBJECTIVE",
    "ServerRules",
    "ServerState",
    "StepOutput",
    "Variant",
    "client_broadcast",
    "guard_deliver",
    "guard_echo",
    "guard_ready_blocking",
    "guard_ready_quorum",
    "handle",
    "initial_state",
]
