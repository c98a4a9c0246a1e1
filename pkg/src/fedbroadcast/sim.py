"""Deterministic execution of scenarios: single runs, exhaustive exploration,
trace (de)serialization, histories, and cross-protocol equivalent executions.

Model:

* Correct servers run ``protocols.handle``; faulty servers only execute the
  adversary script. Messages addressed to a faulty server are received at the
  moment they are sent (faulty-side scheduling is unobservable).
* The script is consumed in order. An action fires as soon as its trigger holds
  and all earlier actions have fired; a ``drop`` silences its actor for every
  later action (messages already in flight still arrive).
* A run stops at quiescence (nothing in flight) or when ``bounds.max_steps``
  deliveries have happened.
"""

import json
import random
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, FrozenSet, Iterator, List, NamedTuple, Optional, Tuple

from .errors import CapacityError, EquivalenceError, InvariantError, PreconditionError
from .nodes import sort_nodes, value_key
from .protocols import BCAST, ECHO, KINDS, Message, ServerState, Variant, handle, initial_state
from .scenario import Action, ClientSpec, Scenario, SchedulerPolicy, Trigger

QUIESCENT = "quiescent"
BOUND_EXHAUSTED = "bound-exhausted"


class Send(NamedTuple):
    src: Any
    dst: Any
    msg: Message


class Receive(NamedTuple):
    dst: Any
    src: Any
    msg: Message


class Deliver(NamedTuple):
    server: Any
    value: Any


@dataclass(frozen=True)
class Trace:
    events: Tuple
    status: str = QUIESCENT

    @property
    def quiescent(self) -> bool:
        return self.status == QUIESCENT

    def deliveries(self) -> Tuple[Deliver, ...]:
        return tuple(e for e in self.events if isinstance(e, Deliver))

    def delivered(self) -> Dict:
        """server -> first delivered value."""
        out = {}
        for e in self.deliveries():
            out.setdefault(e.server, e.value)
        return out

    def lines(self) -> List[str]:
        return [_event_line(e) for e in self.events] + [f"STATUS\t{self.status}"]

    def text(self) -> str:
        return "\n".join(self.lines()) + "\n"


# -- serialization ------------------------------------------------------------

_INT = re.compile(r"-?\d+")


def _tok(x) -> str:
    if isinstance(x, int) and not isinstance(x, bool):
        return str(x)
    if isinstance(x, str) and x and not _INT.fullmatch(x) and not x.startswith('"') and x.isprintable() and "\t" not in x:
        return x
    return json.dumps(x)


def _untok(t: str):
    if t.startswith('"'):
        return json.loads(t)
    if _INT.fullmatch(t):
        return int(t)
    return t


def _event_line(e) -> str:
    if isinstance(e, Send):
        return "\t".join(("SEND", _tok(e.src), _tok(e.dst), e.msg.kind, _tok(e.msg.value)))
    if isinstance(e, Receive):
        return "\t".join(("RECV", _tok(e.dst), _tok(e.src), e.msg.kind, _tok(e.msg.value)))
    return "\t".join(("DELIVER", _tok(e.server), _tok(e.value)))


def serialize_trace(trace: Trace) -> str:
    return trace.text()


def parse_trace(text: str) -> Trace:
    events = []
    status = None
    for n, line in enumerate(text.splitlines(), 1):
        if not line:
            continue
        f = line.split("\t")
        tag = f[0]
        try:
            if tag == "SEND" and len(f) == 5 and f[3] in KINDS:
                src, dst, value = _untok(f[1]), _untok(f[2]), _untok(f[4])
                events.append(Send(src, dst, Message(f[3], value, src)))
            elif tag == "RECV" and len(f) == 5 and f[3] in KINDS:
                dst, src, value = _untok(f[1]), _untok(f[2]), _untok(f[4])
                events.append(Receive(dst, src, Message(f[3], value, src)))
            elif tag == "DELIVER" and len(f) == 3:
                events.append(Deliver(_untok(f[1]), _untok(f[2])))
            elif tag == "STATUS" and len(f) == 2 and f[1] in (QUIESCENT, BOUND_EXHAUSTED):
                status = f[1]
            else:
                raise ValueError
        except ValueError:
            raise ValueError(f"line {n}: malformed trace line {line!r}") from None
        if status is not None and tag != "STATUS":
            raise ValueError(f"line {n}: event after STATUS")
    if status is None:
        raise ValueError("trace has no STATUS line")
    return Trace(tuple(events), status)


# -- engine -------------------------------------------------------------------


class _Global(NamedTuple):
    states: Tuple[ServerState, ...]  # correct servers, in node order
    flight: Tuple[int, ...]  # interned (dst, msg) ids, in send order
    pc: int  # next adversary action
    steps: int


class _Engine:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.variant = scenario.protocol  # raises ConfigError on bad structure
        self.universe = scenario.universe
        self.correct = sort_nodes(scenario.correct)
        self.index = {v: i for i, v in enumerate(self.correct)}
        self.faulty = scenario.faulty
        self.script = scenario.adversary
        self._ids: Dict = {}
        self._msgs: List = []
        silenced, acc = [], frozenset()
        for a in self.script:
            silenced.append(acc)
            if a.op == "drop":
                acc = acc | {a.actor}
        self.silenced = silenced
        steps = [k for k, a in enumerate(self.script) if a.trigger.at == "step"]
        self.last_step_trigger = steps[-1] if steps else -1
        # (receiver, kind) pairs observed by triggers at or after each script position
        watched, acc = [frozenset()] * (len(self.script) + 1), frozenset()
        for k in range(len(self.script) - 1, -1, -1):
            t = self.script[k].trigger
            if t.at == "receive":
                acc = acc | {(t.receiver, t.kind)}
            watched[k] = acc
        self.watched = watched
        self.echo_deliver = {v: self.variant.rules(v).echo_deliver for v in self.correct}
        self._memo: Dict = {}

    def handle(self, st: ServerState, msg: Message):
        key = (st, msg)
        hit = self._memo.get(key)
        if hit is None:
            hit = self._memo[key] = handle(st, self.variant, msg)
        return hit

    def intern(self, dst, msg) -> int:
        key = (dst, msg)
        i = self._ids.get(key)
        if i is None:
            i = self._ids[key] = len(self._msgs)
            self._msgs.append(key)
        return i

    def message(self, i):
        return self._msgs[i]

    def key(self, g: _Global):
        steps = g.steps if g.pc <= self.last_step_trigger else -1
        return (g.states, tuple(sorted(g.flight)), g.pc, steps)

    def _emit(self, flight: list, events: list, dst, msg):
        events.append(Send(msg.sender, dst, msg))
        if dst in self.faulty:
            events.append(Receive(dst, msg.sender, msg))
        else:
            flight.append(self.intern(dst, msg))

    def _triggered(self, t: Trigger, states, steps) -> bool:
        if t.at == "start":
            return True
        if t.at == "step":
            return steps >= t.step
        st = states[self.index[t.receiver]]
        if t.at == "deliver":
            return st.delivered
        if t.kind == BCAST:
            return st.echoed and (t.value is None or st.echo_value == t.value)
        senders = st.echoes(t.value) if t.kind == ECHO else st.readies(t.value)
        return t.sender in senders

    def _fire(self, states, flight, pc, steps, events) -> int:
        while pc < len(self.script):
            a = self.script[pc]
            if not self._triggered(a.trigger, states, steps):
                break
            if a.op == "send" and a.actor not in self.silenced[pc]:
                for d, m in a.messages():
                    self._emit(flight, events, d, m)
            pc += 1
        return pc

    def start(self) -> Tuple[_Global, list]:
        states = tuple(initial_state(v) for v in self.correct)
        flight, events = [], []
        for d, m in self.scenario.client.sends(self.universe):
            self._emit(flight, events, d, m)
        pc = self._fire(states, flight, 0, 0, events)
        return _Global(states, tuple(flight), pc, 0), events

    def step(self, g: _Global, fid: int) -> Tuple[_Global, list]:
        flight = list(g.flight)
        flight.remove(fid)
        dst, msg = self._msgs[fid]
        events = [Receive(dst, msg.sender, msg)]
        i = self.index[dst]
        new, out = self.handle(g.states[i], msg)
        for d, m in out.outbound:
            self._emit(flight, events, d, m)
        if out.delivery is not None:
            events.append(Deliver(dst, out.delivery))
        states = g.states if new is g.states[i] else g.states[:i] + (new,) + g.states[i + 1:]
        steps = g.steps + 1
        pc = self._fire(states, flight, g.pc, steps, events)
        return _Global(states, tuple(flight), pc, steps), events


    def state_map(self, states) -> Dict[Any, ServerState]:
        return dict(zip(self.correct, states))

    def inert(self, st: ServerState, kind) -> bool:
        """Receiving ``kind`` can no longer change anything ``st`` will ever output."""
        if kind == BCAST:
            return st.echoed
        if self.echo_deliver[st.me]:
            return st.delivered if kind == ECHO else True
        if kind == ECHO:
            return st.ready
        return st.ready and st.delivered

    def absorb(self, g: _Global, events: list) -> _Global:
        """Receive every in-flight message whose reception is inert, in send order."""
        if g.pc <= self.last_step_trigger:
            return g
        watched = self.watched[g.pc]
        keep, states, steps = [], list(g.states), g.steps
        for fid in g.flight:
            dst, msg = self._msgs[fid]
            i = self.index[dst]
            if (dst, msg.kind) in watched or not self.inert(states[i], msg.kind):
                keep.append(fid)
                continue
            events.append(Receive(dst, msg.sender, msg))
            new, out = self.handle(states[i], msg)
            if out.outbound or out.delivery is not None:
                raise InvariantError(f"inert reception {msg} at {dst!r} produced output")
            states[i] = new
            steps += 1
        if len(keep) == len(g.flight):
            return g
        return _Global(tuple(states), tuple(keep), g.pc, steps)


def run(scenario: Scenario, seed: Optional[int] = None) -> Trace:
    """One execution under the scenario's scheduler (exhaustive mode runs FIFO)."""
    eng = _Engine(scenario)
    policy = scenario.scheduler
    rng = random.Random(policy.seed if seed is None else seed)
    g, events = eng.start()
    status = QUIESCENT
    while g.flight:
        if g.steps >= scenario.bounds.max_steps:
            status = BOUND_EXHAUSTED
            break
        pick = rng.randrange(len(g.flight)) if policy.mode == "random" else 0
        g, ev = eng.step(g, g.flight[pick])
        events.extend(ev)
    return Trace(tuple(events), status)


@dataclass(frozen=True)
class Exploration:
    traces: Tuple[Trace, ...]  # one per distinct terminal state, in discovery order
    states: int  # distinct global states visited
    paths: int  # maximal schedules in the explored graph (distinct message choices at every step)
    bound_exhausted: int

    def __iter__(self) -> Iterator[Trace]:
        return iter(self.traces)

    def __len__(self) -> int:
        return len(self.traces)


def explore(scenario: Scenario, observer: Optional[Callable] = None, reduce: bool = True) -> Exploration:
    """All maximal executions up to message reordering, deduplicated by global state.

    The adversary is deterministic given the state, so the only nondeterminism
    is which in-flight message is received next. Identical copies of a message
    count as one choice. Inert receptions (see ``_Engine.inert``) commute with
    every other step and produce no output, so they are taken eagerly instead
    of being branched on; receptions observed by pending triggers are exempt.
    ``reduce=False`` turns this off and branches on every reception.

    ``observer(before, events, after)`` is called once per explored transition
    (including the initial one) with per-server state maps; since every edge of
    the reduced state graph is visited, it sees every reachable transition.
    """
    eng = _Engine(scenario)
    bounds = scenario.bounds
    counts: Dict = {}  # finished state key -> number of maximal paths below it
    traces: List[Trace] = []
    exhausted = 0
    path: List = []

    g0, ev0 = eng.start()
    absorb = eng.absorb if reduce else (lambda g, _: g)
    g0 = absorb(g0, ev0)
    if observer:
        observer(eng.state_map(tuple(initial_state(v) for v in eng.correct)), ev0, eng.state_map(g0.states))
    path.extend(ev0)
    root = eng.key(g0)

    def terminal(g: _Global) -> Optional[str]:
        if not g.flight:
            return QUIESCENT
        if g.steps >= bounds.max_steps or len(g.flight) > bounds.max_in_flight:
            return BOUND_EXHAUSTED
        return None

    def choices(g: _Global):
        return iter(sorted(set(g.flight)))

    # frame: [key, state, choice iterator, path length at entry, accumulated count]
    stack = []
    status = terminal(g0)
    if status:
        traces.append(Trace(tuple(path), status))
        return Exploration(tuple(traces), 1, 1, int(status == BOUND_EXHAUSTED))
    stack.append([root, g0, choices(g0), len(path), 0])
    visiting = {root}

    while stack:
        frame = stack[-1]
        key, g, it, mark, _ = frame
        fid = next(it, None)
        if fid is None:
            stack.pop()
            visiting.discard(key)
            counts[key] = frame[4]
            del path[mark:]
            if stack:
                stack[-1][4] += frame[4]
            continue
        del path[mark:]
        child, ev = eng.step(g, fid)
        child = absorb(child, ev)
        if observer:
            observer(eng.state_map(g.states), ev, eng.state_map(child.states))
        ck = eng.key(child)
        if ck in counts:
            frame[4] += counts[ck]
            continue
        if ck in visiting:
            raise InvariantError("exploration revisited a state on its own path")
        path.extend(ev)
        status = terminal(child)
        if status:
            counts[ck] = 1
            frame[4] += 1
            traces.append(Trace(tuple(path), status))
            exhausted += status == BOUND_EXHAUSTED
            continue
        if len(counts) + len(stack) >= bounds.max_states:
            raise CapacityError(
                f"state budget of {bounds.max_states} exceeded with {len(stack)} states on the frontier",
                len(stack),
            )
        stack.append([ck, child, choices(child), len(path), 0])
        visiting.add(ck)

    return Exploration(tuple(traces), len(counts), counts[root], exhausted)


# -- replay and histories -----------------------------------------------------


def final_states(trace: Trace, scenario: Scenario) -> Dict[Any, ServerState]:
    """Replay a trace's receptions at correct servers and return their final states.

    Checks that every output the handlers produce appears as Send events and
    that deliveries match; raises InvariantError otherwise.
    """
    variant = scenario.protocol
    states = {v: initial_state(v) for v in sort_nodes(scenario.correct)}
    sent: Dict = {}
    pending: List = []
    for e in trace.events:
        if isinstance(e, Send):
            key = (e.src, e.dst, e.msg)
            sent[key] = sent.get(key, 0) + 1
            if pending and pending[0] == key:
                pending.pop(0)
        elif isinstance(e, Receive):
            if pending and e.dst in states:
                raise InvariantError(f"handler output {pending[0]} missing before {e}")
            key = (e.src, e.dst, e.msg)
            if sent.get(key, 0) <= 0:
                raise InvariantError(f"receive without matching send: {e}")
            sent[key] -= 1
            if e.dst in states:
                new, out = handle(states[e.dst], variant, e.msg)
                states[e.dst] = new
                pending = [(m.sender, d, m) for d, m in out.outbound]
                expected = out.delivery
                if expected is not None:
                    pending.append(("deliver", e.dst, expected))
        elif isinstance(e, Deliver):
            if not pending or pending[0] != ("deliver", e.server, e.value):
                raise InvariantError(f"unexpected delivery {e}")
            pending.pop(0)
    if pending:
        raise InvariantError(f"handler output {pending[0]} missing at end of trace")
    return states


@dataclass(frozen=True)
class History:
    first_bcast: FrozenSet  # {(server, value)}
    deliveries: FrozenSet  # {(server, value)}

    def events(self) -> FrozenSet:
        return frozenset({("bcast",) + x for x in self.first_bcast} | {("deliver",) + x for x in self.deliveries})

    def lines(self) -> List[str]:
        rows = sorted(self.events(), key=lambda e: (e[0] != "bcast", value_key(e[1]), value_key(e[2])))
        return ["\t".join(("BCAST-FIRST" if k == "bcast" else "DELIVER", _tok(s), _tok(v))) for k, s, v in rows]

    def text(self) -> str:
        return "\n".join(self.lines()) + ("\n" if self.first_bcast or self.deliveries else "")

    def diff(self, other: "History") -> str:
        a, b = self.events(), other.events()
        out = [f"- {e}" for e in sorted(a - b, key=str)] + [f"+ {e}" for e in sorted(b - a, key=str)]
        return "\n".join(out)


def extract_history(trace: Trace) -> History:
    first: Dict = {}
    delivered = set()
    for e in trace.events:
        if isinstance(e, Receive) and e.msg.kind == BCAST and e.dst not in first:
            first[e.dst] = e.msg.value
        elif isinstance(e, Deliver):
            delivered.add((e.server, e.value))
    return History(frozenset(first.items()), frozenset(delivered))


# -- observational equivalence ------------------------------------------------


class Direction(str, Enum):
    BRACHA_TO_STELLAR_OPEN = "BRACHA_TO_STELLAR_OPEN"
    STELLAR_OPEN_TO_BRACHA = "STELLAR_OPEN_TO_BRACHA"

    @property
    def source(self) -> Variant:
        return Variant.BRACHA if self is Direction.BRACHA_TO_STELLAR_OPEN else Variant.STELLAR_OPEN

    @property
    def target(self) -> Variant:
        return Variant.STELLAR_OPEN if self is Direction.BRACHA_TO_STELLAR_OPEN else Variant.BRACHA


def echo_quorum(states: Dict[Any, ServerState], scenario: Scenario, value) -> Optional[Tuple[Any, FrozenSet]]:
    """First correct server (node order) holding ECHO(value) from a full usable quorum, with that quorum."""
    variant = scenario.protocol
    for v, st in states.items():
        senders = st.echoes(value)
        for q in variant.rules(v).ready_quorums:
            if q <= senders:
                return v, q
    return None


def build_equiv_execution(direction, source_trace: Trace, scenario: Scenario) -> Trace:
    """An execution of the other protocol with the same history as ``source_trace``.

    With a delivered value ``a``: replay the source's first BCAST receptions,
    find the quorum U whose ECHO(a) let a correct server proceed, and have the
    faulty members of U send ECHO(a) to everyone; all other faulty servers stay
    silent. Without deliveries: same routing, all faulty servers silent.
    """
    direction = Direction(direction)
    if scenario.subjective:
        raise PreconditionError("equivalent executions are defined for a shared FBQS only")
    if not scenario.intact:
        raise PreconditionError("equivalent executions need at least one intact server")
    if not source_trace.quiescent:
        raise PreconditionError("source trace is not quiescent")
    source = scenario.with_changes(variant=direction.source)
    history = extract_history(source_trace)
    states = final_states(source_trace, source)

    routed = dict(history.first_bcast)
    if scenario.client.correct and all(routed.get(v) == scenario.client.value for v in scenario.universe):
        client = scenario.client
    else:
        client = ClientSpec(split=tuple((v, routed.get(v)) for v in scenario.universe))

    values = {a for v, a in history.deliveries if v in scenario.correct}
    script: Tuple[Action, ...] = ()
    if len(values) > 1:
        raise InvariantError(f"source trace delivers conflicting values {sorted(values, key=value_key)}")
    if values:
        (a,) = values
        found = echo_quorum(states, source, a)
        if found is None:
            raise EquivalenceError(f"no correct server holds ECHO({a}) from a quorum", "")
        _, quorum = found
        script = tuple(
            Action(f, "send", ECHO, a, scenario.universe, Trigger()) for f in sort_nodes(quorum & scenario.faulty)
        )

    target = scenario.with_changes(
        variant=direction.target,
        client=client,
        adversary=script,
        scheduler=SchedulerPolicy("fifo"),
    )
    trace = run(target)
    got = extract_history(trace)
    if got != history or not trace.quiescent:
        raise EquivalenceError(f"{direction.value}: histories differ", history.diff(got))
    return trace


__all__ = [
    "BOUND_EXHAUSTED",
    "Deliver",
    "Direction",
    "Exploration",
    "History",
    "QUIESCENT",
    "Receive",
    "Send",
    "Trace",
    "build_equiv_execution",
    "echo_quorum",
    "explore",
    "extract_history",
    "final_states",
    "parse_trace",
    "run",
    "serialize_trace",
]
