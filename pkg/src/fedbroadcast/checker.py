"""Broadcast specification and trace-invariant checks.

Liveness ("eventually") is read as "by quiescence": validity and totality are
only judged on quiescent traces. Safety properties are judged on every trace.
"""

from enum import Enum
from typing import Any, Dict, Iterable, Optional, Tuple

from .nodes import sort_nodes, value_key
from .protocols import STELLAR_FAMILY, ServerState, handle, initial_state
from .report import NA, PASS, PropertyReport, Report, Verdict, verdict
from .scenario import Scenario
from .sim import Deliver, Exploration, Receive, Trace, explore

SAFETY = ("no_duplication", "integrity", "consistency")
LIVENESS = ("validity", "totality", "validity_intact", "totality_intact")
PROPERTIES = ("validity", "no_duplication", "integrity", "consistency", "totality", "validity_intact", "totality_intact")


class Spec(str, Enum):
    RELIABLE = "reliable"
    WEAKLY_RELIABLE = "weakly-reliable"

    @property
    def required(self) -> Tuple[str, ...]:
        if self is Spec.RELIABLE:
            return ("validity", "no_duplication", "integrity", "consistency", "totality")
        return ("validity_intact", "no_duplication", "integrity", "consistency", "totality_intact")


def _missing(servers, got) -> Tuple:
    return tuple(v for v in sort_nodes(servers) if v not in got)


def check_trace(trace: Trace, scenario: Scenario, intact=None) -> PropertyReport:
    intact = scenario.intact if intact is None else frozenset(intact)
    correct = scenario.correct
    client = scenario.client
    dels = [e for e in trace.events if isinstance(e, Deliver) and e.server in correct]
    out = []

    per_server: Dict[Any, list] = {}
    for e in dels:
        per_server.setdefault(e.server, []).append(e)
    dup = next((tuple(es) for v, es in sorted(per_server.items(), key=lambda kv: value_key(kv[0])) if len(es) > 1), None)

    if client.correct:
        bad = next((e for e in dels if e.value != client.value), None)
        integrity = verdict("integrity", bad is None, bad)
    else:
        integrity = Verdict("integrity", PASS, note="faulty client")

    first = {}
    for e in dels:
        first.setdefault(e.value, e)
    conflict = None
    if len(first) > 1:
        a, b = sorted(first.values(), key=lambda e: trace.events.index(e))[:2]
        conflict = (a, b)

    delivered = {e.server for e in dels}
    liveness = {}
    if trace.quiescent:
        if client.correct:
            got = {e.server for e in dels if e.value == client.value}
            liveness["validity"] = verdict("validity", correct <= got, _missing(correct, got))
            liveness["validity_intact"] = verdict("validity_intact", intact <= got, _missing(intact, got))
        else:
            liveness["validity"] = Verdict("validity", NA, note="faulty client")
            liveness["validity_intact"] = Verdict("validity_intact", NA, note="faulty client")
        any_delivered = bool(delivered)
        liveness["totality"] = verdict("totality", not any_delivered or correct <= delivered, _missing(correct, delivered))
        liveness["totality_intact"] = verdict(
            "totality_intact", not any_delivered or intact <= delivered, _missing(intact, delivered)
        )
    else:
        for name in LIVENESS:
            liveness[name] = Verdict(name, NA, note=trace.status)

    safety = {
        "no_duplication": verdict("no_duplication", dup is None, dup),
        "integrity": integrity,
        "consistency": verdict("consistency", conflict is None, conflict),
    }
    both = {**safety, **liveness}
    out = tuple(both[name] for name in PROPERTIES)
    context = {"status": trace.status, "intact": intact, **scenario.hypotheses()}
    return Report("broadcast properties", out, context)


class InvariantMonitor:
    """Transition-level invariants of the echo/ready protocols.

    (a) all relevant servers that sent READY sent it for the same value;
    (b) the first relevant server to send READY(a) held ECHO(a) from a full usable quorum;
    (c) whenever a correct server delivers a, some relevant server holds ECHO(a) from a usable quorum.

    Relevant servers are the correct ones for the classical variants and the
    intact ones for the federated variants. Verdicts are only required when
    the corresponding hypothesis holds.
    """

    NAMES = ("ready_unique", "first_ready_causality", "delivery_causality")

    def __init__(self, scenario: Scenario, intact=None):
        self.scenario = scenario
        self.intact = scenario.intact if intact is None else frozenset(intact)
        federated = scenario.variant in STELLAR_FAMILY
        self.relevant = sort_nodes(self.intact if federated else scenario.correct)
        hyp = scenario.hypotheses()
        self.hypothesis = hyp["intact_exists"] if federated else hyp.get("fail_prone_covers_bad", False)
        self.hypothesis_name = "intact_exists" if federated else "fail_prone_covers_bad"
        self.quorums = {v: scenario.protocol.rules(v).ready_quorums for v in sort_nodes(scenario.correct)}
        self.witness: Dict[str, Any] = {n: None for n in self.NAMES}
        self.transitions = 0

    def _echo_quorum(self, st: ServerState, value) -> bool:
        senders = st.echoes(value)
        return any(q <= senders for q in self.quorums[st.me])

    def __call__(self, before: Dict, events, after: Dict):
        self.transitions += 1
        w = self.witness
        if w["ready_unique"] is None:
            ready = [(v, after[v].ready_value) for v in self.relevant if after[v].ready]
            if len({a for _, a in ready}) > 1:
                w["ready_unique"] = tuple(ready)
        for v in self.relevant:
            if after[v].ready and not before[v].ready and w["first_ready_causality"] is None:
                a = after[v].ready_value
                first = not any(before[u].ready and before[u].ready_value == a for u in self.relevant)
                if first and not self._echo_quorum(after[v], a):
                    w["first_ready_causality"] = (v, a)
        for v, st in after.items():
            if st.delivered and not before[v].delivered and w["delivery_causality"] is None:
                a = st.delivered_value
                if not any(self._echo_quorum(after[u], a) for u in self.relevant):
                    w["delivery_causality"] = (v, a)

    def report(self) -> Report:
        note = "" if self.hypothesis else f"{self.hypothesis_name} fails: not asserted"
        verdicts = tuple(
            verdict(n, self.witness[n] is None, self.witness[n], required=self.hypothesis, note=note)
            for n in self.NAMES
        )
        ctx = {"relevant": frozenset(self.relevant), self.hypothesis_name: self.hypothesis, "transitions": self.transitions}
        return Report("trace invariants", verdicts, ctx)


def replay(trace: Trace, scenario: Scenario, observer):
    """Feed ``observer(before, events, after)`` one call per reception at a correct server."""
    variant = scenario.protocol
    states = {v: initial_state(v) for v in sort_nodes(scenario.correct)}
    for e in trace.events:
        if isinstance(e, Receive) and e.dst in states:
            before = dict(states)
            states[e.dst], _ = handle(states[e.dst], variant, e.msg)
            observer(before, (e,), dict(states))
    return states


def check_invariants(trace: Trace, scenario: Scenario, intact=None) -> Report:
    monitor = InvariantMonitor(scenario, intact)
    replay(trace, scenario, monitor)
    return monitor.report()


def check_exploration(
    traces: Iterable[Trace],
    scenario: Scenario,
    spec,
    intact=None,
    monitor: Optional[InvariantMonitor] = None,
) -> PropertyReport:
    """A broadcast spec holds iff every quiescent trace passes its liveness properties and every trace passes safety."""
    spec = Spec(spec)
    traces = tuple(traces)
    reports = [check_trace(t, scenario, intact) for t in traces]
    verdicts = []
    for name in spec.required:
        failing = [r[name] for r in reports if r[name].failed]
        if failing:
            worst = max(failing, key=lambda v: len(v.witness) if isinstance(v.witness, tuple) else 1)
            verdicts.append(Verdict(name, worst.status, worst.witness, note=f"{len(failing)} of {len(traces)} traces"))
        elif reports and all(r[name].status == NA for r in reports):
            verdicts.append(Verdict(name, NA, note=reports[0][name].note))
        else:
            verdicts.append(Verdict(name, PASS))
    if monitor is not None:
        verdicts.extend(monitor.report().verdicts)
    quiescent = sum(t.quiescent for t in traces)
    ctx = {
        "spec": spec.value,
        "traces": len(traces),
        "quiescent": quiescent,
        "bound_exhausted": len(traces) - quiescent,
        "intact": scenario.intact if intact is None else frozenset(intact),
        **scenario.hypotheses(),
    }
    return Report(f"exploration against {spec.value} broadcast", tuple(verdicts), ctx)


def explore_and_check(scenario: Scenario, spec, intact=None) -> Tuple[Exploration, Report]:
    """Exhaustive exploration with the transition invariants monitored on every reachable edge."""
    monitor = InvariantMonitor(scenario, intact)
    ex = explore(scenario, observer=monitor)
    report = check_exploration(ex.traces, scenario, spec, intact, monitor)
    report.context.update(states=ex.states, schedules=ex.paths)
    return ex, report


__all__ = [
    "LIVENESS",
    "InvariantMonitor",
    "PROPERTIES",
    "SAFETY",
    "Spec",
    "check_exploration",
    "check_invariants",
    "check_trace",
    "explore_and_check",
    "replay",
]
