"""Command line: analyze structures, simulate, explore, and build equivalent executions.

Scenarios are given as a path to a JSON file or as the name of a shipped
fixture (``fedbroadcast list`` shows them). Exit status: 0 when every requested
check passes, 1 when a check fails, 2 on usage, parse or configuration errors.
"""

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path
from typing import List, Optional, Sequence

from .checker import Spec, check_invariants, check_trace, explore_and_check
from .errors import CapacityError, EquivalenceError, FedBroadcastError
from .nodes import fmt_family, fmt_set
from .quorum_core import (
    check_dqs,
    disjoint_quorums,
    enumerate_quorums,
    induced_dqs,
    intact_set,
)
from .report import Report, verdict
from .scenario import Scenario, SchedulerPolicy, parse_scenario
from .sim import Direction, build_equiv_execution, extract_history, run
from .subjective import (
    check_subjective_dqs,
    induced_subjective_dqs,
    subjective_intact_set,
    subjective_quorum_intersection,
    validate_agreement,
)

OK, FAILED, USAGE = 0, 1, 2


def fixture_names() -> List[str]:
    root = resources.files("fedbroadcast") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario(ref: str) -> Scenario:
    path = Path(ref)
    if path.is_file():
        text = path.read_text()
    else:
        res = resources.files("fedbroadcast") / "scenarios" / f"{ref}.json"
        if not res.is_file():
            raise FedBroadcastError(f"no scenario file or fixture named {ref!r} (try: fedbroadcast list)")
        text = res.read_text()
    return parse_scenario(text)


class Output:
    """Collects sections; ``text`` adds headers, ``lines`` prefixes each line with its section."""

    def __init__(self, fmt: str):
        self.fmt = fmt
        self.chunks: List[str] = []

    def section(self, name: str, lines: Sequence[str]):
        if self.fmt == "lines":
            self.chunks.extend(f"{name}\t{line}" for line in lines)
        else:
            self.chunks.append(f"== {name} ==")
            self.chunks.extend(lines)
            self.chunks.append("")

    def report(self, name: str, report: Report):
        self.section(name, report.lines())

    def text(self) -> str:
        return "\n".join(self.chunks).rstrip("\n") + "\n"


# -- analyze ------------------------------------------------------------------


def _analyze_objective(s: Scenario, out: Output) -> bool:
    fbqs = s.structure
    qs = enumerate_quorums(fbqs)
    out.section("quorums", [f"minimal\t{fmt_family(qs.minimal())}", f"all\t{fmt_family(qs.quorums)}"])
    witness = disjoint_quorums(fbqs)
    qi = Report("quorum intersection", (verdict("quorum_intersection", witness is None, witness),))
    out.report("quorum-intersection", qi)
    if witness is not None:
        return False
    intact = intact_set(fbqs, s.failure)
    out.section(
        "intact",
        [f"faulty\t{fmt_set(s.faulty)}", f"intact\t{fmt_set(intact)}", f"befouled\t{fmt_set(frozenset(s.universe) - intact)}"],
    )
    dqs = induced_dqs(fbqs)
    out.section("induced-dqs", [f"fail-prone\t{fmt_family(dqs.fail_prone.fail_sets)}"])
    report = check_dqs(dqs, s.failure)
    out.report("dqs-axioms", report)
    return report.passed


def _analyze_subjective(s: Scenario, out: Output) -> bool:
    sf = s.structure
    agreement = validate_agreement(sf)
    out.report("view-agreement", agreement)
    lines = []
    for v, view in sf.views.items():
        qs = enumerate_quorums(view)
        lines.append(f"view {v}\tminimal\t{fmt_family(qs.minimal())}")
        lines.append(f"view {v}\tall\t{fmt_family(qs.quorums)}")
    out.section("quorums", lines)
    qi = subjective_quorum_intersection(sf)
    out.report("quorum-intersection", Report("quorum intersection", (verdict("quorum_intersection", qi),)))
    if not qi:
        return False
    intact = subjective_intact_set(sf)
    out.section(
        "intact",
        [f"faulty\t{fmt_set(s.faulty)}", f"intact\t{fmt_set(intact)}", f"befouled\t{fmt_set(frozenset(s.universe) - intact)}"],
    )
    if not intact:
        out.section("induced-dqs", ["undefined: no intact server"])
        return agreement.passed
    sdqs = induced_subjective_dqs(sf)
    out.section(
        "induced-dqs",
        [f"view {v}\tfail-prone\t{fmt_family(fp.fail_sets)}" for v, fp in sdqs.per_view_fail_prone.items()],
    )
    report = check_subjective_dqs(sdqs)
    out.report("dqs-axioms", report)
    return agreement.passed and report.passed


def cmd_analyze(args) -> int:
    s = load_scenario(args.scenario)
    out = Output(args.format)
    out.section("scenario", [f"name\t{s.name or args.scenario}", f"universe\t{fmt_set(frozenset(s.universe))}"])
    ok = _analyze_subjective(s, out) if s.subjective else _analyze_objective(s, out)
    sys.stdout.write(out.text())
    return OK if ok else FAILED


# -- simulate -----------------------------------------------------------------


def _with_seed(s: Scenario, seed: Optional[int]) -> Scenario:
    if seed is None:
        return s
    return s.with_changes(scheduler=SchedulerPolicy("random", seed))


def cmd_simulate(args) -> int:
    s = _with_seed(load_scenario(args.scenario), args.seed)
    trace = run(s)
    out = Output(args.format)
    if args.out:
        Path(args.out).write_text(trace.text())
    else:
        out.section("trace", trace.lines())
    out.section("history", extract_history(trace).lines())
    props = check_trace(trace, s)
    invariants = check_invariants(trace, s)
    out.report("properties", props)
    out.report("invariants", invariants)
    ok = invariants.passed
    if args.spec:
        spec = Spec(args.spec)
        ok = ok and not any(props[name].failed for name in spec.required)
        out.section("verdict", [f"{spec.value}\t{'pass' if ok else 'fail'}"])
    sys.stdout.write(out.text())
    return OK if ok else FAILED


# -- explore ------------------------------------------------------------------


def _explore_one(ref: str, spec: str, fmt: str):
    s = load_scenario(ref)
    s = s.with_changes(scheduler=SchedulerPolicy("exhaustive", s.scheduler.seed))
    try:
        ex, report = explore_and_check(s, spec)
    except CapacityError as e:
        return FAILED, f"{ref}: {e}\n", True
    out = Output(fmt)
    out.section("exploration", [f"scenario\t{s.name or ref}", f"traces\t{len(ex)}", f"states\t{ex.states}", f"schedules\t{ex.paths}"])
    out.section("outcomes", [
        "\t".join(f"{v}:{a}" for v, a in sorted(t.delivered().items(), key=lambda kv: str(kv[0]))) or "-"
        for t in ex
    ])
    out.report("verdicts", report)
    return (OK if report.passed else FAILED), out.text(), False


def cmd_explore(args) -> int:
    spec = Spec(args.spec).value
    refs = args.scenario
    if args.jobs > 1 and len(refs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_explore_one, refs, [spec] * len(refs), [args.format] * len(refs)))
    else:
        results = [_explore_one(r, spec, args.format) for r in refs]
    status = OK
    for code, text, capacity in results:
        (sys.stderr if capacity else sys.stdout).write(text)
        if capacity:
            status = USAGE if status == OK else status
        elif code != OK:
            status = FAILED
    return status


# -- equiv --------------------------------------------------------------------


def cmd_equiv(args) -> int:
    s = _with_seed(load_scenario(args.scenario), args.seed)
    directions = list(Direction) if args.direction == "both" else [Direction(args.direction)]
    out = Output(args.format)
    ok = True
    for d in directions:
        source = run(s.with_changes(variant=d.source))
        try:
            target = build_equiv_execution(d, source, s)
        except EquivalenceError as e:
            out.section(f"{d.value}", [f"MISMATCH\t{e}", *(e.diff or "").splitlines()])
            ok = False
            continue
        h = extract_history(source)
        out.section(f"{d.value} source ({d.source.value})", source.lines())
        out.section(f"{d.value} target ({d.target.value})", target.lines())
        out.section(f"{d.value} history", h.lines() or ["(empty)"])
        out.section(f"{d.value} verdict", ["history_equal\tpass"])
    sys.stdout.write(out.text())
    return OK if ok else FAILED


def cmd_list(args) -> int:
    for name in fixture_names():
        s = load_scenario(name)
        print(f"{name}\t{s.variant.value}\t{s.description}")
    return OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fedbroadcast", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, many=False):
        sp.add_argument("scenario", nargs="+" if many else None, help="scenario file or fixture name")
        sp.add_argument("--format", choices=("text", "lines"), default="text")

    a = sub.add_parser("analyze", help="quorums, intact set, induced DQS and axiom checks")
    common(a)
    a.set_defaults(func=cmd_analyze)

    sm = sub.add_parser("simulate", help="one run with trace, history and property reports")
    common(sm)
    sm.add_argument("--seed", type=int, help="use the random scheduler with this seed")
    sm.add_argument("--out", help="write the trace here instead of stdout")
    sm.add_argument("--spec", choices=[x.value for x in Spec])
    sm.set_defaults(func=cmd_simulate)

    ex = sub.add_parser("explore", help="all schedules, checked against a broadcast spec")
    common(ex, many=True)
    ex.add_argument("--spec", choices=[x.value for x in Spec], default=Spec.RELIABLE.value)
    ex.add_argument("--jobs", type=int, default=1, help="explore several scenarios in parallel")
    ex.set_defaults(func=cmd_explore)

    eq = sub.add_parser("equiv", help="equal-history executions of the classical and open federated protocols")
    common(eq)
    eq.add_argument("--direction", choices=["both"] + [d.value for d in Direction], default="both")
    eq.add_argument("--seed", type=int, help="random scheduler seed for the source run")
    eq.set_defaults(func=cmd_equiv)

    ls = sub.add_parser("list", help="shipped scenario fixtures")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CapacityError as e:
        print(f"error: {e} (size {e.size})", file=sys.stderr)
        return USAGE
    except FedBroadcastError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
