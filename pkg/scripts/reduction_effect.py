"""Compare exploration with and without eager inert receptions.

Both modes must reach the same set of terminal delivery outcomes; the table
shows how many states and maximal schedules each one walks.
"""

import argparse
import sys
import time
from dataclasses import dataclass

from fedbroadcast.cli import load_scenario
from fedbroadcast.errors import CapacityError
from fedbroadcast.scenario import Bounds
from fedbroadcast.sim import explore

DEFAULT = ["single-node", "example7-silent", "example7-split", "example5", "example14"]


@dataclass
class Config:
    scenarios: tuple = tuple(DEFAULT)
    max_states: int = 300_000


def outcomes(ex):
    return {tuple(sorted(t.delivered().items(), key=str)) for t in ex}


def measure(name, reduce, max_states):
    s = load_scenario(name)
    s = s.with_changes(bounds=Bounds(s.bounds.max_steps, s.bounds.max_in_flight, max_states))
    t0 = time.perf_counter()
    try:
        ex = explore(s, reduce=reduce)
    except CapacityError:
        return None, f">{max_states}", "-", time.perf_counter() - t0
    return outcomes(ex), ex.states, ex.paths, time.perf_counter() - t0


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("scenarios", nargs="*", default=DEFAULT)
    p.add_argument("--max-states", type=int, default=Config.max_states)
    args = p.parse_args(argv)
    cfg = Config(tuple(args.scenarios), args.max_states)

    print(f"{'scenario':18} {'mode':8} {'states':>9} {'schedules':>14} {'secs':>6}  outcomes")
    status = 0
    for name in cfg.scenarios:
        seen = []
        for reduce in (True, False):
            out, states, paths, secs = measure(name, reduce, cfg.max_states)
            mode = "reduced" if reduce else "full"
            shown = "-" if out is None else sorted(out)
            print(f"{name:18} {mode:8} {states!s:>9} {paths!s:>14} {secs:6.2f}  {shown}")
            if out is not None:
                seen.append(out)
        if len(seen) == 2 and seen[0] != seen[1]:
            print(f"  outcome sets differ for {name}")
            status = 1
    return status


if __name__ == "__main__":
    sys.exit(main())
