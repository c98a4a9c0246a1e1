"""Explore every shipped fixture under both broadcast specs and print a summary table.

    python scripts/run_explorations.py
    python scripts/run_explorations.py --only example14 example19 --csv out.csv
"""

import argparse
import csv
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import List, Optional

from fedbroadcast.checker import Spec, explore_and_check
from fedbroadcast.cli import fixture_names, load_scenario


@dataclass
class Config:
    only: List[str] = field(default_factory=list)
    specs: List[str] = field(default_factory=lambda: [s.value for s in Spec])
    csv: Optional[str] = None


@dataclass
class Row:
    scenario: str
    variant: str
    spec: str
    verdict: str
    failing: str
    traces: int
    states: int
    schedules: int
    seconds: float


def explore_one(name: str, spec: str) -> Row:
    s = load_scenario(name)
    t0 = time.perf_counter()
    ex, report = explore_and_check(s, spec)
    failing = [v.name for v in report.verdicts if v.failed and v.required]
    return Row(
        scenario=name,
        variant=s.variant.value,
        spec=spec,
        verdict="pass" if report.passed else "fail",
        failing=",".join(failing) or "-",
        traces=len(ex),
        states=ex.states,
        schedules=ex.paths,
        seconds=round(time.perf_counter() - t0, 2),
    )


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--only", nargs="*", default=[])
    p.add_argument("--spec", dest="specs", nargs="*", choices=[s.value for s in Spec])
    p.add_argument("--csv")
    args = p.parse_args(argv)
    cfg = Config(only=args.only, csv=args.csv, **({"specs": args.specs} if args.specs else {}))

    rows = [explore_one(n, spec) for n in (cfg.only or fixture_names()) for spec in cfg.specs]
    header = list(asdict(rows[0])) if rows else []
    widths = {h: max(len(h), *(len(str(getattr(r, h))) for r in rows)) for h in header}
    print("  ".join(h.ljust(widths[h]) for h in header))
    for r in rows:
        print("  ".join(str(getattr(r, h)).ljust(widths[h]) for h in header))
    if cfg.csv:
        with open(cfg.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=header)
            w.writeheader()
            w.writerows(asdict(r) for r in rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
