"""Verdict reports shared by the axiom checks and the broadcast property checker.

A report serializes to one line per verdict: ``name<TAB>verdict<TAB>witness``.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from .nodes import fmt_family, fmt_node, fmt_set

PASS = "pass"
FAIL = "fail"
NA = "n/a"


def fmt_witness(w) -> str:
    if w is None:
        return "-"
    if isinstance(w, (frozenset, set)):
        if all(isinstance(x, frozenset) for x in w) and w:
            return fmt_family(w)
        return fmt_set(w)
    if isinstance(w, (tuple, list)):
        return "(" + ", ".join(fmt_witness(x) for x in w) + ")"
    if isinstance(w, dict):
        return "{" + ", ".join(f"{fmt_witness(k)}: {fmt_witness(v)}" for k, v in w.items()) + "}"
    if isinstance(w, (int, str)):
        return fmt_node(w)
    return str(w)


@dataclass(frozen=True)
class Verdict:
    name: str
    status: str
    witness: Any = None
    required: bool = True
    note: str = ""

    @property
    def failed(self) -> bool:
        return self.status == FAIL

    def line(self) -> str:
        parts = [self.name, self.status, fmt_witness(self.witness)]
        if self.note:
            parts.append(self.note)
        return "\t".join(parts)


@dataclass(frozen=True)
class Report:
    title: str
    verdicts: Tuple[Verdict, ...]
    context: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not any(v.failed for v in self.verdicts if v.required)

    def __getitem__(self, name: str) -> Verdict:
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)

    def __contains__(self, name) -> bool:
        return any(v.name == name for v in self.verdicts)

    def status(self, name: str) -> str:
        return self[name].status

    def lines(self) -> List[str]:
        out = [f"# {self.title}"]
        for k, v in self.context.items():
            out.append(f"@{k}\t{fmt_witness(v)}")
        out.extend(v.line() for v in self.verdicts)
        return out

    def text(self) -> str:
        return "\n".join(self.lines())


# Both names appear in the public API; they share one representation.
AxiomReport = Report
PropertyReport = Report


def verdict(name: str, ok: bool, witness: Optional[Any] = None, **kw) -> Verdict:
    return Verdict(name, PASS if ok else FAIL, None if ok else witness, **kw)
