"""Reliable Byzantine broadcast over classical and federated quorum systems.

Quorum structures (``quorum_core``, ``subjective``), the echo/ready protocol
family (``protocols``), a deterministic simulator with exhaustive schedule
exploration (``sim``), specification checks (``checker``) and a command line
front end (``cli``).
"""

from .errors import (
    CapacityError,
    ConfigError,
    DomainError,
    EquivalenceError,
    FedBroadcastError,
    InvariantError,
    PreconditionError,
    ScenarioParseError,
)
from .protocols import ProtocolVariant, Variant
from .quorum_core import (
    Dqs,
    FailProneSystem,
    FailureScenario,
    Fbqs,
    QuorumSystem,
    check_dqs,
    enumerate_quorums,
    has_quorum_intersection,
    induced_dqs,
    intact_set,
    minimal_quorums,
)
from .scenario import Scenario, parse_scenario, serialize_scenario
from .sim import Trace, build_equiv_execution, explore, extract_history, run
from .checker import Spec, check_exploration, check_invariants, check_trace
from .subjective import SubjectiveDqs, SubjectiveFbqs, induced_subjective_dqs, subjective_intact_set

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ConfigError",
    "DomainError",
    "EquivalenceError",
    "FedBroadcastError",
    "InvariantError",
    "PreconditionError",
    "ScenarioParseError",
    "ProtocolVariant",
    "Variant",
    "Dqs",
    "FailProneSystem",
    "FailureScenario",
    "Fbqs",
    "QuorumSystem",
    "check_dqs",
    "enumerate_quorums",
    "has_quorum_intersection",
    "induced_dqs",
    "intact_set",
    "minimal_quorums",
    "Scenario",
    "parse_scenario",
    "serialize_scenario",
    "Trace",
    "build_equiv_execution",
    "explore",
    "extract_history",
    "run",
    "Spec",
    "check_exploration",
    "check_invariants",
    "check_trace",
    "SubjectiveDqs",
    "SubjectiveFbqs",
    "induced_subjective_dqs",
    "subjective_intact_set",
]
