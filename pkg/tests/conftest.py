import json
import sys
from importlib import resources

import pytest
from hypothesis import HealthCheck, settings

from fedbroadcast.scenario import parse_scenario

settings.register_profile(
    "pinned",
    max_examples=200,
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)
settings.load_profile("pinned")

EX6 = {1: [[1, 2, 3], [1, 2, 4], [1, 3, 4]], 2: [[1, 2, 3], [1, 2, 4], [2, 3, 4]],
       3: [[1, 2, 3], [1, 3, 4], [2, 3, 4]], 4: [[1, 2, 4], [1, 3, 4], [2, 3, 4]]}
EX7 = {1: [[1, 2], [1, 4]], 2: [[1, 2]], 3: [[1, 3]], 4: [[3, 4]]}


def fixture_text(name):
    return (resources.files("fedbroadcast") / "scenarios" / f"{name}.json").read_text()


def fixture_doc(name):
    return json.loads(fixture_text(name))


@pytest.fixture
def load():
    return lambda name: parse_scenario(fixture_text(name))


def pytest_terminal_summary(terminalreporter):
    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
