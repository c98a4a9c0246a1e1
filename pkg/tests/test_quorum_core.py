import pytest
from hypothesis import given, strategies as st

from fedbroadcast.errors import CapacityError, DomainError, PreconditionError
from fedbroadcast.quorum_core import (
    Dqs,
    FailProneSystem,
    FailureScenario,
    Fbqs,
    QuorumSystem,
    cardinality_dqs,
    check_dqs,
    disjoint_quorums,
    enumerate_quorums,
    has_quorum_intersection,
    induced_dqs,
    induced_fail_prone,
    intact_candidates,
    intact_set,
    is_intact_candidate,
    is_quorum,
    is_v_blocking,
    minimal_quorums,
    project,
    threshold_fbqs,
)

import oracles
from conftest import EX6, EX7

F = frozenset


def fs(*sets):
    return {F(s) for s in sets}


@pytest.fixture
def ex7():
    return Fbqs.from_lists(EX7)


@pytest.fixture
def ex6():
    return Fbqs.from_lists(EX6)


def test_two_slice_fbqs_quorums(ex7):
    assert set(enumerate_quorums(ex7).quorums) == fs({1, 2}, {1, 2, 3}, {1, 3, 4}, {1, 2, 3, 4})
    assert set(minimal_quorums(ex7)) == fs({1, 2}, {1, 3, 4})


def test_threshold_fbqs_quorums_are_three_sets_and_up(ex6):
    assert ex6 == threshold_fbqs([1, 2, 3, 4], 3)
    expected = {F(s) for s in oracles.subsets([1, 2, 3, 4]) if len(s) >= 3}
    assert set(enumerate_quorums(ex6).quorums) == expected


def test_is_quorum_examples(ex7):
    assert is_quorum(ex7, {1, 2})
    assert not is_quorum(ex7, {1, 4})  # 4 needs 3
    assert not is_quorum(ex7, set())


def test_fbqs_rejects_slice_without_owner():
    with pytest.raises(DomainError, match="must contain its owner"):
        Fbqs.from_lists({1: [[1]], 4: [[3]], 3: [[3]]})


def test_fbqs_rejects_missing_or_empty_slices():
    with pytest.raises(DomainError):
        Fbqs.from_lists({1: []})
    with pytest.raises(DomainError):
        Fbqs(F({1, 2}), {1: [F({1})]})


def test_unknown_node_is_a_domain_error(ex7):
    with pytest.raises(DomainError):
        is_quorum(ex7, {9})


def test_projection_examples(ex7):
    p = project(ex7, {1, 2})
    assert p.slices == {1: F({F({1}), F({1, 2})}), 2: F({F({1, 2})})}
    assert project(ex7, {4}).slices == {4: F({F({4})})}
    with pytest.raises(DomainError):
        project(ex7, set())


def test_intact_examples(ex7, ex6):
    assert intact_set(ex7, FailureScenario(ex7.universe, {3})) == F({1, 2})
    assert intact_set(ex7, FailureScenario(ex7.universe, set())) == F({1, 2, 3, 4})
    assert intact_set(ex6, FailureScenario(ex6.universe, {3})) == F({1, 2, 4})
    # two failures in 3-of-4 leave nobody intact
    assert intact_set(ex6, FailureScenario(ex6.universe, {3, 4})) == F()


def test_intact_requires_quorum_intersection():
    split = Fbqs.from_lists({1: [[1]], 2: [[2]]})
    assert disjoint_quorums(split) == (F({1}), F({2}))
    with pytest.raises(PreconditionError):
        intact_set(split, FailureScenario(split.universe, set()))


def test_induced_fail_prone_examples(ex7, ex6):
    assert set(induced_fail_prone(ex7).fail_sets) == fs({2}, {3, 4})
    assert set(induced_fail_prone(ex6).fail_sets) == fs({1}, {2}, {3}, {4})
    assert induced_dqs(ex6) == cardinality_dqs([1, 2, 3, 4], 1)
    single = Fbqs.from_lists({1: [[1]]})
    assert set(induced_fail_prone(single).fail_sets) == {F()}
    assert set(enumerate_quorums(single).quorums) == {F({1})}


def test_check_dqs_reports_consistency_witness():
    # the two-slice quorums with a fail-prone set that swallows {1}
    dqs = Dqs.of([{1, 2}, {1, 2, 3}, {1, 3, 4}, {1, 2, 3, 4}], [{1}])
    report = check_dqs(dqs)
    assert not report.passed
    assert report["d_consistency"].witness == (F({1, 2}), F({1, 3, 4}), F({1}))
    assert report["d_availability"].witness == F({1})  # every quorum contains 1


def test_check_dqs_reports_availability_and_antichain():
    dqs = Dqs.of([{1, 2}], [{1}, {1, 2}])
    report = check_dqs(dqs)
    assert report["fail_prone_antichain"].failed
    assert report["d_availability"].failed


def test_check_dqs_with_scenario_reports_coverage(ex7):
    dqs = induced_dqs(ex7)
    assert check_dqs(dqs, FailureScenario(ex7.universe, {3}))["fail_prone_covers_bad"].status == "pass"
    r = check_dqs(dqs, FailureScenario(ex7.universe, {2, 3}))
    assert r["fail_prone_covers_bad"].failed
    assert r.passed  # coverage is informational


def test_quorum_system_violations():
    assert QuorumSystem([F({1}), F({2})]).violations()[0] == "intersection"
    assert FailProneSystem([F({1}), F({1, 2})]).violations() is not None


def test_v_blocking(ex7):
    assert is_v_blocking(ex7, 1, {2, 4})
    assert not is_v_blocking(ex7, 1, {2})
    assert is_v_blocking(ex7, 4, {3})


def test_capacity_cap_is_enforced():
    big = threshold_fbqs(range(1, 19), 10)
    with pytest.raises(CapacityError) as err:
        enumerate_quorums(big)
    assert err.value.size == 18


def test_is_intact_candidate(ex7):
    assert is_intact_candidate(ex7, {1, 2})
    assert is_intact_candidate(ex7, set())
    assert not is_intact_candidate(ex7, {1, 2, 4})


@given(oracles.any_slice_maps(max_nodes=6))
def test_quorums_match_brute_force(slices):
    fbqs = Fbqs.from_lists(slices)
    assert set(enumerate_quorums(fbqs).quorums) == oracles.quorums(slices)
    assert set(minimal_quorums(fbqs)) == oracles.minimal(oracles.quorums(slices))
    assert has_quorum_intersection(fbqs) == oracles.has_qi(slices)


@given(oracles.with_faulty(oracles.intersecting_slice_maps(max_nodes=5)))
def test_intact_matches_brute_force(case):
    slices, bad = case
    fbqs = Fbqs.from_lists(slices)
    assert intact_set(fbqs, FailureScenario(fbqs.universe, bad)) == oracles.intact(slices, bad)


@given(oracles.intersecting_slice_maps(max_nodes=5))
def test_induced_fail_prone_matches_every_failure_set(slices):
    fbqs = Fbqs.from_lists(slices)
    assert set(induced_fail_prone(fbqs).fail_sets) == oracles.fail_prone(slices)


@given(oracles.intersecting_slice_maps(max_nodes=5))
def test_intact_candidates_match_brute_force(slices):
    fbqs = Fbqs.from_lists(slices)
    assert set(intact_candidates(fbqs)) == {c for c in oracles.candidates(slices, ()) if c}


@given(oracles.slice_maps(max_nodes=6), st.data())
def test_v_blocking_matches_definition(slices, data):
    fbqs = Fbqs.from_lists(slices)
    v = data.draw(st.sampled_from(sorted(slices)))
    b = data.draw(st.sets(st.sampled_from(sorted(slices))))
    assert is_v_blocking(fbqs, v, b) == oracles.blocking(slices, v, b)


@given(oracles.any_slice_maps(max_nodes=6), st.data())
def test_projection_matches_definition(slices, data):
    fbqs = Fbqs.from_lists(slices)
    i = data.draw(st.sets(st.sampled_from(sorted(slices)), min_size=1))
    p = project(fbqs, i)
    expected = oracles.project(slices, i)
    assert p.universe == F(i)
    assert {v: set(qs) for v, qs in p.slices.items()} == {v: set(qs) for v, qs in expected.items()}


def test_check_dqs_agrees_with_brute_force_on_cardinality_systems():
    for n in range(1, 7):
        for f in range(0, n):
            dqs = cardinality_dqs(range(1, n + 1), f)
            ok = oracles.dqs_ok(dqs.quorum_system.quorums, dqs.fail_prone.fail_sets)
            assert check_dqs(dqs).passed == ok, (n, f)
            if n == 3 * f + 1:
                assert ok, (n, f)
