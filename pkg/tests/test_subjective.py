import pytest
from hypothesis import assume, given

from fedbroadcast.errors import DomainError, PreconditionError
from fedbroadcast.quorum_core import (
    FailProneSystem,
    Fbqs,
    enumerate_quorums,
    induced_dqs,
    intact_set,
)
from fedbroadcast.subjective import (
    SubjectiveDqs,
    SubjectiveFbqs,
    check_subjective_dqs,
    induce_subjective_quorums,
    induced_subjective_dqs,
    subjective_intact_set,
    subjective_quorum_intersection,
    subjective_v_blocking,
    validate_agreement,
)

import oracles
from conftest import EX7

F = frozenset


def fs(*sets):
    return {F(s) for s in sets}


@pytest.fixture
def ex19():
    return SubjectiveFbqs.from_shared(EX7, bad={3}, overrides={2: {3: [[2, 3]]}})


def test_example19_views_agree(ex19):
    assert validate_agreement(ex19).passed
    assert ex19.view(1).slices[3] == {F({1, 3})}
    assert ex19.view(2).slices[3] == {F({2, 3})}


def test_disagreement_on_correct_slices_is_reported(ex19):
    views = dict(ex19.views)
    views[2] = Fbqs.from_lists({**EX7, 1: [[1, 2]], 3: [[2, 3]]})
    broken = SubjectiveFbqs(ex19.universe, ex19.scenario, views, check=False)
    report = validate_agreement(broken)
    assert report["agreement"].failed
    assert report["agreement"].witness == (1, 2, 1)
    with pytest.raises(DomainError, match="disagree"):
        SubjectiveFbqs(ex19.universe, ex19.scenario, views)


def test_override_of_correct_server_is_rejected():
    with pytest.raises(DomainError):
        SubjectiveFbqs.from_shared(EX7, bad={3}, overrides={2: {1: [[1]]}})


def test_views_must_cover_exactly_the_correct_servers(ex19):
    fbqs = Fbqs.from_lists(EX7)
    with pytest.raises(DomainError, match="faulty or unknown"):
        SubjectiveFbqs(fbqs.universe, ex19.scenario, {v: fbqs for v in (1, 2, 3, 4)})
    with pytest.raises(DomainError, match="without a view"):
        SubjectiveFbqs(fbqs.universe, ex19.scenario, {1: fbqs})
    with pytest.raises(DomainError):
        ex19.view(3)


def test_single_correct_node_agrees():
    s = SubjectiveFbqs.from_shared({1: [[1]]})
    assert validate_agreement(s).passed
    assert subjective_intact_set(s) == F({1})


def test_example19_quorums(ex19):
    q = induce_subjective_quorums(ex19)
    assert set(q[1].quorums) == fs({1, 2}, {1, 2, 3}, {1, 3, 4}, {1, 2, 3, 4})
    assert set(q[4].quorums) == set(q[1].quorums)
    assert set(q[2].quorums) == fs({1, 2}, {1, 2, 3}, {1, 2, 3, 4})
    assert F({1, 3, 4}) in q[1].quorums and F({1, 3, 4}) not in q[2].quorums


def test_example19_intersection_and_intact(ex19):
    assert subjective_quorum_intersection(ex19)
    assert subjective_intact_set(ex19) == F({1, 2})


def test_identical_views_reduce_to_objective_case():
    s = SubjectiveFbqs.uniform(Fbqs.from_lists(EX7), bad={3})
    q = induce_subjective_quorums(s)
    for v in (1, 2, 4):
        assert set(q[v].quorums) == fs({1, 2}, {1, 2, 3}, {1, 3, 4}, {1, 2, 3, 4})
    assert subjective_intact_set(s) == F({1, 2})
    sdqs = induced_subjective_dqs(s)
    for v in (1, 2, 4):
        assert set(sdqs.per_view_fail_prone[v].fail_sets) == fs({2}, {3, 4})
        assert sdqs.view(v) == induced_dqs(Fbqs.from_lists(EX7))
    assert subjective_intact_set(SubjectiveFbqs.uniform(Fbqs.from_lists(EX7))) == F({1, 2, 3, 4})


def test_view_without_intersection():
    s = SubjectiveFbqs.from_shared({1: [[1]], 2: [[1, 2]], 3: [[3]]}, bad={3}, overrides={2: {3: [[3]]}})
    assert not subjective_quorum_intersection(s)
    with pytest.raises(PreconditionError):
        subjective_intact_set(s)


def test_example19_induced_dqs_passes(ex19):
    sdqs = induced_subjective_dqs(ex19)
    report = check_subjective_dqs(sdqs)
    assert report.passed
    for name in ("sd_safety", "sd_consistency", "sd_availability"):
        assert report[name].status == "pass"


def test_example19_fail_prone_matches_brute_force(ex19):
    sdqs = induced_subjective_dqs(ex19)
    for v in (1, 2, 4):
        view = oracles.view_slices(EX7, {2: {3: [[2, 3]]}}, v)
        assert set(sdqs.per_view_fail_prone[v].fail_sets) == oracles.fail_prone(view)
    # frozen regression values of the oracle above
    assert set(sdqs.per_view_fail_prone[1].fail_sets) == fs({2}, {3, 4})
    assert set(sdqs.per_view_fail_prone[2].fail_sets) == fs({3, 4})


def _with_fail_prone(sdqs, table):
    return SubjectiveDqs(sdqs.per_view_quorums, {v: FailProneSystem(list(map(F, bs))) for v, bs in table.items()},
                         sdqs.scenario)


def test_sd_safety_failure(ex19):
    sdqs = _with_fail_prone(induced_subjective_dqs(ex19), {1: [[]], 2: [[]], 4: [[]]})
    report = check_subjective_dqs(sdqs)
    assert report["sd_safety"].failed
    assert report["sd_safety"].witness == 1


def _sd_consistency_witnesses(sdqs):
    bad = sdqs.scenario.bad
    every = sdqs.per_view_quorums.all_quorums()
    return {
        (v, u1, u2, b)
        for v, fp in sdqs.per_view_fail_prone.items()
        for u1 in sdqs.per_view_quorums[v].quorums
        for u2 in every
        for b in fp.fail_sets
        if bad <= b and (u1 & u2) <= b
    }


def test_sd_consistency_failure_has_brute_force_witness(ex19):
    base = induced_subjective_dqs(ex19)
    sdqs = _with_fail_prone(base, {1: [[2], [3, 4]], 2: [[1, 3, 4]], 4: [[2], [3, 4]]})
    report = check_subjective_dqs(sdqs)
    expected = _sd_consistency_witnesses(sdqs)
    assert expected
    assert report["sd_consistency"].failed
    assert report["sd_consistency"].witness in expected


def test_subjective_v_blocking(ex19):
    assert subjective_v_blocking(ex19, 1, {2, 4})
    assert subjective_v_blocking(ex19, 2, {1})
    assert not subjective_v_blocking(ex19, 1, set())
    with pytest.raises(DomainError):
        subjective_v_blocking(ex19, 3, {1})


@given(oracles.subjective_maps(max_nodes=5))
def test_per_view_intact_sets_coincide(case):
    slices, bad, overrides = case
    assume(len(bad) < len(slices))
    s = SubjectiveFbqs.from_shared(slices, bad, overrides)
    views = {v: oracles.view_slices(slices, overrides, v) for v in s.ok}
    assume(all(oracles.has_qi(view) for view in views.values()))
    expected = {oracles.intact(view, bad) for view in views.values()}
    assert len(expected) == 1
    assert subjective_intact_set(s) == expected.pop()
    for v, view in s.views.items():
        assert intact_set(view, s.scenario) == subjective_intact_set(s)
        assert set(enumerate_quorums(view).quorums) == oracles.quorums(views[v])
