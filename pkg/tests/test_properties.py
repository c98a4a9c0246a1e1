"""Randomized structural properties on universes of up to eight nodes.

Every property runs 200 derandomized examples (see the pinned profile in
conftest). Inputs that fall outside a property's hypothesis are discarded
with ``assume``.
"""

from hypothesis import assume, given, strategies as st

from fedbroadcast.quorum_core import (
    FailureScenario,
    Fbqs,
    check_dqs,
    enumerate_quorums,
    has_quorum_intersection,
    induced_dqs,
    intact_candidates,
    intact_set,
    is_intact_candidate,
    is_quorum,
    is_v_blocking,
)
from fedbroadcast.subjective import (
    SubjectiveFbqs,
    check_subjective_dqs,
    induce_subjective_quorums,
    induced_subjective_dqs,
    subjective_intact_set,
    subjective_quorum_intersection,
    subjective_v_blocking,
)

import oracles

N = 8


@st.composite
def two_of(draw, pool):
    pool = sorted(pool, key=lambda s: (len(s), sorted(s)))
    return draw(st.sampled_from(pool)), draw(st.sampled_from(pool))


@given(oracles.any_slice_maps(max_nodes=N), st.data())
def test_union_of_quorums_is_a_quorum(slices, data):
    fbqs = Fbqs.from_lists(slices)
    qs = enumerate_quorums(fbqs).quorums
    assume(qs)
    u1, u2 = data.draw(two_of(qs))
    assert is_quorum(fbqs, u1 | u2)


@given(oracles.intersecting_slice_maps(max_nodes=N), st.data())
def test_union_of_intact_candidates_is_a_candidate(slices, data):
    fbqs = Fbqs.from_lists(slices)
    cands = intact_candidates(fbqs)
    assume(cands)
    i1, i2 = data.draw(two_of(cands))
    assert is_intact_candidate(fbqs, i1 | i2)


@given(oracles.with_faulty(oracles.intersecting_slice_maps(max_nodes=N)), st.data())
def test_quorums_share_an_intact_server(case, data):
    slices, bad = case
    fbqs = Fbqs.from_lists(slices)
    intact = intact_set(fbqs, FailureScenario(fbqs.universe, bad))
    assume(intact)
    u1, u2 = data.draw(two_of(enumerate_quorums(fbqs).quorums))
    assert u1 & u2 & intact


@given(oracles.with_faulty(oracles.intersecting_slice_maps(max_nodes=N)))
def test_befouled_servers_never_block_intact_ones(case):
    slices, bad = case
    fbqs = Fbqs.from_lists(slices)
    intact = intact_set(fbqs, FailureScenario(fbqs.universe, bad))
    befouled = fbqs.universe - intact
    for v in intact:
        assert not is_v_blocking(fbqs, v, befouled)


@given(oracles.any_slice_maps(max_nodes=N), st.data())
def test_non_blocking_complement_is_a_quorum(slices, data):
    fbqs = Fbqs.from_lists(slices)
    b = frozenset(data.draw(st.sets(st.sampled_from(sorted(slices)))))
    rest = fbqs.universe - b
    assume(not any(is_v_blocking(fbqs, v, b) for v in rest))
    assert not rest or is_quorum(fbqs, rest)


@st.composite
def dqs_cases(draw):
    """An induced DQS and a faulty set covered by one of its fail-prone sets."""
    slices = draw(oracles.intersecting_slice_maps(max_nodes=N))
    fbqs = Fbqs.from_lists(slices)
    assume(intact_set(fbqs, FailureScenario(fbqs.universe, frozenset())))
    dqs = induced_dqs(fbqs)
    cover = draw(st.sampled_from(dqs.fail_prone.sorted()))
    bad = frozenset(draw(st.sets(st.sampled_from(sorted(cover)))) if cover else ())
    return dqs, bad


@given(dqs_cases())
def test_quorums_escape_the_faulty_set_and_every_fail_prone_set(case):
    dqs, bad = case
    for u in dqs.quorum_system.quorums:
        assert u - bad
        for b in dqs.fail_prone.fail_sets:
            assert not (u - bad) <= b


@given(oracles.intersecting_slice_maps(max_nodes=N))
def test_induced_dqs_satisfies_the_axioms(slices):
    fbqs = Fbqs.from_lists(slices)
    assume(intact_candidates(fbqs))
    assert check_dqs(induced_dqs(fbqs)).passed


# -- per-view structures ---------------------------------------------------------


@st.composite
def subjective_cases(draw, max_nodes=N):
    slices, bad, overrides = draw(oracles.subjective_maps(max_nodes=max_nodes))
    assume(len(bad) < len(slices))
    s = SubjectiveFbqs.from_shared(slices, bad, overrides)
    assume(subjective_quorum_intersection(s))
    return s


@given(subjective_cases(max_nodes=7), st.data())
def test_quorums_of_any_two_views_share_an_intact_server(s, data):
    intact = subjective_intact_set(s)
    assume(intact)
    q = induce_subjective_quorums(s)
    v1, v2 = data.draw(st.sampled_from(sorted(s.ok))), data.draw(st.sampled_from(sorted(s.ok)))
    u1 = data.draw(st.sampled_from(q[v1].sorted()))
    u2 = data.draw(st.sampled_from(q[v2].sorted()))
    assert u1 & u2 & intact


@given(subjective_cases(max_nodes=7))
def test_befouled_servers_never_block_intact_ones_in_their_own_view(s):
    intact = subjective_intact_set(s)
    befouled = s.universe - intact
    for v in intact:
        assert not subjective_v_blocking(s, v, befouled)


@given(subjective_cases(max_nodes=7), st.data())
def test_union_of_candidates_common_to_all_views(s, data):
    common = frozenset.intersection(*(intact_candidates(view) for view in s.views.values()))
    common = {c for c in common if c <= s.ok}
    assume(common)
    i1, i2 = data.draw(two_of(common))
    for view in s.views.values():
        assert is_intact_candidate(view, i1 | i2)


@given(subjective_cases(max_nodes=7))
def test_induced_subjective_dqs_satisfies_the_axioms(s):
    assume(subjective_intact_set(s))
    assert check_subjective_dqs(induced_subjective_dqs(s)).passed


@given(oracles.with_faulty(oracles.intersecting_slice_maps(max_nodes=N)))
def test_identical_views_degenerate_to_the_shared_structure(case):
    slices, bad = case
    fbqs = Fbqs.from_lists(slices)
    assume(len(bad) < len(slices))
    s = SubjectiveFbqs.uniform(fbqs, bad)
    assume(subjective_intact_set(s))
    assert has_quorum_intersection(fbqs)
    sdqs = induced_subjective_dqs(s)
    for v in s.ok:
        assert sdqs.view(v) == induced_dqs(fbqs)
