from __future__ import annotations

import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torus_billiards.admissible import (
    CyclicSequence,
    SeamError,
    State,
    SymbolicSequence,
    build_transition_graph,
    canonical_cycle,
    check_admissible,
    concat_blocks,
    count_cycles,
    enumerate_periodic,
    find_connector,
    hub_separation,
    is_paper_vertex,
    lifts_to_path,
    random_path,
    sequence_states,
    summarize_paper_graph,
    unit_pairs,
    unit_vectors,
)

ZERO = (0, 0)
BOUNCE = CyclicSequence((State(1, ZERO, 2), State(2, ZERO, 1)))


# ---------------------------------------------------------------------------
# conditions (i)-(iv)


def test_in_cell_pair_is_admissible(s2):
    assert check_admissible(s2, SymbolicSequence.of([(ZERO, 1), (ZERO, 2)])).ok


@pytest.mark.parametrize(
    "items, index, condition",
    [
        ([(ZERO, 1), (ZERO, 1)], 1, "ii"),
        ([((1, 0), 1), ((1, 1), 2)], 0, "i"),
    ],
)
def test_violations_in_s2(s2, items, index, condition):
    v = check_admissible(s2, SymbolicSequence.of(items)).violation
    assert (v.index, v.condition) == (index, condition)


def test_collinear_triple_violates_iv(s1):
    v = check_admissible(s1, SymbolicSequence.of([(ZERO, 1), ((1, 0), 1), ((2, 0), 1)])).violation
    # the pair (0,0)-(2,0) is blocked by (1,0) too, but (iii) only checks consecutive pairs
    assert (v.index, v.condition) == (0, "iv")


def test_blocked_pair_violates_iii(s1):
    v = check_admissible(s1, SymbolicSequence.of([(ZERO, 1), ((2, 0), 1)])).violation
    assert v.condition == "iii"
    assert v.obstacle.k == (1, 0)


def test_sequence_rows_round_trip():
    seq = SymbolicSequence.of([(ZERO, 1), ((1, -1), 2), ((1, 0), 1)])
    assert SymbolicSequence.from_rows(seq.to_rows()) == seq
    assert SymbolicSequence.from_increments(1, [(l, r) for l, r in seq.increments[1:]], 2) == seq


# ---------------------------------------------------------------------------
# the set U and the hub graph


def test_unit_pair_counts(s2, s3):
    assert len(unit_pairs(s2)) == 8
    assert len(unit_pairs(s3)) == 6


def test_unit_pairs_are_paper_vertices(s2):
    assert all(is_paper_vertex(s2, u, r) for u, r in unit_pairs(s2))


def test_paper_graph_contains_hubs_and_zero_pairs(s2, s2_paper3):
    V, E = s2_paper3.vertices, s2_paper3.edges
    assert set(unit_pairs(s2)) <= V
    assert (ZERO, 1) in V and (ZERO, 2) in V
    assert ((ZERO, 1), (ZERO, 2)) in E and ((ZERO, 2), (ZERO, 1)) in E


def test_paper_graph_hub_lemma_and_routed_diameter(s2, s2_paper3):
    summary = summarize_paper_graph(s2, s2_paper3)
    assert summary.no_hub_edge == ()
    assert summary.routed_diameter <= 5
    assert summary.zero_pairs_complete and summary.units_are_vertices
    assert summary.vertex_symmetry_failures == ()


def test_paper_graph_self_edges_under_existential_edge_reading(s2, s2_paper3):
    # the literal edge condition ("some r") admits these four loops; they are
    # also the only pairs whose mirror image is missing
    summary = summarize_paper_graph(s2, s2_paper3)
    loops = (((-1, 0), 2), ((0, -1), 2), ((0, 1), 1), ((1, 0), 1))
    assert summary.self_edges == loops
    assert summary.edge_symmetry_failures == tuple((v, v) for v in loops)
    assert (summary.n_vertices, summary.n_edges) == (10, 86)


def test_paper_graph_reflection_rate_is_reported(s2, s2_paper3):
    summary = summarize_paper_graph(s2, s2_paper3)
    assert summary.reflection_tests == 142
    assert summary.reflection_failures == 4
    assert 0.0 <= summary.reflection_violation_rate <= 1.0


@settings(max_examples=300, deadline=None)
@given(
    st.lists(st.integers(-4, 4), min_size=2, max_size=3).filter(any),
    st.integers(0, 5),
    st.booleans(),
)
def test_hub_separation_bound(v, axis, positive):
    m = len(v)
    axis %= m
    u = [0] * m
    u[axis] = 1 if positive else -1
    if np.dot(u, v) > 0:
        u[axis] = -u[axis]
    if not any(np.add(u, v)):
        return  # v in U: the hub is the vertex itself
    _, dist_b, _ = hub_separation(v, u)
    assert dist_b >= math.sqrt(2) / 4 - 1e-12


# ---------------------------------------------------------------------------
# the transition graph


def test_in_cell_state_exists(s2_graph2):
    assert State(1, ZERO, 2) in set(s2_graph2.states)


def test_bounce_arc_matches_admissibility(s2, s2_graph2):
    seq = SymbolicSequence.of([(ZERO, 1), (ZERO, 2), (ZERO, 1)])
    assert s2_graph2.has_arc(State(1, ZERO, 2), State(2, ZERO, 1)) == check_admissible(s2, seq).ok


def test_random_paths_expand_to_admissible_sequences(s2, s2_graph2):
    rng = random.Random(0)
    for _ in range(100):
        path = random_path(s2_graph2, 6, rng)
        assert check_admissible(s2, s2_graph2.path_sequence(path)).ok


def _all_sequences(scene, J, length):
    steps = [(l, r) for l in itertools.product(range(-J, J + 1), repeat=scene.m) for r in scene.labels]
    for r0 in scene.labels:
        for combo in itertools.product(steps, repeat=length - 1):
            yield SymbolicSequence.from_increments(r0, combo, scene.m)


@pytest.mark.parametrize("length", [2, 3, 4])
def test_path_sequence_equivalence_exhaustive(s2, s2_graph, length):
    n = 0
    for seq in _all_sequences(s2, 1, length):
        assert check_admissible(s2, seq).ok == lifts_to_path(s2_graph, seq), seq
        n += 1
    assert n == 2 * 18 ** (length - 1)


def test_path_sequence_equivalence_random_long(s2, s2_graph2):
    rng = random.Random(7)
    steps = [(l, r) for l in itertools.product(range(-2, 3), repeat=2) for r in (1, 2)]
    for _ in range(300):
        seq = SymbolicSequence.from_increments(rng.choice((1, 2)), [rng.choice(steps) for _ in range(rng.randint(4, 9))], 2)
        assert check_admissible(s2, seq).ok == lifts_to_path(s2_graph2, seq)


def test_lifts_rejects_nonzero_start(s2_graph):
    assert not lifts_to_path(s2_graph, SymbolicSequence.of([((1, 0), 1), ((1, 0), 2)]))


def test_sequence_states_of_a_path(s2_graph):
    path = random_path(s2_graph, 5, random.Random(1))
    assert sequence_states(s2_graph.path_sequence(path)) == path


# ---------------------------------------------------------------------------
# cycles


def test_bounce_cycle_is_enumerated(s2, s2_graph):
    cycles = enumerate_periodic(s2, s2_graph, 2)
    assert BOUNCE in cycles
    assert BOUNCE.p == ZERO and BOUNCE.q == 2


def test_enumerated_cycles_expand_admissibly(s2, s2_graph):
    for c in enumerate_periodic(s2, s2_graph, 4):
        assert check_admissible(s2, c.expand(3)).ok


def test_enumerated_cycles_are_canonical_and_unique(s2, s2_graph):
    cycles = enumerate_periodic(s2, s2_graph, 4)
    assert len(set(cycles)) == len(cycles)
    assert all(canonical_cycle(c) == c for c in cycles)


def test_count_cycles_matches_enumeration(s2, s2_graph):
    cycles = enumerate_periodic(s2, s2_graph, 5)
    counts = count_cycles(s2_graph, 5)
    assert counts == [sum(c.q == q for c in cycles) for q in range(1, 6)]


def test_cycle_counts_invariant_under_label_swap():
    # swapping the two balls of S2 maps it onto its own point reflection
    from torus_billiards.scene import Obstacle, Scene

    a = Scene(2, (Obstacle((0.25, 0.25), 0.15), Obstacle((0.75, 0.75), 0.15)))
    b = Scene(2, (Obstacle((0.75, 0.75), 0.15), Obstacle((0.25, 0.25), 0.15)))
    assert count_cycles(build_transition_graph(a, 1), 5) == count_cycles(build_transition_graph(b, 1), 5)


def test_cycle_rotation_and_reversal(s2, s2_graph):
    for c in enumerate_periodic(s2, s2_graph, 4):
        assert canonical_cycle(c.rotated(1)) == c
        rev = c.reversed()
        assert rev.p == tuple(-x for x in c.p)
        assert check_admissible(s2, rev.expand(2)).ok


# ---------------------------------------------------------------------------
# connectors and block words


def test_connector_from_zero_state_is_short(s2, s2_graph):
    s = State(1, ZERO, 2)
    assert len(find_connector(s2, s2_graph, s, s)) + 1 <= 2


def test_connectors_between_random_states_are_short(s2, s2_graph2):
    rng = random.Random(3)
    for _ in range(200):
        a, b = rng.choice(s2_graph2.states), rng.choice(s2_graph2.states)
        frag = find_connector(s2, s2_graph2, a, b)
        assert len(frag) + 1 <= 5
        assert check_admissible(s2, s2_graph2.path_sequence([a, *frag, b])).ok


def _block_pattern(p, qp, C1, C2, C3):
    out = []
    for i in range(p):
        out.append("A")
        out.append("C1" if i < p - 1 else "C2")
    for i in range(qp):
        out.append("B")
        if i < qp - 1:
            out.append("C3")
    empty = {"C1": not C1, "C2": not C2, "C3": not C3}
    return [x for x in out if not empty.get(x, False)]


@pytest.mark.parametrize("p, qp", [(1, 1), (2, 1), (1, 3), (3, 2)])
def test_block_word_pattern(s2, s2_graph, p, qp):
    A = BOUNCE
    B = next(c for c in enumerate_periodic(s2, s2_graph, 2) if any(c.p))
    C1 = find_connector(s2, s2_graph, A.states[-1], A.states[0])
    C2 = find_connector(s2, s2_graph, A.states[-1], B.states[0])
    C3 = find_connector(s2, s2_graph, B.states[-1], B.states[0])
    word = concat_blocks(s2, A, B, p, qp, C1, C2, C3)
    assert list(word.labels) == _block_pattern(p, qp, C1, C2, C3)
    assert check_admissible(s2, word.sequence(2)).ok


def test_block_word_for_random_cycles_is_admissible(s2, s2_graph):
    cycles = enumerate_periodic(s2, s2_graph, 4)
    rng = random.Random(11)
    for _ in range(40):
        A, B = rng.choice(cycles), rng.choice(cycles)
        C1 = find_connector(s2, s2_graph, A.states[-1], A.states[0])
        C2 = find_connector(s2, s2_graph, A.states[-1], B.states[0])
        C3 = find_connector(s2, s2_graph, B.states[-1], B.states[0])
        word = concat_blocks(s2, A, B, rng.randint(1, 3), rng.randint(1, 3), C1, C2, C3, 2, 2)
        assert check_admissible(s2, word.sequence(2)).ok


def test_block_word_rejects_bad_seam(s2, s2_graph):
    with pytest.raises(SeamError):
        concat_blocks(s2, BOUNCE, BOUNCE, 1, 1, [], [State(2, ZERO, 1)], [])


def test_unit_vectors():
    assert unit_vectors(2) == [(1, 0), (-1, 0), (0, 1), (0, -1)]
