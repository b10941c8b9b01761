from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torus_billiards.admissible import CyclicSequence, State, enumerate_periodic
from torus_billiards.flow import rotation_estimate, start_on_orbit, trace
from torus_billiards.rotset import (
    choose_weight,
    convex_hull,
    convexity_experiment,
    cycle_id,
    density_probe,
    parse_cycle_id,
    proper_inclusion_check,
    random_admissible_piece,
    rotation_vector_periodic,
    sample_admissible_rotation_set,
    support_values,
)
from torus_billiards.varpath import minimize_open, minimize_periodic

ZERO = (0, 0)
BOUNCE = CyclicSequence((State(1, ZERO, 2), State(2, ZERO, 1)))


@pytest.fixture(scope="module")
def s2_cloud4(s2, s2_graph):
    return sample_admissible_rotation_set(s2, 4, graph=s2_graph)


def test_cycle_id_round_trip(s2, s2_graph):
    for c in enumerate_periodic(s2, s2_graph, 3):
        assert parse_cycle_id(cycle_id(c)) == c
    assert cycle_id(BOUNCE) == "1:0,0:2;2:0,0:1"


def test_bounce_sample_is_zero(s2):
    smp = rotation_vector_periodic(minimize_periodic(s2, BOUNCE))
    np.testing.assert_array_equal(smp.vector, [0.0, 0.0])
    assert smp.provenance == "periodic"


# ---------------------------------------------------------------------------
# hulls


def test_square_hull_ignores_interior_points():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    h = convex_hull(sq)
    inner = np.vstack([sq, np.random.default_rng(0).uniform(0.1, 0.9, size=(50, 2))])
    h2 = convex_hull(inner)
    assert h.dimension == h2.dimension == 2
    assert {tuple(v) for v in h.vertices} == {tuple(v) for v in h2.vertices} == {tuple(v) for v in sq}
    assert h.contains((0.5, 0.5)) and not h.contains((1.1, 0.5))
    assert h.max_norm() == pytest.approx(math.sqrt(2))
    assert all(max(f) < len(h.vertices) for f in h.facets)


def test_degenerate_hulls():
    seg = convex_hull(np.array([[0, 0], [1, 1], [0.5, 0.5], [-1, -1]], float))
    assert seg.dimension == 1
    assert {tuple(v) for v in seg.vertices} == {(-1.0, -1.0), (1.0, 1.0)}
    assert seg.contains((0.25, 0.25)) and not seg.contains((0.25, 0.3))
    pt = convex_hull(np.zeros((3, 2)))
    assert pt.dimension == 0 and pt.contains((0, 0))


def test_three_dimensional_and_flat_hulls():
    cube = np.array(np.meshgrid([0, 1], [0, 1], [0, 1])).reshape(3, -1).T.astype(float)
    h = convex_hull(np.vstack([cube, [[0.5, 0.5, 0.5]]]))
    assert h.dimension == 3 and len(h.vertices) == 8
    flat = convex_hull(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0.2, 0.2, 0]], float))
    assert flat.dimension == 2 and len(flat.vertices) == 3
    with pytest.raises(ValueError):
        convex_hull(np.zeros((5, 4)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_support_values_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    pts, dirs = rng.normal(size=(30, 3)), rng.normal(size=(7, 3))
    np.testing.assert_allclose(support_values(pts, dirs), [max(p @ d for p in pts) for d in dirs])


# ---------------------------------------------------------------------------
# the periodic cloud


def test_small_cloud_contains_zero(s2, s2_graph):
    cloud = sample_admissible_rotation_set(s2, 2, graph=s2_graph)
    assert cloud.contains_zero()
    assert not cloud.failures


def test_cloud_properties(s2_cloud4):
    pts = s2_cloud4.points
    assert not s2_cloud4.failures
    assert np.all(np.linalg.norm(pts, axis=1) < 1.0)
    assert s2_cloud4.margin > 0
    # time reversal: the cloud is symmetric under v -> -v
    for v in pts:
        assert np.min(np.linalg.norm(pts + v, axis=1)) < 1e-12
    assert s2_cloud4.hull.contains((0.0, 0.0))


def test_symmetry_reduction_changes_nothing(s2, s2_graph, s2_cloud4):
    plain = sample_admissible_rotation_set(s2, 4, graph=s2_graph, use_symmetry=False)
    assert plain.minimized == len(plain.orbits) > s2_cloud4.minimized
    a = sorted(tuple(np.round(v, 12)) for v in plain.points)
    b = sorted(tuple(np.round(v, 12)) for v in s2_cloud4.points)
    assert a == b


def test_cloud_exports(s2_cloud4):
    rows = s2_cloud4.to_csv().strip().splitlines()
    assert rows[0].startswith("rho1,rho2,norm")
    assert len(rows) == len(s2_cloud4.samples) + 1
    d = s2_cloud4.to_dict()
    assert d["n_samples"] == len(s2_cloud4.samples) and d["contains_zero"]


def test_cloud_support_directions(s2, s2_graph):
    dirs = np.array([[1.0, 0.0], [0.0, 1.0]])
    cloud = sample_admissible_rotation_set(s2, 3, graph=s2_graph, directions=dirs)
    np.testing.assert_allclose(cloud.support, cloud.points.max(axis=0))


def test_boundary_warning_is_raised(s2, s2_graph):
    with pytest.warns(UserWarning, match="cell cutoff"):
        sample_admissible_rotation_set(s2, 2, graph=s2_graph)


def test_flow_reproduces_periodic_samples(s2, s2_graph):
    d = s2.max_diameter
    for c in enumerate_periodic(s2, s2_graph, 3):
        orbit = minimize_periodic(s2, c)
        q, n = c.q, 3
        x = orbit.points
        flight = trace(s2, start_on_orbit(x[0], c.entries[0], x[1 % q] + (c.p if q == 1 else 0)), n * q)
        est = rotation_estimate(flight, n * q)
        assert np.linalg.norm(est - orbit.rotation_vector) <= 2 * d / (n * orbit.period_length)


# ---------------------------------------------------------------------------
# experiments


def test_choose_weight_prefers_small_denominators():
    assert choose_weight(1.0, 1.0, 0.5, 1e-9) == (1, 2, 0.5)
    p, q, s = choose_weight(1.0, 3.0, 0.5, 1e-9)
    assert (p, q) == (3, 4) and s == pytest.approx(0.5)


def test_convexity_with_equal_cycles_is_trivial(s2, s2_graph):
    rep = convexity_experiment(s2, BOUNCE, BOUNCE, 0.5, 0.05, graph=s2_graph)
    assert rep.passed and rep.achieved_error < 1e-3
    assert (rep.p, rep.q) == (1, 2)


def test_convexity_at_t_one_uses_a_blocks_only(s2, s2_graph):
    B = next(c for c in enumerate_periodic(s2, s2_graph, 2) if any(c.p))
    rep = convexity_experiment(s2, B, BOUNCE, 1.0, 0.05, graph=s2_graph)
    assert rep.p == rep.q == 1 and rep.s == 1.0
    assert rep.passed
    assert rep.to_dict()["passed"] is True


def test_density_probe_of_a_repeated_cycle(s2, s2_graph):
    c = next(c for c in enumerate_periodic(s2, s2_graph, 3) if c.q == 3 and any(c.p))
    piece = minimize_open(s2, c.expand(60), None, None)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = density_probe(s2, piece, 4, s2_graph)
    assert 0.0 <= rep.distance < 0.01
    assert rep.passed


def test_density_probe_needs_a_long_piece(s2, s2_graph):
    piece = random_admissible_piece(s2, s2_graph, 20, seed=0)
    with pytest.raises(ValueError):
        density_probe(s2, piece, 4, s2_graph)


def test_proper_inclusion_small(s1):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = proper_inclusion_check(s1, 4, 100)
    assert rep.delta > 0 and rep.passed
    assert rep.flow_sample.provenance == "flow"


def test_flow_sample_grows_with_k(s1):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cloud = sample_admissible_rotation_set(s1, 3)
        firsts = [proper_inclusion_check(s1, 3, k, cloud=cloud).flow_sample.vector[0] for k in (10, 100, 1000)]
    assert firsts == sorted(firsts)
