from __future__ import annotations

import math
import random

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from torus_billiards.admissible import CyclicSequence, State, SymbolicSequence, enumerate_periodic, random_path
from torus_billiards.varpath import (
    NotAdmissibleError,
    TrajectoryPiece,
    VarPathError,
    check_periodic_batch,
    length_gap_check,
    minimize_open,
    minimize_periodic,
    random_sphere_point,
    reflection_residual,
)

ZERO = (0, 0)
BOUNCE = CyclicSequence((State(1, ZERO, 2), State(2, ZERO, 1)))
S1_PIECE = SymbolicSequence.of([(ZERO, 1)])


def _broken_length(points):
    return float(np.linalg.norm(np.diff(points, axis=0), axis=1).sum())


# ---------------------------------------------------------------------------
# open pieces


def test_single_reflection_piece(s1):
    piece = minimize_open(s1, S1_PIECE, (0.3, 0.7), (0.7, 0.7))
    np.testing.assert_allclose(piece.points[0], (0.5, 0.6), atol=1e-9)
    assert piece.length == pytest.approx(2 * math.hypot(0.2, 0.1), abs=1e-9)
    assert piece.length == pytest.approx(0.447214, abs=1e-6)
    assert reflection_residual(s1, piece) < 1e-12


def test_perturbed_point_has_positive_residual(s1):
    piece = minimize_open(s1, S1_PIECE, (0.3, 0.7), (0.7, 0.7))
    th = math.pi / 2 + 1e-3 / 0.1
    moved = TrajectoryPiece(piece.type, np.array([[0.5 + 0.1 * math.cos(th), 0.5 + 0.1 * math.sin(th)]]), piece.start, piece.end)
    assert reflection_residual(s1, moved) > 1e-4


def test_random_restarts_agree(s1):
    rng = np.random.default_rng(2)
    ref = minimize_open(s1, S1_PIECE, (0.3, 0.7), (0.7, 0.7))
    for _ in range(20):
        init = random_sphere_point(s1, S1_PIECE[0], rng)[None]
        piece = minimize_open(s1, S1_PIECE, (0.3, 0.7), (0.7, 0.7), init=init, sweeps=10)
        np.testing.assert_allclose(piece.points, ref.points, atol=1e-6)


def _angle_oracle(scene, seq, a, b):
    centers = [scene.center(e) for e in seq]
    radii = [scene.radius(e) for e in seq]

    def pts(th):
        return np.array([c + r * np.array([math.cos(t), math.sin(t)]) for c, r, t in zip(centers, radii, th)])

    def f(th):
        return _broken_length(np.vstack([a, pts(th), b]))

    best = None
    for th0 in np.linspace(0, 2 * math.pi, 12, endpoint=False):
        for th1 in np.linspace(0, 2 * math.pi, 12, endpoint=False):
            r = minimize(f, [th0, th1], method="Nelder-Mead", options=dict(xatol=1e-12, fatol=1e-14, maxiter=20000))
            if best is None or r.fun < best.fun:
                best = r
    return best.fun, pts(best.x)


def test_two_reflection_piece_against_angle_oracle(s2):
    seq = SymbolicSequence.of([(ZERO, 1), (ZERO, 2)])
    a, b = np.array([0.5, 0.05]), np.array([0.95, 0.5])
    piece = minimize_open(s2, seq, a, b)
    length, pts = _angle_oracle(s2, seq, a, b)
    assert piece.length == pytest.approx(length, abs=1e-9)
    np.testing.assert_allclose(piece.points, pts, atol=1e-6)
    # the endpoints are swapped by x -> (1 - y, 1 - x), which also swaps the balls
    x1, x2 = piece.points
    np.testing.assert_allclose(x2, (1 - x1[1], 1 - x1[0]), atol=1e-9)


def test_inadmissible_type_is_refused(s1):
    with pytest.raises(NotAdmissibleError):
        minimize_open(s1, SymbolicSequence.of([(ZERO, 1), ((2, 0), 1)]), None, None)


def test_length_history_is_non_increasing(s2, s2_graph):
    path = random_path(s2_graph, 8, random.Random(4))
    piece = minimize_open(s2, s2_graph.path_sequence(path), None, None)
    h = np.array(piece.history)
    assert np.all(np.diff(h) <= 1e-12 * h[0])


def test_minimizer_beats_random_broken_paths(s2, s2_graph):
    rng = np.random.default_rng(9)
    path = random_path(s2_graph, 4, random.Random(6))
    seq = s2_graph.path_sequence(path)
    a = random_sphere_point(s2, seq[0], rng)
    b = random_sphere_point(s2, seq[-1], rng)
    piece = minimize_open(s2, seq, a, b)
    for _ in range(100):
        inner = [random_sphere_point(s2, e, rng) for e in seq.entries[1:-1]]
        assert piece.length <= _broken_length(np.vstack([a, *inner, b])) + 1e-12


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.integers(0, 10_000), st.integers(2, 7), st.booleans())
def test_piece_invariants(s2, s2_graph, seed, length, pinned):
    rnd = random.Random(seed)
    seq = s2_graph.path_sequence(random_path(s2_graph, length - 1, rnd))
    rng = np.random.default_rng(seed)
    ends = (random_sphere_point(s2, seq[0], rng), random_sphere_point(s2, seq[-1], rng)) if pinned else (None, None)
    try:
        piece = minimize_open(s2, seq, *ends)
    except VarPathError:
        assume(False)
    for x, e in zip(piece.points, seq):
        assert abs(np.linalg.norm(x - s2.center(e)) - s2.radius(e)) < 1e-10
    assert np.linalg.norm(piece.displacement) <= piece.length + 1e-12
    assert piece.residual < 1e-10
    assert piece.clearance > 0


# ---------------------------------------------------------------------------
# spreads


def test_spreads_of_a_length_four_type(s2, s2_graph):
    seq = s2_graph.path_sequence(random_path(s2_graph, 3, random.Random(0)))
    assert len(seq) == 4
    rep = length_gap_check(s2, seq, 100, rng=1)
    assert rep.ok and rep.bound == pytest.approx(0.6)
    assert rep.length_spread > 0 and rep.displacement_spread > 0


def test_identical_endpoints_have_zero_spread(s2):
    seq = SymbolicSequence.of([(ZERO, 1), (ZERO, 2)])
    ends = (s2.center(seq[0]) + (0.15, 0), s2.center(seq[1]) - (0.15, 0))
    rep = length_gap_check(s2, seq, 2, endpoints=[ends, ends])
    assert rep.length_spread == 0.0 and rep.displacement_spread == 0.0


# ---------------------------------------------------------------------------
# periodic orbits


def test_bounce_orbit(s2):
    orbit = minimize_periodic(s2, BOUNCE)
    assert orbit.period_length == pytest.approx(2 * (math.sqrt(2) / 2 - 0.3), abs=1e-12)
    np.testing.assert_array_equal(orbit.rotation_vector, [0.0, 0.0])
    assert reflection_residual(s2, orbit) < 1e-10


def test_translating_orbit_rotation_is_p_over_length(s2, s2_graph):
    c = next(c for c in enumerate_periodic(s2, s2_graph, 2) if c.p == (1, 0) or c.p == (0, 1) or any(c.p))
    orbit = minimize_periodic(s2, c)
    np.testing.assert_allclose(orbit.rotation_vector, np.array(c.p) / orbit.period_length, rtol=0, atol=1e-15)


def test_rotation_invariant_under_start_rotation(s2, s2_graph):
    for c in enumerate_periodic(s2, s2_graph, 4)[:40]:
        a = minimize_periodic(s2, c)
        b = minimize_periodic(s2, c.rotated(1))
        assert a.period_length == pytest.approx(b.period_length, abs=1e-12)
        np.testing.assert_allclose(a.rotation_vector, b.rotation_vector, atol=1e-12)


def test_wrong_lattice_period_is_refused(s2):
    with pytest.raises(ValueError, match="lattice period"):
        minimize_periodic(s2, BOUNCE, p=(1, 0))


def test_batch_check_agrees_with_single_orbits(s2, s2_graph):
    cycles = [c for c in enumerate_periodic(s2, s2_graph, 3) if c.q == 3]
    orbits = [minimize_periodic(s2, c) for c in cycles]
    check = check_periodic_batch(s2, cycles, np.array([o.points for o in orbits]))
    assert check.ok.all()
    np.testing.assert_allclose(check.length, [o.period_length for o in orbits], atol=1e-13)
    np.testing.assert_allclose(check.clearance, [o.clearance for o in orbits], atol=1e-12)
    # a perturbed orbit fails the residual test
    bad = np.array([o.points for o in orbits])
    bad[:, 0] += 1e-3
    assert not check_periodic_batch(s2, cycles, bad).ok.any()
