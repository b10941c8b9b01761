"""Admissible reflection itineraries and the graphs that encode them.

A sequence ``(k_0, r_0), ..., (k_p, r_p)`` is admissible when

(i)   ``k_0 = 0``;
(ii)  consecutive entries differ;
(iii) no lattice obstacle lies between consecutive entries;
(iv)  entry ``n+1`` does not lie between entries ``n`` and ``n+2``.

Two graphs are built. :class:`PaperGraph` has vertices ``(j, s)`` and the
edge rule quantified over a free label ``r``. :class:`TransitionGraph`
carries the previous label in its states ``(r_prev, l, r)``, which makes its
paths correspond exactly to admissible sequences; everything downstream
(cycles, connectors, block concatenation) runs on it.
"""
from __future__ import annotations

import itertools
import logging
import math
import random
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .scene import LatticeObstacleId, Scene, ball_hull_distance, blocking_obstacles, lid

log = logging.getLogger(__name__)

Vec = tuple[int, ...]


def _add(a: Vec, b: Vec) -> Vec:
    return tuple(x + y for x, y in zip(a, b))


def _sub(a: Vec, b: Vec) -> Vec:
    return tuple(x - y for x, y in zip(a, b))


def _neg(a: Vec) -> Vec:
    return tuple(-x for x in a)


@dataclass(frozen=True)
class SymbolicSequence:
    entries: tuple[LatticeObstacleId, ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("a symbolic sequence needs at least one entry")
        object.__setattr__(self, "entries", tuple(lid(e[0], e[1]) for e in self.entries))

    @classmethod
    def of(cls, items: Iterable) -> "SymbolicSequence":
        return cls(tuple(lid(k, r) for k, r in items))

    @classmethod
    def from_increments(cls, r0: int, steps: Iterable[tuple[Vec, int]], m: int) -> "SymbolicSequence":
        k = (0,) * m
        entries = [lid(k, r0)]
        for l, r in steps:
            k = _add(k, tuple(l))
            entries.append(lid(k, r))
        return cls(tuple(entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    @property
    def increments(self) -> list[tuple[Vec, int]]:
        """``(l_n, r_n)`` with ``l_0 = 0``."""
        out = [((0,) * len(self.entries[0].k), self.entries[0].r)]
        for a, b in zip(self.entries, self.entries[1:]):
            out.append((_sub(b.k, a.k), b.r))
        return out

    def to_rows(self) -> list[list[int]]:
        return [list(e.k) + [e.r] for e in self.entries]

    @classmethod
    def from_rows(cls, rows) -> "SymbolicSequence":
        return cls(tuple(lid(row[:-1], row[-1]) for row in rows))


class Violation(NamedTuple):
    index: int
    condition: str  # "i", "ii", "iii" or "iv"
    obstacle: LatticeObstacleId | None


@dataclass(frozen=True)
class AdmissibilityVerdict:
    ok: bool
    violation: Violation | None = None

    def __bool__(self) -> bool:
        return self.ok


# ---------------------------------------------------------------------------
# cached translation-invariant predicates


@lru_cache(maxsize=None)
def pair_blocker(scene: Scene, r_a: int, dk: Vec, r_b: int) -> LatticeObstacleId | None:
    """First obstacle between ``O(0, r_a)`` and ``O(dk, r_b)``, or None."""
    zero = (0,) * scene.m
    A, B = lid(zero, r_a), lid(dk, r_b)
    if A == B:
        return None
    found = blocking_obstacles(scene, A, B)
    return found[0] if found else None


@lru_cache(maxsize=None)
def middle_between(scene: Scene, r_a: int, dk_mid: Vec, r_mid: int, dk_end: Vec, r_end: int) -> bool:
    """Whether ``O(dk_mid, r_mid)`` lies between ``O(0, r_a)`` and ``O(dk_end, r_end)``.

    When the two outer entries name the same obstacle the hull is that ball
    itself, and the middle obstacle is between only if it is the same ball.
    """
    zero = (0,) * scene.m
    A, C, B = lid(zero, r_a), lid(dk_mid, r_mid), lid(dk_end, r_end)
    if C == A or C == B:
        return True
    cc = scene.center(C)
    rc = scene.radius(C)
    if A == B:
        return float(np.linalg.norm(cc - scene.center(A))) <= rc + scene.radius(A) + scene.tolerance
    d = ball_hull_distance(cc, scene.center(A), scene.radius(A), scene.center(B), scene.radius(B))
    return d <= rc + scene.tolerance


def check_admissible(scene: Scene, seq: SymbolicSequence) -> AdmissibilityVerdict:
    """Check conditions (i)-(iv) in that order and return the first violation."""
    e = seq.entries
    if any(c != 0 for c in e[0].k):
        return AdmissibilityVerdict(False, Violation(0, "i", e[0]))
    for n in range(1, len(e)):
        if e[n] == e[n - 1]:
            return AdmissibilityVerdict(False, Violation(n, "ii", e[n]))
    for n in range(len(e) - 1):
        a, b = e[n], e[n + 1]
        blocker = pair_blocker(scene, a.r, _sub(b.k, a.k), b.r)
        if blocker is not None:
            return AdmissibilityVerdict(False, Violation(n, "iii", blocker.shifted(a.k)))
    for n in range(len(e) - 2):
        a, b, c = e[n], e[n + 1], e[n + 2]
        if middle_between(scene, a.r, _sub(b.k, a.k), b.r, _sub(c.k, a.k), c.r):
            return AdmissibilityVerdict(False, Violation(n, "iv", b))
    return AdmissibilityVerdict(True)


# ---------------------------------------------------------------------------
# the set U and the hub graph


def unit_vectors(m: int) -> list[Vec]:
    out = []
    for axis in range(m):
        for sign in (1, -1):
            u = [0] * m
            u[axis] = sign
            out.append(tuple(u))
    return out


def unit_pairs(scene: Scene) -> list[tuple[Vec, int]]:
    """All ``(u, r)`` with ``u`` a signed standard unit vector: ``2 m N`` pairs."""
    return [(u, r) for u in unit_vectors(scene.m) for r in scene.labels]


def _box(m: int, J: int) -> Iterable[Vec]:
    return itertools.product(range(-J, J + 1), repeat=m)


def is_paper_vertex(scene: Scene, j: Vec, s: int) -> bool:
    """No label ``r`` has an obstacle between ``O(0, r)`` and ``O(j, s)``."""
    return all(pair_blocker(scene, r, tuple(j), s) is None for r in scene.labels)


def has_paper_edge(scene: Scene, src: tuple[Vec, int], dst: tuple[Vec, int]) -> bool:
    """Some label ``r`` leaves ``O(j, s)`` outside the hull of ``O(0, r)`` and ``O(i + j, t)``."""
    (j, s), (i, t) = src, dst
    ij = _add(i, j)
    return any(not middle_between(scene, r, tuple(j), s, ij, t) for r in scene.labels)


@dataclass(frozen=True)
class PaperGraph:
    J_max: int
    vertices: frozenset
    edges: frozenset
    boundary_warning: bool

    def successors(self, v) -> list:
        return self._adj.get(v, [])

    @property
    def _adj(self) -> dict:
        adj = self.__dict__.get("_adj_cache")
        if adj is None:
            adj = {}
            for a, b in sorted(self.edges):
                adj.setdefault(a, []).append(b)
            object.__setattr__(self, "_adj_cache", adj)
        return adj

    def to_dict(self) -> dict:
        return {
            "J_max": self.J_max,
            "vertices": [list(j) + [s] for j, s in sorted(self.vertices)],
            "edges": [[list(a[0]) + [a[1]], list(b[0]) + [b[1]]] for a, b in sorted(self.edges)],
        }


def build_paper_graph(scene: Scene, J_max: int) -> PaperGraph:
    if J_max < 1:
        raise ValueError("J_max must be at least 1")
    vertices = [(j, s) for j in _box(scene.m, J_max) for s in scene.labels if is_paper_vertex(scene, j, s)]
    edges = frozenset((a, b) for a in vertices for b in vertices if has_paper_edge(scene, a, b))
    warn = any(max(abs(c) for c in j) == J_max for j, _ in vertices)
    if warn:
        log.warning("hub graph has vertices on the J_max=%d shell; the cutoff may truncate it", J_max)
    return PaperGraph(J_max, frozenset(vertices), edges, warn)


@dataclass(frozen=True)
class PaperGraphSummary:
    """Structural facts about a :class:`PaperGraph`.

    ``reflection_tests``/``reflection_failures`` count, for every edge
    ``(k, t) -> (j, s)`` and every witness label ``r``, whether the edge
    ``(j, t) -> (k, r)`` exists too (tests where either end is not a vertex
    are counted in ``reflection_skipped``).
    """

    n_vertices: int
    n_edges: int
    self_edges: tuple
    vertex_symmetry_failures: tuple
    edge_symmetry_failures: tuple
    missing_bounce_edges: tuple
    zero_pairs_complete: bool
    units_are_vertices: bool
    no_hub_edge: tuple  # vertices (j != 0) without an edge to some (u, r) in U with the same label
    routed_diameter: float  # longest shortest path with intermediate vertices in U and (0, r)
    reflection_tests: int
    reflection_failures: int
    reflection_skipped: int
    boundary_warning: bool

    @property
    def reflection_violation_rate(self) -> float:
        return self.reflection_failures / self.reflection_tests if self.reflection_tests else 0.0

    def to_dict(self) -> dict:
        return {
            "n_vertices": self.n_vertices,
            "n_edges": self.n_edges,
            "self_edges": [list(j) + [s] for j, s in self.self_edges],
            "vertex_symmetry_failures": [list(j) + [s] for j, s in self.vertex_symmetry_failures],
            "edge_symmetry_failures": [[list(a[0]) + [a[1]], list(b[0]) + [b[1]]] for a, b in self.edge_symmetry_failures],
            "missing_bounce_edges": [list(j) + [s] for j, s in self.missing_bounce_edges],
            "zero_pairs_complete": self.zero_pairs_complete,
            "units_are_vertices": self.units_are_vertices,
            "no_hub_edge": [list(j) + [s] for j, s in self.no_hub_edge],
            "routed_diameter": self.routed_diameter,
            "reflection_tests": self.reflection_tests,
            "reflection_failures": self.reflection_failures,
            "reflection_skipped": self.reflection_skipped,
            "reflection_violation_rate": self.reflection_violation_rate,
            "boundary_warning": self.boundary_warning,
        }


def _neg_vertex(v):
    return (_neg(v[0]), v[1])


def routed_distances(graph: PaperGraph, via: set, source) -> dict:
    """BFS distances from ``source`` where only vertices in ``via`` may be passed through."""
    dist = {source: 0}
    frontier = deque([source])
    while frontier:
        a = frontier.popleft()
        if a != source and a not in via:
            continue
        for b in graph.successors(a):
            if b not in dist:
                dist[b] = dist[a] + 1
                frontier.append(b)
    return dist


def summarize_paper_graph(scene: Scene, graph: PaperGraph) -> PaperGraphSummary:
    V, E = graph.vertices, graph.edges
    zero = tuple([0] * scene.m)
    U = set(unit_pairs(scene))
    hubs = U | {(zero, r) for r in scene.labels}
    self_edges = tuple(sorted(a for a, b in E if a == b))
    vfail = tuple(sorted(v for v in V if _neg_vertex(v) not in V))
    efail = tuple(sorted((a, b) for a, b in E if (_neg_vertex(a), _neg_vertex(b)) not in E))
    # (j, s) -> (-j, s) for j != 0; for j = 0 that would be a self-edge
    bounce = tuple(sorted(v for v in V if v[0] != zero and _neg_vertex(v) in V and (v, _neg_vertex(v)) not in E))
    zeros = [(zero, r) for r in scene.labels]
    zero_ok = all((a, b) in E for a in zeros for b in zeros if a != b)
    # hub edges are claimed for v != 0 (the separating construction needs B != A)
    no_hub = tuple(
        sorted(v for v in V if v[0] != zero and not any((v, (u, v[1])) in E for u in unit_vectors(scene.m)))
    )
    diameter = 0.0
    for a in sorted(V):
        dist = routed_distances(graph, hubs, a)
        for b in V:
            diameter = max(diameter, float(dist.get(b, math.inf)))
    tests = fails = skipped = 0
    for (k, t), (j, s) in E:
        for r in scene.labels:
            if middle_between(scene, r, tuple(k), t, _add(k, j), s):
                continue
            src, dst = (j, t), (k, r)
            if src not in V or dst not in V:
                skipped += 1
                continue
            tests += 1
            fails += (src, dst) not in E
    return PaperGraphSummary(
        len(V), len(E), self_edges, vfail, efail, bounce, zero_ok, U <= V, no_hub, diameter, tests, fails, skipped,
        graph.boundary_warning,
    )


def hub_separation(v: Sequence[float], u: Sequence[float]) -> tuple[float, float, float]:
    """Distances of ``A = 0``, ``B = v``, ``C = u + v`` from the line through ``D``, ``E``.

    ``D`` and ``E`` lie on ``BA`` and ``BC`` at distance 1/2 from ``B``; the
    distances are measured in the plane of the triangle.
    """
    A = np.zeros(len(v))
    B = np.asarray(v, dtype=float)
    C = B + np.asarray(u, dtype=float)
    D = B + 0.5 * (A - B) / np.linalg.norm(A - B)
    E = B + 0.5 * (C - B) / np.linalg.norm(C - B)
    if np.linalg.norm(E - D) < 1e-12:
        # C on the ray BA: D = E, take the line through D normal to BA
        a = (A - B) / np.linalg.norm(A - B)
        return tuple(abs(float((P - D) @ a)) for P in (A, B, C))
    d = (E - D) / np.linalg.norm(E - D)

    def dist(P):
        w = P - D
        return float(np.linalg.norm(w - (w @ d) * d))

    return dist(A), dist(B), dist(C)


# ---------------------------------------------------------------------------
# exact transition graph


class State(NamedTuple):
    r_prev: int
    l: Vec
    r: int


@dataclass(frozen=True)
class TransitionGraph:
    scene: Scene = field(repr=False)
    J_max: int
    states: tuple[State, ...]
    arcs: dict = field(repr=False)  # State -> tuple[State, ...]
    boundary_warning: bool = False

    def successors(self, s: State) -> tuple[State, ...]:
        return self.arcs.get(s, ())

    def has_arc(self, a: State, b: State) -> bool:
        return b in self.arcs.get(a, ())

    @property
    def n_arcs(self) -> int:
        return sum(len(v) for v in self.arcs.values())

    def path_sequence(self, path: Sequence[State]) -> SymbolicSequence:
        if not path:
            raise ValueError("empty path")
        return SymbolicSequence.from_increments(path[0].r_prev, [(s.l, s.r) for s in path], self.scene.m)

    def to_dict(self) -> dict:
        def enc(s):
            return [s.r_prev] + list(s.l) + [s.r]

        return {
            "J_max": self.J_max,
            "states": [enc(s) for s in self.states],
            "arcs": [[enc(a), enc(b)] for a in self.states for b in self.successors(a)],
        }


def is_state(scene: Scene, r_prev: int, l: Vec, r: int) -> bool:
    """Restated (ii)+(iii): the step ``(l, r)`` from ``O(0, r_prev)`` is clear."""
    if r == r_prev and not any(l):
        return False
    return pair_blocker(scene, r_prev, tuple(l), r) is None


def is_arc(scene: Scene, a: State, b: State) -> bool:
    """Restated (iv) across two consecutive steps."""
    return a.r == b.r_prev and not middle_between(scene, a.r_prev, a.l, a.r, _add(a.l, b.l), b.r)


def build_transition_graph(scene: Scene, J_max: int) -> TransitionGraph:
    if J_max < 1:
        raise ValueError("J_max must be at least 1")
    states = tuple(
        State(rp, l, r)
        for rp in scene.labels
        for l in _box(scene.m, J_max)
        for r in scene.labels
        if is_state(scene, rp, l, r)
    )
    by_prev: dict[int, list[State]] = {}
    for s in states:
        by_prev.setdefault(s.r_prev, []).append(s)
    arcs = {a: tuple(b for b in by_prev.get(a.r, []) if is_arc(scene, a, b)) for a in states}
    warn = any(max(abs(c) for c in s.l) == J_max for s in states)
    if warn:
        log.debug("transition graph has states on the J_max=%d shell", J_max)
    return TransitionGraph(scene, J_max, states, arcs, warn)


def sequence_states(seq: SymbolicSequence) -> list[State]:
    """Transition states visited by a sequence (one per entry after the first)."""
    e = seq.entries
    return [State(a.r, _sub(b.k, a.k), b.r) for a, b in zip(e, e[1:])]


def lifts_to_path(graph: TransitionGraph, seq: SymbolicSequence) -> bool:
    if any(c != 0 for c in seq.entries[0].k):
        return False
    states = sequence_states(seq)
    valid = set(graph.states)
    if any(s not in valid for s in states):
        return False
    return all(graph.has_arc(a, b) for a, b in zip(states, states[1:]))


def random_path(graph: TransitionGraph, length: int, rng: random.Random, start: State | None = None) -> list[State]:
    """Uniform random walk of ``length`` states; restarts on dead ends."""
    for _ in range(1000):
        s = start if start is not None else rng.choice(graph.states)
        path = [s]
        while len(path) < length:
            nxt = graph.successors(path[-1])
            if not nxt:
                break
            path.append(rng.choice(nxt))
        if len(path) == length:
            return path
    raise RuntimeError("could not find a random path of the requested length")


# ---------------------------------------------------------------------------
# cycles


@dataclass(frozen=True)
class CyclicSequence:
    """A closed walk of transition states; one period of a periodic itinerary."""

    states: tuple[State, ...]

    @property
    def q(self) -> int:
        return len(self.states)

    @property
    def p(self) -> Vec:
        total = (0,) * len(self.states[0].l)
        for s in self.states:
            total = _add(total, s.l)
        return total

    @property
    def entries(self) -> SymbolicSequence:
        """One period ``(k_0, r_0), ..., (k_{q-1}, r_{q-1})`` starting at cell 0."""
        return SymbolicSequence.from_increments(
            self.states[0].r_prev, [(s.l, s.r) for s in self.states[:-1]], len(self.states[0].l)
        )

    def expand(self, periods: int) -> SymbolicSequence:
        """``periods`` full periods plus the closing entry."""
        steps = [(s.l, s.r) for s in self.states] * periods
        return SymbolicSequence.from_increments(self.states[0].r_prev, steps, len(self.states[0].l))

    def rotated(self, shift: int) -> "CyclicSequence":
        shift %= self.q
        return CyclicSequence(self.states[shift:] + self.states[:shift])

    def reversed(self) -> "CyclicSequence":
        """The time-reversed cycle."""
        e = self.entries.entries
        q = self.q
        p = self.p
        # reversed itinerary visits e[q-1], ..., e[0], then e[q-1] - p, ...
        rev = [e[(q - 1 - i) % q] for i in range(q + 1)]
        rev[q] = rev[q].shifted(_neg(p))
        states = [State(a.r, _sub(b.k, a.k), b.r) for a, b in zip(rev, rev[1:])]
        return canonical_cycle(CyclicSequence(tuple(states)))

    def to_dict(self) -> dict:
        return {
            "entries": self.entries.to_rows(),
            "p": list(self.p),
            "q": self.q,
        }


def canonical_cycle(c: CyclicSequence) -> CyclicSequence:
    """Lexicographically smallest rotation."""
    return min((c.rotated(i) for i in range(c.q)), key=lambda x: x.states)


def cycle_from_entries(entries: Sequence, p: Sequence[int]) -> CyclicSequence:
    """Build a cycle from one period of entries and its lattice period ``p``."""
    seq = SymbolicSequence.of(entries)
    e = list(seq.entries) + [seq.entries[0].shifted(p)]
    return CyclicSequence(tuple(State(a.r, _sub(b.k, a.k), b.r) for a, b in zip(e, e[1:])))


def enumerate_periodic(
    scene: Scene, graph: TransitionGraph, q_max: int, limit: int | None = None
) -> list[CyclicSequence]:
    """All simple cycles of the transition graph with at most ``q_max`` states.

    Each cycle is reported once, rotated to start at its smallest state
    (which is also its lexicographically smallest rotation). ``limit`` caps
    the number of cycles returned; cycles come out ordered by length, then
    lexicographically.
    """
    order = {s: i for i, s in enumerate(sorted(graph.states))}
    succ = {s: sorted(graph.successors(s)) for s in graph.states}
    found: list[CyclicSequence] = []
    for q in range(1, q_max + 1):
        for root in sorted(graph.states):
            ri = order[root]
            path = [root]
            on_path = {root}

            def dfs(depth: int) -> bool:
                last = path[-1]
                for nxt in succ[last]:
                    if order[nxt] < ri:
                        continue
                    if depth == q:
                        if nxt == root:
                            found.append(CyclicSequence(tuple(path)))
                            if limit is not None and len(found) >= limit:
                                return True
                        continue
                    if nxt in on_path:
                        continue
                    path.append(nxt)
                    on_path.add(nxt)
                    stop = dfs(depth + 1)
                    path.pop()
                    on_path.discard(nxt)
                    if stop:
                        return True
                return False

            if dfs(1):
                return found
    return found


def count_cycles(graph: TransitionGraph, q_max: int) -> list[int]:
    """Number of simple cycles of each length ``1..q_max`` (no materialization)."""
    order = {s: i for i, s in enumerate(sorted(graph.states))}
    succ = {s: sorted(graph.successors(s)) for s in graph.states}
    counts = [0] * (q_max + 1)
    for root in sorted(graph.states):
        ri = order[root]
        stack = [(root, 1, iter(succ[root]))]
        on_path = {root}
        while stack:
            node, depth, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                on_path.discard(node)
                continue
            if order[nxt] < ri:
                continue
            if nxt == root:
                counts[depth] += 1
                continue
            if depth < q_max and nxt not in on_path:
                on_path.add(nxt)
                stack.append((nxt, depth + 1, iter(succ[nxt])))
    return counts[1:]


# ---------------------------------------------------------------------------
# connectors and block concatenation


class ConnectorError(RuntimeError):
    pass


def _is_hub(s: State) -> bool:
    return sum(abs(c) for c in s.l) <= 1


def find_connector(
    scene: Scene,
    graph: TransitionGraph,
    src: State,
    dst: State,
    max_len: int = 5,
    hubs_only: bool = True,
) -> list[State]:
    """Shortest list of intermediate states joining ``src`` to ``dst``.

    The walk ``src, *connector, dst`` has at most ``max_len`` arcs, and the
    intermediate states have increments in ``U`` or zero when ``hubs_only``.
    The spliced walk is re-checked with :func:`check_admissible`.
    """
    if src not in graph.arcs or dst not in graph.arcs:
        raise ConnectorError("connector endpoints must be transition states")
    prev: dict[State, State | None] = {src: None}
    frontier = deque([(src, 0)])
    hit = None
    if graph.has_arc(src, dst):
        hit = src
    while frontier and hit is None:
        node, depth = frontier.popleft()
        if depth + 1 >= max_len:
            continue
        for nxt in graph.successors(node):
            if nxt in prev or (hubs_only and not _is_hub(nxt)):
                continue
            prev[nxt] = node
            if graph.has_arc(nxt, dst):
                hit = nxt
                break
            frontier.append((nxt, depth + 1))
    if hit is None:
        raise ConnectorError(f"no connector found within length {max_len} from {src} to {dst}")
    fragment = []
    node = hit
    while node is not None and node != src:
        fragment.append(node)
        node = prev[node]
    fragment.reverse()
    spliced = graph.path_sequence([src, *fragment, dst])
    verdict = check_admissible(scene, spliced)
    if not verdict.ok:
        raise ConnectorError(f"spliced connector is not admissible: {verdict.violation}")
    return fragment


@dataclass(frozen=True)
class BlockWord:
    """A concatenation of blocks; ``seams`` index the first state of each block."""

    states: tuple[State, ...]
    seams: tuple[int, ...]
    labels: tuple[str, ...]

    def sequence(self, m: int) -> SymbolicSequence:
        return SymbolicSequence.from_increments(self.states[0].r_prev, [(s.l, s.r) for s in self.states], m)


class SeamError(ValueError):
    def __init__(self, seam: int, detail: str):
        super().__init__(f"seam {seam}: {detail}")
        self.seam = seam


def concat_blocks(
    scene: Scene,
    A: CyclicSequence,
    B: CyclicSequence,
    p: int,
    q_minus_p: int,
    C1: Sequence[State],
    C2: Sequence[State],
    C3: Sequence[State],
    a_periods: int = 1,
    b_periods: int = 1,
) -> BlockWord:
    """Block word ``A C1 A C1 ... A C2 B C3 B ... C3 B`` with ``p`` A's and ``q_minus_p`` B's.

    Each A (B) block is ``a_periods`` (``b_periods``) periods of the cycle.
    The first entry of the word is ``(0, r)`` with ``r`` the label preceding
    A's first state.
    """
    if p < 1 or q_minus_p < 1:
        raise ValueError("both blocks must appear at least once")
    a_block = list(A.states) * a_periods
    b_block = list(B.states) * b_periods
    parts: list[tuple[str, list[State]]] = []
    for i in range(p):
        parts.append(("A", a_block))
        parts.append(("C1", list(C1)) if i < p - 1 else ("C2", list(C2)))
    for i in range(q_minus_p):
        parts.append(("B", b_block))
        if i < q_minus_p - 1:
            parts.append(("C3", list(C3)))
    states: list[State] = []
    seams: list[int] = []
    labels: list[str] = []
    for name, block in parts:
        if not block:
            continue
        if states:
            a, b = states[-1], block[0]
            if a.r != b.r_prev or not is_arc(scene, a, b):
                raise SeamError(len(seams), f"no admissible transition from {a} into block {name}")
        seams.append(len(states))
        labels.append(name)
        states.extend(block)
    word = BlockWord(tuple(states), tuple(seams), tuple(labels))
    verdict = check_admissible(scene, word.sequence(scene.m))
    if not verdict.ok:
        n = verdict.violation.index
        seam = max(i for i, s in enumerate(seams) if s <= n) if seams else 0
        raise SeamError(seam, f"concatenation is not admissible: {verdict.violation}")
    return word
