"""Rotation vectors: periodic samples of the admissible rotation set and finite experiments on it.

The admissible rotation set is reported as a point cloud of periodic-orbit
rotation vectors together with its convex hull (for ``m`` in {2, 3}).
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull

from .admissible import (
    BlockWord,
    CyclicSequence,
    canonical_cycle,
    State,
    TransitionGraph,
    build_transition_graph,
    concat_blocks,
    enumerate_periodic,
    find_connector,
    random_path,
)
from .flow import FarFlight, far_flight_example
from .scene import Scene
from .symmetry import SceneSymmetry, image_cycles, image_points, scene_symmetries
from .varpath import (
    PeriodicOrbit,
    StagnationError,
    TrajectoryPiece,
    VarPathError,
    check_periodic_batch,
    minimize_open,
    minimize_periodic,
)


def cycle_id(c: CyclicSequence) -> str:
    """Compact text form ``r_prev:l:r`` per state, ``;``-separated."""
    return ";".join(f"{s.r_prev}:{','.join(str(v) for v in s.l)}:{s.r}" for s in c.states)


def parse_cycle_id(text: str) -> CyclicSequence:
    states = []
    for part in text.split(";"):
        a, l, b = part.split(":")
        states.append(State(int(a), tuple(int(v) for v in l.split(",")), int(b)))
    return CyclicSequence(tuple(states))


@dataclass(frozen=True)
class RotationSample:
    vector: np.ndarray
    provenance: str  # "periodic", "admissible-piece" or "flow"
    source: str

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def to_dict(self) -> dict:
        return {"vector": self.vector.tolist(), "norm": self.norm, "provenance": self.provenance, "source": self.source}


def rotation_vector_periodic(orbit: PeriodicOrbit) -> RotationSample:
    return RotationSample(orbit.p / orbit.period_length, "periodic", cycle_id(orbit.cycle))


def rotation_vector_piece(piece: TrajectoryPiece, source: str = "") -> RotationSample:
    return RotationSample(piece.displacement / piece.length, "admissible-piece", source)


# ---------------------------------------------------------------------------
# convex hull of a cloud


@dataclass(frozen=True)
class Hull:
    """Convex hull of a point cloud, possibly lower-dimensional.

    ``vertices`` is counter-clockwise for planar hulls; ``facets`` index
    into ``vertices`` (edges in the plane, triangles in 3-space).
    """

    vertices: np.ndarray
    facets: tuple[tuple[int, ...], ...]
    dimension: int
    equations: np.ndarray | None  # rows (normal, offset) with normal . x + offset <= 0 inside

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        if self.equations is not None:
            return bool(np.all(self.equations[:, :-1] @ x + self.equations[:, -1] <= tol))
        # lower-dimensional hull: x must be a convex combination of the vertices
        from scipy.optimize import linprog

        V = self.vertices
        res = linprog(
            np.zeros(len(V)),
            A_eq=np.vstack([V.T, np.ones(len(V))]),
            b_eq=np.append(x, 1.0),
            bounds=[(0, None)] * len(V),
        )
        return bool(res.success)

    def max_norm(self) -> float:
        return float(np.linalg.norm(self.vertices, axis=1).max())


def _affine_rank(points: np.ndarray, tol: float = 1e-12) -> tuple[int, np.ndarray, np.ndarray]:
    center = points.mean(axis=0)
    _, s, vt = np.linalg.svd(points - center, full_matrices=False)
    scale = max(1.0, float(np.abs(points).max()))
    rank = int(np.sum(s > tol * scale * max(1, len(points))))
    return rank, center, vt[:rank]


def convex_hull(points: np.ndarray) -> Hull:
    """Hull of a 2- or 3-dimensional cloud, handling degenerate (flat) clouds."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    m = pts.shape[1]
    if m not in (2, 3):
        raise ValueError("hulls are computed for m in {2, 3} only; use support_values otherwise")
    rank, center, basis = _affine_rank(pts)
    if rank == 0:
        return Hull(pts[:1], (), 0, None)
    if rank == 1:
        t = (pts - center) @ basis[0]
        return Hull(pts[[int(np.argmin(t)), int(np.argmax(t))]], ((0, 1),), 1, None)
    if rank == 2 and m == 3:
        local = (pts - center) @ basis.T
        h = ConvexHull(local)
        return Hull(pts[h.vertices], (), 2, None)
    h = ConvexHull(pts)
    # re-index facets to the vertex list
    pos = {int(v): i for i, v in enumerate(h.vertices)}
    facets = tuple(tuple(pos[int(v)] for v in s) for s in h.simplices)
    return Hull(pts[h.vertices], facets, m, h.equations)


def support_values(points: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """``max_x <x, d>`` over the cloud, one value per direction row."""
    return (np.asarray(points) @ np.asarray(directions).T).max(axis=0)


# ---------------------------------------------------------------------------
# sampling


@dataclass
class RotationCloud:
    scene: Scene
    q_max: int
    J_max: int
    orbits: list[PeriodicOrbit]
    samples: list[RotationSample]
    failures: list[tuple[str, str]]  # (cycle id, reason)
    minimized: int  # orbits obtained by minimization (the rest are symmetry images)
    boundary_warning: bool
    hull: Hull | None = None
    support: np.ndarray | None = None

    @property
    def points(self) -> np.ndarray:
        return np.array([s.vector for s in self.samples]).reshape(-1, self.scene.m)

    @property
    def max_norm(self) -> float:
        return float(np.linalg.norm(self.points, axis=1).max(initial=0.0))

    @property
    def margin(self) -> float:
        """``1 - max norm`` over the samples."""
        return 1.0 - self.max_norm

    def contains_zero(self) -> bool:
        return bool(np.any(np.all(self.points == 0.0, axis=1)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        m = self.scene.m
        w.writerow([f"rho{i + 1}" for i in range(m)] + ["norm", "provenance", "source", "q", "length"])
        for s, o in zip(self.samples, self.orbits):
            w.writerow([f"{v:.17g}" for v in s.vector] + [f"{s.norm:.17g}", s.provenance, s.source, o.q, f"{o.period_length:.17g}"])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "q_max": self.q_max,
            "J_max": self.J_max,
            "n_samples": len(self.samples),
            "minimized": self.minimized,
            "failures": [list(f) for f in self.failures],
            "max_norm": self.max_norm,
            "margin": self.margin,
            "contains_zero": self.contains_zero(),
            "boundary_warning": self.boundary_warning,
            "hull_vertices": None if self.hull is None else self.hull.vertices.tolist(),
            "hull_facets": None if self.hull is None else [list(f) for f in self.hull.facets],
            "support": None if self.support is None else self.support.tolist(),
        }


def _minimize_robust(scene: Scene, c: CyclicSequence) -> PeriodicOrbit:
    # Newton from the geometric start converges for nearly every cycle;
    # relaxation sweeps are the fallback
    try:
        return minimize_periodic(scene, c, check=False, sweeps=0)
    except StagnationError:
        return minimize_periodic(scene, c, check=False, sweeps=200)


def periodic_orbits(
    scene: Scene,
    cycles: list[CyclicSequence],
    symmetries: list[SceneSymmetry] | None = None,
) -> tuple[list[PeriodicOrbit], list[tuple[str, str]], int]:
    """Minimize every cycle, reusing symmetry images of already minimized orbits.

    Every returned orbit (minimized or mapped) is re-verified in a batch
    check of residual, clearance and incidence. Returns
    ``(orbits, failures, number minimized)``; orbits keep the input order
    with failed cycles dropped.
    """
    index = {c: i for i, c in enumerate(cycles)}
    points: list[np.ndarray | None] = [None] * len(cycles)
    history: list[list[float]] = [[] for _ in cycles]
    failures: dict[int, str] = {}
    minimized = 0
    for i, c in enumerate(cycles):
        if points[i] is not None:
            continue
        try:
            orbit = _minimize_robust(scene, c)
        except VarPathError as exc:
            failures[i] = str(exc)
            continue
        minimized += 1
        points[i] = orbit.points
        history[i] = orbit.history
        if symmetries:
            for ci, recipe in image_cycles(symmetries, c):
                j = index.get(ci)
                if j is not None and points[j] is None:
                    points[j] = image_points(c, orbit.points, recipe)
    by_q: dict[int, list[int]] = {}
    for i, c in enumerate(cycles):
        if points[i] is not None:
            by_q.setdefault(c.q, []).append(i)
    orbits: dict[int, PeriodicOrbit] = {}
    for q, idx in by_q.items():
        check = check_periodic_batch(scene, [cycles[i] for i in idx], np.array([points[i] for i in idx]))
        ok = check.ok
        for b, i in enumerate(idx):
            if not ok[b]:
                failures[i] = (
                    f"verification failed: residual {check.residual[b]:.3e}, clearance {check.clearance[b]:.3e}, "
                    f"incidence {check.incidence[b]:.3e}"
                )
                continue
            orbits[i] = PeriodicOrbit(
                cycles[i], points[i], float(check.length[b]), float(check.residual[b]), float(check.clearance[b]), history[i]
            )
    out = [orbits[i] for i in range(len(cycles)) if i in orbits]
    fails = [(cycle_id(cycles[i]), failures[i]) for i in sorted(failures)]
    return out, fails, minimized


def sample_admissible_rotation_set(
    scene: Scene,
    q_max: int,
    J_max: int = 1,
    graph: TransitionGraph | None = None,
    use_symmetry: bool = True,
    limit: int | None = None,
    directions: np.ndarray | None = None,
) -> RotationCloud:
    """Rotation vectors of all periodic orbits with at most ``q_max`` reflections per period."""
    if graph is None:
        graph = build_transition_graph(scene, J_max)
    if graph.boundary_warning:
        warnings.warn(f"transition graph reached its cell cutoff J_max={graph.J_max}", stacklevel=2)
    cycles = enumerate_periodic(scene, graph, q_max, limit)
    syms = scene_symmetries(scene) if use_symmetry else None
    orbits, failures, minimized = periodic_orbits(scene, cycles, syms)
    samples = [rotation_vector_periodic(o) for o in orbits]
    cloud = RotationCloud(scene, q_max, graph.J_max, orbits, samples, failures, minimized, graph.boundary_warning)
    if samples and scene.m in (2, 3):
        cloud.hull = convex_hull(cloud.points)
    if directions is not None and samples:
        cloud.support = support_values(cloud.points, directions)
    return cloud


# ---------------------------------------------------------------------------
# convexity experiment


class BudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class ConvexityReport:
    u: RotationSample
    v: RotationSample
    t: float
    s: float  # realized length-weighted fraction of A blocks
    p: int  # number of A blocks
    q: int  # total number of blocks
    eps: float
    a_periods: int
    b_periods: int
    length_T: float
    length_S: float
    rho_Q: np.ndarray
    achieved_error: float
    budget: float
    budget_terms: dict
    displacement_defect: float  # |d(Q) - p d(T) - (q - p) d(S)|
    length_defect: float  # ||Q| - p|T| - (q - p)|S||
    defect_bound: float  # 4qd + 5q
    connectors: dict
    n_states: int
    residual: float
    clearance: float

    @property
    def passed(self) -> bool:
        return self.achieved_error <= self.eps and self.achieved_error <= self.budget

    def to_dict(self) -> dict:
        return {
            "u": self.u.to_dict(),
            "v": self.v.to_dict(),
            "t": self.t,
            "s": self.s,
            "p": self.p,
            "q": self.q,
            "eps": self.eps,
            "a_periods": self.a_periods,
            "b_periods": self.b_periods,
            "length_T": self.length_T,
            "length_S": self.length_S,
            "rho_Q": self.rho_Q.tolist(),
            "achieved_error": self.achieved_error,
            "budget": self.budget,
            "budget_terms": self.budget_terms,
            "displacement_defect": self.displacement_defect,
            "length_defect": self.length_defect,
            "defect_bound": self.defect_bound,
            "connectors": {k: [list(map(_jsonable, s)) for s in v] for k, v in self.connectors.items()},
            "n_states": self.n_states,
            "residual": self.residual,
            "clearance": self.clearance,
            "passed": self.passed,
        }


def _jsonable(x):
    return list(x) if isinstance(x, tuple) else x


def choose_weight(length_T: float, length_S: float, t: float, tol: float, q_cap: int = 10_000) -> tuple[int, int, float]:
    """Smallest ``q`` (then ``p``) with ``|f(p/q) - t| <= tol``, ``f(x) = |T|x / (|T|x + |S|(1-x))``."""
    for q in range(2, q_cap + 1):
        for p in range(1, q):
            x = p / q
            s = length_T * x / (length_T * x + length_S * (1 - x))
            if abs(s - t) <= tol:
                return p, q, s
    raise BudgetError(f"no block ratio p/q with q <= {q_cap} approximates t={t} within {tol}")


def _block_init(word: BlockWord, entries_k: np.ndarray, blocks: dict) -> np.ndarray:
    """Initial points for the entries of a block word from the blocks' periodic orbits."""
    n_entries = len(word.states) + 1
    m = entries_k.shape[1]
    init = np.full((n_entries, m), np.nan)
    bounds = list(word.seams) + [len(word.states)]
    for b, name in enumerate(word.labels):
        if name not in blocks:
            continue
        pts, ks = blocks[name]
        qb = len(pts)
        start = bounds[b]
        for n in range(start, bounds[b + 1]):
            i = (n - start + 1) % qb
            init[n + 1] = pts[i] - ks[i] + entries_k[n + 1]
        if start == 0:
            init[0] = pts[0] - ks[0] + entries_k[0]
    return init


def convexity_experiment(
    scene: Scene,
    A: CyclicSequence,
    B: CyclicSequence,
    t: float,
    eps: float,
    graph: TransitionGraph | None = None,
    J_max: int = 1,
    max_periods: int = 100_000,
) -> ConvexityReport:
    """Realize ``t u + (1 - t) v`` within ``eps`` by one trajectory piece of block type.

    ``u``, ``v`` are the rotation vectors of the periodic orbits of ``A`` and
    ``B``. Each block is the orbit's cycle repeated until its length reaches
    ``3 (16 d + 20) / eps``; the block counts ``p`` (A) and ``q - p`` (B)
    realize the weight; connectors of at most five arcs join blocks.
    """
    if not 0.0 < t <= 1.0:
        raise ValueError("t must lie in (0, 1]")
    if graph is None:
        graph = build_transition_graph(scene, J_max)
    oa = _minimize_robust(scene, A)
    ob = _minimize_robust(scene, B)
    u, v = rotation_vector_periodic(oa), rotation_vector_periodic(ob)
    d = scene.max_diameter
    need = 3.0 * (16.0 * d + 20.0) / eps
    a_periods = max(1, math.ceil(need / oa.period_length))
    b_periods = max(1, math.ceil(need / ob.period_length))
    if max(a_periods, b_periods) > max_periods:
        raise BudgetError(f"blocks would need {max(a_periods, b_periods)} periods (> {max_periods})")
    LT, LS = a_periods * oa.period_length, b_periods * ob.period_length
    dT, dS = a_periods * oa.p, b_periods * ob.p
    k = max(u.norm, v.norm)
    if t == 1.0:
        p, q, s = 1, 1, 1.0
    elif k == 0.0:
        p, q = 1, 2
        s = LT / (LT + LS)
    else:
        p, q, s = choose_weight(LT, LS, t, eps / (6.0 * k))

    C1 = find_connector(scene, graph, A.states[-1], A.states[0])
    C2 = find_connector(scene, graph, A.states[-1], B.states[0])
    C3 = find_connector(scene, graph, B.states[-1], B.states[0])
    if q == p:
        # t = 1: a single A block
        word = BlockWord(tuple(A.states) * a_periods, (0,), ("A",))
    else:
        word = concat_blocks(scene, A, B, p, q - p, C1, C2, C3, a_periods, b_periods)
    seq = word.sequence(scene.m)
    ks = np.array([e.k for e in seq.entries], dtype=float)
    blocks = {
        "A": (oa.points, np.array([e.k for e in A.entries.entries], dtype=float)),
        "B": (ob.points, np.array([e.k for e in B.entries.entries], dtype=float)),
    }
    init = _block_init(word, ks, blocks)
    piece = minimize_open(scene, seq, None, None, init=init, sweeps=0, check=False)
    rho_Q = piece.displacement / piece.length
    target = t * u.vector + (1.0 - t) * v.vector
    achieved = float(np.linalg.norm(rho_Q - target))
    x = p / q
    terms = {
        "block_mixing": (8.0 * d + 10.0) / (x * LT + (1.0 - x) * LS),
        "a_block_drift": s * float(np.linalg.norm(dT / LT - u.vector)),
        "b_block_drift": (1.0 - s) * float(np.linalg.norm(dS / LS - v.vector)),
        "weight_error": 2.0 * abs(s - t) * k,
    }
    return ConvexityReport(
        u=u,
        v=v,
        t=t,
        s=s,
        p=p,
        q=q,
        eps=eps,
        a_periods=a_periods,
        b_periods=b_periods,
        length_T=LT,
        length_S=LS,
        rho_Q=rho_Q,
        achieved_error=achieved,
        budget=sum(terms.values()),
        budget_terms=terms,
        displacement_defect=float(np.linalg.norm(piece.displacement - p * dT - (q - p) * dS)),
        length_defect=abs(piece.length - p * LT - (q - p) * LS),
        defect_bound=4.0 * q * d + 5.0 * q,
        connectors={"C1": C1, "C2": C2, "C3": C3},
        n_states=len(word.states),
        residual=piece.residual,
        clearance=piece.clearance,
    )


# ---------------------------------------------------------------------------
# density probe


@dataclass(frozen=True)
class DensityReport:
    target: np.ndarray
    nearest: RotationSample | None
    distance: float
    candidates: int
    minimized: int
    threshold: float

    @property
    def passed(self) -> bool:
        return self.distance <= self.threshold

    def to_dict(self) -> dict:
        return {
            "target": self.target.tolist(),
            "nearest": None if self.nearest is None else self.nearest.to_dict(),
            "distance": self.distance,
            "candidates": self.candidates,
            "minimized": self.minimized,
            "threshold": self.threshold,
            "passed": self.passed,
        }


def _combined_walks(orbits: list[PeriodicOrbit], q_max: int, target: np.ndarray, top_k: int):
    """Closed walks ``C1^a C2^b`` through a shared state, ranked by estimated rotation distance.

    The estimate ``(a p1 + b p2) / (a L1 + b L2)`` uses the minimized
    period lengths of the parts; gluing at a shared state changes the
    length by a bounded amount per seam, so it is a good predictor.
    """
    by_state: dict[State, list[tuple[tuple[State, ...], np.ndarray, float]]] = {}
    for o in orbits:
        st = o.cycle.states
        for i, s in enumerate(st):
            if st.index(s) == i:
                by_state.setdefault(s, []).append((st[i:] + st[:i], np.asarray(o.p, float), o.period_length))
    scored = []
    for s, items in by_state.items():
        P = np.array([it[1] for it in items])
        L = np.array([it[2] for it in items])
        Q = np.array([len(it[0]) for it in items])
        for a in range(1, q_max):
            for b in range(1, q_max):
                ok = (a * Q[:, None] + b * Q[None, :]) <= q_max
                if not ok.any():
                    continue
                est = (a * P[:, None, :] + b * P[None, :, :]) / (a * L[:, None] + b * L[None, :])[:, :, None]
                dist = np.where(ok, np.linalg.norm(est - target, axis=2), np.inf)
                np.fill_diagonal(dist, np.inf)
                flat = np.argsort(dist, axis=None)[:top_k]
                for f in flat:
                    x, y = np.unravel_index(f, dist.shape)
                    if np.isfinite(dist[x, y]):
                        scored.append((float(dist[x, y]), items[x][0] * a + items[y][0] * b))
    scored.sort(key=lambda t: (t[0], t[1]))
    out, seen = [], set()
    for d, states in scored:
        c = canonical_cycle(CyclicSequence(states))
        if c not in seen:
            seen.add(c)
            out.append(c)
        if len(out) >= top_k:
            break
    return out


def density_probe(
    scene: Scene,
    piece: TrajectoryPiece,
    q_max: int,
    graph: TransitionGraph,
    threshold: float = 0.05,
    base_q: int = 4,
    top_k: int = 64,
    min_segments: int = 100,
) -> DensityReport:
    """Distance from the piece's rotation estimate to the nearest sampled periodic rotation vector.

    The sample set holds every periodic orbit with at most ``base_q``
    reflections per period plus the ``top_k`` most promising closed walks
    ``C1^a C2^b`` (period at most ``q_max``) glued from those orbits at a
    shared state. The reported distance is therefore an upper bound on the
    distance to the full set of periodic samples with period at most
    ``q_max``.
    """
    n_seg = len(piece.type) - 1
    if n_seg < min_segments:
        raise ValueError(f"piece has {n_seg} segments, need at least {min_segments}")
    target = piece.displacement / piece.length
    base = sample_admissible_rotation_set(scene, min(base_q, q_max), graph=graph)
    best, best_d = None, math.inf
    for smp in base.samples:
        dist = float(np.linalg.norm(smp.vector - target))
        if dist < best_d:
            best, best_d = smp, dist
    tried = 0
    known = {o.cycle for o in base.orbits}
    for c in _combined_walks(base.orbits, q_max, target, top_k):
        if c in known:
            continue
        try:
            orbit = _minimize_robust(scene, c)
        except VarPathError:
            continue
        tried += 1
        smp = rotation_vector_periodic(orbit)
        dist = float(np.linalg.norm(smp.vector - target))
        if dist < best_d:
            best, best_d = smp, dist
    return DensityReport(target, best, best_d, len(base.samples) + tried, tried, threshold)


def random_admissible_piece(
    scene: Scene, graph: TransitionGraph, segments: int, seed: int = 0
) -> TrajectoryPiece:
    """Shortest piece with free ends along a random walk of the transition graph."""
    import random

    path = random_path(graph, segments, random.Random(seed))
    seq = graph.path_sequence(path)
    return minimize_open(scene, seq, None, None)


# ---------------------------------------------------------------------------
# proper inclusion


@dataclass(frozen=True)
class InclusionReport:
    delta: float
    max_periodic_norm: float
    n_periodic: int
    flight: FarFlight
    flow_sample: RotationSample

    @property
    def passed(self) -> bool:
        return self.delta > 0.0 and self.flow_sample.norm > 1.0 - self.delta and self.flight.clearance > 0.0

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "max_periodic_norm": self.max_periodic_norm,
            "n_periodic": self.n_periodic,
            "flight": self.flight.to_dict(),
            "flow_sample": self.flow_sample.to_dict(),
            "passed": self.passed,
        }


def proper_inclusion_check(
    scene: Scene, q_max: int, k: int, J_max: int = 1, cloud: RotationCloud | None = None
) -> InclusionReport:
    """Margin of the periodic cloud inside the unit ball versus a free-flight rotation sample."""
    if cloud is None:
        cloud = sample_admissible_rotation_set(scene, q_max, J_max)
    flight = far_flight_example(scene, k)
    sample = RotationSample(flight.ratio, "flow", f"far-flight k={flight.k}")
    return InclusionReport(cloud.margin, cloud.max_norm, len(cloud.samples), flight, sample)
