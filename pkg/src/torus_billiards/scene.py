"""Ball obstacles on the m-torus and their lattice of translates in the cover.

Obstacle labels are 1-based everywhere in the public API; a translated
obstacle is named by a :class:`LatticeObstacleId` ``(k, r)`` whose ball is
centered at ``center[r] + k``.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

#: Upper bound on obstacle diameters.
DIAMETER_BOUND = math.sqrt(2.0) / 4.0


class DegenerateHullError(ValueError):
    """Raised when the convex hull of two identical balls is requested."""


class LatticeObstacleId(NamedTuple):
    k: tuple[int, ...]
    r: int

    def shifted(self, z: Sequence[int]) -> "LatticeObstacleId":
        return LatticeObstacleId(tuple(a + int(b) for a, b in zip(self.k, z)), self.r)


def lid(k: Sequence[int], r: int) -> LatticeObstacleId:
    """Shorthand constructor normalizing ``k`` to a tuple of ints."""
    return LatticeObstacleId(tuple(int(a) for a in k), int(r))


@dataclass(frozen=True)
class Obstacle:
    center: tuple[float, ...]
    radius: float

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius


@dataclass(frozen=True)
class Scene:
    """N ball obstacles in the fundamental cell ``[0, 1]^m``.

    Only syntactic well-formedness is enforced here; the geometric
    assumptions are checked (and reported) by :func:`validate_scene`.
    """

    m: int
    obstacles: tuple[Obstacle, ...]
    tolerance: float = 1e-12
    centers: np.ndarray = field(init=False, repr=False, compare=False)
    radii: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"torus dimension must be an integer >= 2, got {self.m!r}")
        obstacles = tuple(
            o if isinstance(o, Obstacle) else Obstacle(tuple(o[0]), o[1]) for o in self.obstacles
        )
        if not obstacles:
            raise ValueError("scene needs at least one obstacle")
        for i, o in enumerate(obstacles, start=1):
            if len(o.center) != self.m:
                raise ValueError(f"obstacle {i}: center has {len(o.center)} coordinates, expected {self.m}")
            if not all(math.isfinite(c) for c in o.center):
                raise ValueError(f"obstacle {i}: non-finite center")
            if not (o.radius > 0 and math.isfinite(o.radius)):
                raise ValueError(f"obstacle {i}: radius must be positive, got {o.radius!r}")
        if self.tolerance < 0:
            raise ValueError("tolerance must be nonnegative")
        object.__setattr__(self, "obstacles", obstacles)
        centers = np.array([o.center for o in obstacles], dtype=float)
        radii = np.array([o.radius for o in obstacles], dtype=float)
        centers.setflags(write=False)
        radii.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radii", radii)

    @classmethod
    def from_dict(cls, data: dict) -> "Scene":
        obstacles = tuple(
            Obstacle(tuple(float(c) for c in o["center"]), float(o["radius"])) for o in data["obstacles"]
        )
        return cls(int(data["m"]), obstacles, float(data.get("tolerance", 1e-12)))

    @classmethod
    def load(cls, path: str | Path) -> "Scene":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "obstacles": [{"center": list(o.center), "radius": o.radius} for o in self.obstacles],
            "tolerance": self.tolerance,
        }

    @property
    def n(self) -> int:
        return len(self.obstacles)

    @property
    def labels(self) -> range:
        return range(1, self.n + 1)

    @property
    def max_diameter(self) -> float:
        return 2.0 * float(self.radii.max())

    def center(self, ob: LatticeObstacleId) -> np.ndarray:
        return self.centers[ob.r - 1] + np.asarray(ob.k, dtype=float)

    def radius(self, ob: LatticeObstacleId) -> float:
        return float(self.radii[ob.r - 1])

    def contained_in_cells(self) -> bool:
        """True when every ball lies strictly inside the open unit cube."""
        lo = self.centers - self.radii[:, None]
        hi = self.centers + self.radii[:, None]
        return bool(np.all(lo > 0.0) and np.all(hi < 1.0))

    def ids_near_box(self, lo: np.ndarray, hi: np.ndarray, pad: float = 0.0) -> Iterator[LatticeObstacleId]:
        """All lattice obstacles whose ball meets the box ``[lo, hi]`` inflated by ``pad``."""
        for idx in range(self.n):
            c = self.centers[idx]
            reach = self.radii[idx] + pad
            ranges = [
                range(math.ceil(lo[a] - reach - c[a]), math.floor(hi[a] + reach - c[a]) + 1)
                for a in range(self.m)
            ]
            for k in itertools.product(*ranges):
                yield LatticeObstacleId(k, idx + 1)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    witness: str


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]

    @property
    def valid(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "checks": [{"name": c.name, "passed": c.passed, "witness": c.witness} for c in self.checks],
        }


def validate_scene(scene: Scene) -> ValidationReport:
    """Check the standing assumptions on a scene and report every check.

    Check names:

    * ``diameter[r]`` -- ``2 * radius < sqrt(2)/4``
    * ``containment[r]`` -- ball strictly inside the open unit cube
    * ``projection[axis=i; r,s]`` -- per-axis projections of distinct
      obstacles are disjoint (axes are 1-based)
    * ``no_eclipse[t; r,s]`` -- obstacle ``t`` misses the hull of ``r`` and ``s``
    """
    checks = []
    for r, o in zip(scene.labels, scene.obstacles):
        checks.append(
            Check(
                f"diameter[{r}]",
                o.diameter < DIAMETER_BOUND,
                f"diameter {o.diameter:.17g} vs bound {DIAMETER_BOUND:.17g}",
            )
        )
    for r, o in zip(scene.labels, scene.obstacles):
        lo = min(c - o.radius for c in o.center)
        hi = max(c + o.radius for c in o.center)
        checks.append(
            Check(f"containment[{r}]", lo > 0.0 and hi < 1.0, f"extent [{lo:.17g}, {hi:.17g}]")
        )
    for axis in range(scene.m):
        for r, s in itertools.combinations(scene.labels, 2):
            a, b = scene.obstacles[r - 1], scene.obstacles[s - 1]
            ia = (a.center[axis] - a.radius, a.center[axis] + a.radius)
            ib = (b.center[axis] - b.radius, b.center[axis] + b.radius)
            disjoint = ia[1] < ib[0] or ib[1] < ia[0]
            checks.append(
                Check(
                    f"projection[axis={axis + 1}; {r},{s}]",
                    disjoint,
                    f"[{ia[0]:.6g}, {ia[1]:.6g}] vs [{ib[0]:.6g}, {ib[1]:.6g}]",
                )
            )
    zero = (0,) * scene.m
    for r, s in itertools.combinations(scene.labels, 2):
        for t in scene.labels:
            if t in (r, s):
                continue
            A, B, C = lid(zero, r), lid(zero, s), lid(zero, t)
            gap = hull_distance(scene.center(C), A, B, scene) - scene.radius(C)
            checks.append(
                Check(f"no_eclipse[{t}; {r},{s}]", gap > scene.tolerance, f"clearance {gap:.17g}")
            )
    return ValidationReport(tuple(checks))


# ---------------------------------------------------------------------------
# hull of two balls

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_min(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    best = min((f(a), a), (fc, c), (fd, d), (f(b), b))
    return best[1], best[0]


def ball_hull_distance(p, ca, ra: float, cb, rb: float, tol: float = 1e-14) -> float:
    """Distance from ``p`` to the convex hull of two balls, clamped at 0.

    The hull is the union of the balls interpolating centers and radii
    linearly, so the distance is a 1-D convex minimization over the
    interpolation weight.
    """
    p = np.asarray(p, dtype=float)
    ca = np.asarray(ca, dtype=float)
    cb = np.asarray(cb, dtype=float)
    axis = cb - ca
    L2 = float(axis @ axis)
    if L2 == 0.0:
        if ra == rb:
            raise DegenerateHullError("degenerate hull: identical balls")
        return max(0.0, float(np.linalg.norm(p - ca)) - max(ra, rb))
    w = p - ca
    if ra == rb:
        t = min(1.0, max(0.0, float(w @ axis) / L2))
        return max(0.0, float(np.linalg.norm(w - t * axis)) - ra)
    ww = float(w @ w)
    wa = float(w @ axis)

    def f(t):
        return math.sqrt(max(ww - 2.0 * t * wa + t * t * L2, 0.0)) - (ra + t * (rb - ra))

    _, val = _golden_min(f, 0.0, 1.0, tol)
    return max(0.0, val)


def hull_distance(p, A: LatticeObstacleId, B: LatticeObstacleId, scene: Scene) -> float:
    """Distance from ``p`` to ``conv(ball_A U ball_B)``; 0 iff ``p`` is in the hull."""
    return ball_hull_distance(p, scene.center(A), scene.radius(A), scene.center(B), scene.radius(B))


def is_between(C: LatticeObstacleId, A: LatticeObstacleId, B: LatticeObstacleId, scene: Scene) -> bool:
    """Whether obstacle ``C`` has a common point with the hull of ``A`` and ``B``.

    Tangency counts as between.
    """
    return hull_distance(scene.center(C), A, B, scene) <= scene.radius(C) + scene.tolerance


def blocking_obstacles(
    scene: Scene, A: LatticeObstacleId, B: LatticeObstacleId, first_only: bool = True
) -> list[LatticeObstacleId]:
    """Lattice obstacles other than ``A`` and ``B`` lying between them.

    The search window is every lattice ball meeting the hull's bounding box,
    which is finite and sound for balls.
    """
    ca, cb = scene.center(A), scene.center(B)
    ra, rb = scene.radius(A), scene.radius(B)
    lo = np.minimum(ca - ra, cb - rb)
    hi = np.maximum(ca + ra, cb + rb)
    axis = cb - ca
    L2 = float(axis @ axis)
    rmax = max(ra, rb)
    found = []
    for C in scene.ids_near_box(lo, hi, scene.tolerance):
        if C == A or C == B:
            continue
        cc = scene.center(C)
        rc = scene.radius(C)
        # capsule of radius max(ra, rb) contains the hull
        w = cc - ca
        t = 0.0 if L2 == 0.0 else min(1.0, max(0.0, float(w @ axis) / L2))
        if float(np.linalg.norm(w - t * axis)) - rmax > rc + scene.tolerance:
            continue
        if ball_hull_distance(cc, ca, ra, cb, rb) <= rc + scene.tolerance:
            found.append(C)
            if first_only:
                break
    return found


# ---------------------------------------------------------------------------
# rays against the obstacle lattice


class RayHit(NamedTuple):
    t: float
    obstacle: LatticeObstacleId
    impact: float  # distance from the ball center to the ray's line


class RayResult(NamedTuple):
    hit: RayHit | None
    grazing: RayHit | None  # near-tangent candidate preceding any hit
    cells: int


def _backend(x):
    if isinstance(x, float):
        return math.sqrt, math.floor
    import mpmath

    return mpmath.sqrt, lambda a: int(mpmath.floor(a))


def cast_ray(
    scene: Scene,
    origin,
    direction,
    exclude: LatticeObstacleId | None = None,
    max_cells: int = 1000,
    graze_tol: float = 1e-10,
    t_max: float = math.inf,
) -> RayResult:
    """First ball hit by the ray ``origin + t * direction`` (``t > 0``).

    Cells are visited in order of entry along the ray; the balls of each
    visited cell (plus a one-cell halo when some ball pokes out of its cell)
    are intersected exactly. ``direction`` must be a unit vector.

    Coordinates may be floats or ``mpmath.mpf``; arithmetic stays in the
    type of ``origin``.
    """
    m = scene.m
    x = [a if not isinstance(a, (np.floating, int)) else float(a) for a in origin]
    v = [a if not isinstance(a, (np.floating, int)) else float(a) for a in direction]
    sqrt, floor = _backend(x[0])
    halo = 0 if scene.contained_in_cells() else 1
    offsets = list(itertools.product(range(-halo, halo + 1), repeat=m))
    cell = [floor(a) for a in x]
    step = [1 if a > 0 else -1 for a in v]
    inv = [1 / abs(a) if a != 0 else math.inf for a in v]
    t_next = [
        ((cell[i] + 1 - x[i]) if v[i] > 0 else (x[i] - cell[i])) * inv[i] if v[i] != 0 else math.inf
        for i in range(m)
    ]
    centers = [tuple(float(c) for c in row) for row in scene.centers]
    radii = [float(r) for r in scene.radii]
    tested: set[tuple] = set()
    best: RayHit | None = None
    graze: RayHit | None = None
    visited = 0
    while visited < max_cells:
        visited += 1
        t_exit = min(t_next)
        for off in offsets:
            key = tuple(c + o for c, o in zip(cell, off))
            if key in tested:
                continue
            tested.add(key)
            for i, (c, rho) in enumerate(zip(centers, radii)):
                w = [c[a] + key[a] - x[a] for a in range(m)]
                along = sum(w[a] * v[a] for a in range(m))
                if along <= 0:
                    continue
                ob = LatticeObstacleId(key, i + 1)
                if exclude is not None and ob == exclude:
                    continue
                perp = [w[a] - along * v[a] for a in range(m)]
                b = sqrt(sum(p * p for p in perp))
                if abs(b - rho) < graze_tol:
                    if graze is None or along < graze.t:
                        graze = RayHit(along, ob, b)
                    continue
                if b >= rho:
                    continue
                dist = sqrt(sum(a * a for a in w))
                root = sqrt((rho - b) * (rho + b))
                # stable form of along - root
                t_hit = (dist - rho) * (dist + rho) / (along + root)
                if t_hit <= 0:
                    continue
                if best is None or t_hit < best.t:
                    best = RayHit(t_hit, ob, b)
        if best is not None and best.t <= t_exit:
            break
        if t_exit > t_max:
            break
        axis = min(range(m), key=t_next.__getitem__)
        cell[axis] += step[axis]
        t_next[axis] += inv[axis]
        if len(tested) > 64 * len(offsets):
            tested = {k for k in tested if max(abs(a - b) for a, b in zip(k, cell)) <= halo}
    if best is not None and best.t > t_max:
        best = None
    if graze is not None and best is not None and graze.t > best.t:
        graze = None
    return RayResult(best, graze, visited)


def segment_clearance(scene: Scene, a, b, exclude: Sequence[LatticeObstacleId] = ()) -> tuple[float, LatticeObstacleId | None]:
    """Smallest gap between segment ``[a, b]`` and any lattice ball not in ``exclude``.

    Negative values mean the segment enters that ball. The value is exact:
    every ball that could be nearest is examined.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    seg = b - a
    L2 = float(seg @ seg)
    best, who = math.inf, None
    for ob in scene.ids_near_box(np.minimum(a, b), np.maximum(a, b), clearance_pad(scene.m)):
        if ob in exclude:
            continue
        w = scene.center(ob) - a
        t = 0.0 if L2 == 0.0 else min(1.0, max(0.0, float(w @ seg) / L2))
        gap = float(np.linalg.norm(w - t * seg)) - scene.radius(ob)
        if gap < best:
            best, who = gap, ob
    return best, who



def clearance_pad(m: int) -> float:
    """Every point is within this distance of a copy of every center, hence of the nearest ball."""
    return math.sqrt(m) / 2.0


def _balls_in_box(scene: Scene, lo: np.ndarray, hi: np.ndarray, pad: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Cells and labels of all lattice balls meeting the box ``[lo, hi]`` inflated by ``pad``."""
    ks, labels = [], []
    for idx in range(scene.n):
        c = scene.centers[idx]
        rho = scene.radii[idx] + pad
        axes = [np.arange(math.ceil(lo[a] - rho - c[a]), math.floor(hi[a] + rho - c[a]) + 1) for a in range(scene.m)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, scene.m)
        ks.append(grid)
        labels.append(np.full(len(grid), idx + 1))
    return np.vstack(ks).astype(int), np.concatenate(labels)


def path_clearance(
    scene: Scene, points: np.ndarray, owners: Sequence[LatticeObstacleId | None], chunk: int = 16
) -> tuple[float, int, LatticeObstacleId | None]:
    """Smallest gap between the segments of a broken path and non-incident lattice balls.

    ``owners[i]`` is the ball carrying ``points[i]`` (or None); each segment
    ignores the balls at its two ends. Returns ``(gap, segment, ball)``;
    the gap is exact as in :func:`segment_clearance`.
    """
    pts = np.asarray(points, dtype=float)
    m = scene.m
    own_k = np.array([o.k if o is not None else (0,) * m for o in owners], dtype=int).reshape(len(owners), m)
    own_r = np.array([o.r if o is not None else 0 for o in owners], dtype=int)
    best, best_seg, best_ob = math.inf, -1, None
    for lo_i in range(0, len(pts) - 1, chunk):
        hi_i = min(lo_i + chunk, len(pts) - 1)
        block = pts[lo_i:hi_i + 1]
        ks, labels = _balls_in_box(scene, block.min(axis=0), block.max(axis=0), clearance_pad(m))
        if len(labels) == 0:
            continue
        centers = scene.centers[labels - 1] + ks
        radii = scene.radii[labels - 1]
        a = block[:-1]
        seg = block[1:] - a
        L2 = np.einsum("ij,ij->i", seg, seg)
        w = centers[None, :, :] - a[:, None, :]
        t = np.einsum("skm,sm->sk", w, seg) / np.where(L2 > 0, L2, 1.0)[:, None]
        t = np.clip(t, 0.0, 1.0)
        gap = np.linalg.norm(w - t[:, :, None] * seg[:, None, :], axis=2) - radii[None, :]
        for end in (0, 1):
            idx = np.arange(lo_i, hi_i) + end
            same = (labels[None, :] == own_r[idx][:, None]) & np.all(ks[None, :, :] == own_k[idx][:, None, :], axis=2)
            gap = np.where(same, np.inf, gap)
        s, k = np.unravel_index(int(np.argmin(gap)), gap.shape)
        if gap[s, k] < best:
            best = float(gap[s, k])
            best_seg = lo_i + int(s)
            best_ob = LatticeObstacleId(tuple(int(v) for v in ks[k]), int(labels[k]))
    return best, best_seg, best_ob


def batch_segment_clearance(
    scene: Scene,
    a: np.ndarray,
    b: np.ndarray,
    owner_a: tuple[np.ndarray, np.ndarray],
    owner_b: tuple[np.ndarray, np.ndarray],
    chunk: int = 4096,
) -> np.ndarray:
    """Gap of each segment ``[a_i, b_i]`` to the nearest lattice ball other than its end balls.

    Owners are ``(cells (S, m), labels (S,))``; label 0 means no owner.
    Candidate balls come from a window of cells covering every segment's
    bounding box, so work is proportional to segments times window size.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m = scene.m
    out = np.empty(len(a))
    lo = np.floor(np.minimum(a, b)).astype(int)
    span = int((np.ceil(np.maximum(a, b)).astype(int) - lo).max(initial=0))
    extra = math.ceil(clearance_pad(m))
    offs = np.array(list(itertools.product(range(-1 - extra, span + 1 + extra), repeat=m)), dtype=int)
    cand_off = np.repeat(offs, scene.n, axis=0)
    cand_lab = np.tile(np.arange(1, scene.n + 1), len(offs))
    base_c = scene.centers[cand_lab - 1] + cand_off
    rad = scene.radii[cand_lab - 1]
    for i in range(0, len(a), chunk):
        sl = slice(i, i + chunk)
        A, seg, base = a[sl], b[sl] - a[sl], lo[sl]
        L2 = np.einsum("ij,ij->i", seg, seg)
        w = base[:, None, :] + base_c[None, :, :] - A[:, None, :]
        t = np.clip(np.einsum("skm,sm->sk", w, seg) / np.where(L2 > 0, L2, 1.0)[:, None], 0.0, 1.0)
        gap = np.linalg.norm(w - t[:, :, None] * seg[:, None, :], axis=2) - rad[None, :]
        cells = base[:, None, :] + cand_off[None, :, :]
        for ok, orr in (owner_a, owner_b):
            same = (cand_lab[None, :] == orr[sl][:, None]) & np.all(cells == ok[sl][:, None, :], axis=2)
            gap = np.where(same, np.inf, gap)
        out[sl] = gap.min(axis=1)
    return out

# ---------------------------------------------------------------------------
# escape bound


@dataclass(frozen=True)
class EscapeBound:
    bounded: bool
    M: float | None
    max_hit: float
    margin: float
    witness_direction: tuple[float, ...] | None
    directions: int

    @property
    def certified(self) -> bool:
        """True when ``M`` is a finite bound valid for every direction, not just the sampled ones."""
        return self.bounded and self.M is not None and math.isfinite(self.M)

    def to_dict(self) -> dict:
        return {
            "bounded": self.bounded,
            "certified": self.certified,
            "M": self.M,
            "max_hit": self.max_hit,
            "margin": self.margin,
            "witness_direction": None if self.witness_direction is None else list(self.witness_direction),
            "directions": self.directions,
        }


def _direction_grid(m: int, resolution: int) -> tuple[np.ndarray, float]:
    """Unit directions and an angular covering radius for them."""
    if m == 2:
        th = 2.0 * math.pi * np.arange(resolution) / resolution
        return np.column_stack([np.cos(th), np.sin(th)]), math.pi / resolution
    # cell-centered grid on every face of the cube [-1, 1]^m
    ticks = -1.0 + (2.0 * np.arange(resolution) + 1.0) / resolution
    dirs = []
    for axis in range(m):
        for sign in (-1.0, 1.0):
            for rest in itertools.product(ticks, repeat=m - 1):
                pt = np.insert(np.array(rest), axis, sign)
                dirs.append(pt / np.linalg.norm(pt))
    return np.array(dirs), math.sqrt(m - 1) / resolution


def escape_bound(scene: Scene, r: int, direction_resolution: int, cutoff: int = 1000) -> EscapeBound:
    """Sampled bound on first-hit distances of rays from the center of ``O(0, r)``.

    For every sampled direction the ray is traced into the lattice. A ball
    hit with impact parameter ``b`` and center distance ``D`` is still hit by
    every ray within the grid's covering angle ``a`` provided
    ``b + D sin(a) < radius``; the certified ``M`` is the largest such ``D``
    over the grid, or unbounded if some sampled ray escapes ``cutoff`` cells.
    """
    if direction_resolution < 1:
        raise ValueError("direction_resolution must be positive")
    start = lid((0,) * scene.m, r)
    x = scene.center(start)
    dirs, alpha = _direction_grid(scene.m, direction_resolution)
    sin_a = math.sin(min(alpha, math.pi / 2))
    max_hit = 0.0
    certified = 0.0
    for v in dirs:
        t_from = 0.0
        robust = None
        first = None
        origin = x.copy()
        skip = start
        cells = 0
        while robust is None and cells < cutoff:
            res = cast_ray(scene, origin, v, exclude=skip, max_cells=cutoff - cells)
            cells += res.cells
            hit = res.hit or res.grazing
            if hit is None:
                break
            t_total = t_from + hit.t
            if first is None:
                first = t_total
            D = float(np.linalg.norm(scene.center(hit.obstacle) - x))
            if hit.impact + D * sin_a < scene.radius(hit.obstacle):
                robust = D
                break
            # keep walking along the same ray past this ball
            t_from = float(np.dot(scene.center(hit.obstacle) - x, v))
            origin = x + t_from * v
            skip = hit.obstacle
        if first is None:
            return EscapeBound(False, None, max_hit, math.inf, tuple(float(c) for c in v), len(dirs))
        max_hit = max(max_hit, first)
        if robust is None:
            # the direction grid is too coarse to certify this cone
            certified = math.inf
        else:
            certified = max(certified, robust)
    return EscapeBound(True, certified, max_hit, certified - max_hit, None, len(dirs))
