"""Lattice symmetries of a scene and their action on cycles and orbits.

A symmetry is an affine map ``x -> A x + b`` with ``A`` a signed permutation
matrix that carries the obstacle lattice onto itself:
``A c_r + b = c_{pi(r)} + z_r`` with integer ``z_r``. Together with time
reversal these map periodic orbits to periodic orbits of equal length, so
batch sampling only needs to minimize one orbit per class.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .admissible import CyclicSequence, State
from .scene import Scene


@dataclass(frozen=True)
class SceneSymmetry:
    A: np.ndarray  # signed permutation matrix (int)
    b: np.ndarray
    perm: tuple[int, ...]  # perm[r - 1] = image label of r
    z: np.ndarray  # z[r - 1] = cell offset of the image of ball r
    _memo: dict = field(default_factory=dict, compare=False, repr=False)

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.A, np.eye(len(self.b), dtype=int)) and not np.any(self.b)) and self.perm == tuple(
            range(1, len(self.perm) + 1)
        )

    def map_state(self, s: State) -> State:
        out = self._memo.get(s)
        if out is None:
            l = self.A @ np.asarray(s.l) + self.z[s.r - 1] - self.z[s.r_prev - 1]
            out = State(self.perm[s.r_prev - 1], tuple(int(v) for v in l), self.perm[s.r - 1])
            self._memo[s] = out
        return out

    def map_cycle(self, c: CyclicSequence) -> CyclicSequence:
        return CyclicSequence(tuple(self.map_state(s) for s in c.states))

    def map_points(self, c: CyclicSequence, points: np.ndarray) -> np.ndarray:
        """Orbit points of ``map_cycle(c)`` (same starting state) from those of ``c``."""
        r0 = c.states[0].r_prev
        return points @ self.A.T + self.b - self.z[r0 - 1]


def signed_permutations(m: int):
    for perm in itertools.permutations(range(m)):
        for signs in itertools.product((1, -1), repeat=m):
            A = np.zeros((m, m), dtype=int)
            for i, (j, sg) in enumerate(zip(perm, signs)):
                A[i, j] = sg
            yield A


def scene_symmetries(scene: Scene, tol: float = 1e-12) -> list[SceneSymmetry]:
    """All signed-permutation symmetries of the obstacle lattice (identity first)."""
    out = []
    c = scene.centers
    rho = scene.radii
    for A in signed_permutations(scene.m):
        img = c @ A.T
        for s in range(scene.n):
            if abs(rho[s] - rho[0]) > tol:
                continue
            b = c[s] - img[0]
            perm, z = [], []
            for r in range(scene.n):
                y = img[r] + b
                match = None
                for t in range(scene.n):
                    d = y - c[t]
                    if abs(rho[t] - rho[r]) <= tol and np.all(np.abs(d - np.round(d)) <= tol):
                        match = t
                        break
                if match is None or match + 1 in perm:
                    break
                perm.append(match + 1)
                z.append(np.round(y - c[match]).astype(int))
            else:
                out.append(SceneSymmetry(A, b, tuple(perm), np.array(z, dtype=int)))
    out.sort(key=lambda g: not g.is_identity())
    return out


def _cells(c: CyclicSequence) -> np.ndarray:
    """Cells ``k_0 = 0, k_1, ..., k_q = p`` of one period plus the closing entry."""
    steps = np.array([s.l for s in c.states], dtype=float)
    return np.vstack([np.zeros((1, steps.shape[1])), np.cumsum(steps, axis=0)])


def rotate_with_points(c: CyclicSequence, points: np.ndarray, shift: int) -> tuple[CyclicSequence, np.ndarray]:
    """Rotate the starting state by ``shift`` and re-base the orbit points to cell 0."""
    q = c.q
    shift %= q
    if shift == 0:
        return c, points
    k = _cells(c)
    pts = np.vstack([points[shift:], points[:shift] + k[q]])
    return c.rotated(shift), pts - k[shift]


def reverse_with_points(c: CyclicSequence, points: np.ndarray) -> tuple[CyclicSequence, np.ndarray]:
    """Time-reversed cycle (not canonicalized) with its orbit points."""
    q = c.q
    labels = [c.states[0].r_prev] + [s.r for s in c.states[:-1]]
    k = _cells(c)
    # reversed itinerary: entries q-1, ..., 0, then entry q-1 shifted by -p
    order = [(q - 1 - i) % q for i in range(q + 1)]
    ks = k[order]
    ks[q] -= k[q]
    states = tuple(
        State(labels[a], tuple(int(v) for v in kb - ka), labels[b])
        for a, b, ka, kb in zip(order, order[1:], ks, ks[1:])
    )
    return CyclicSequence(states), points[::-1] - k[q - 1]


def _canonical_shift(c: CyclicSequence) -> int:
    return min(range(c.q), key=lambda i: c.states[i:] + c.states[:i])


def canonical_with_points(c: CyclicSequence, points: np.ndarray) -> tuple[CyclicSequence, np.ndarray]:
    return rotate_with_points(c, points, _canonical_shift(c))


def image_cycles(symmetries: list[SceneSymmetry], c: CyclicSequence, reversal: bool = True):
    """Yield ``(canonical image cycle, recipe)``; pass the recipe to :func:`image_points`."""
    bases = [(c, False)]
    if reversal:
        bases.append((reverse_with_points(c, np.zeros((c.q, len(c.states[0].l))))[0], True))
    for g in symmetries:
        for cb, rev in bases:
            ci = g.map_cycle(cb)
            shift = _canonical_shift(ci)
            yield ci.rotated(shift), (g, rev, shift)


def image_points(c: CyclicSequence, points: np.ndarray, recipe) -> np.ndarray:
    g, rev, shift = recipe
    cb, pb = reverse_with_points(c, points) if rev else (c, points)
    return rotate_with_points(g.map_cycle(cb), g.map_points(cb, pb), shift)[1]


def orbit_images(
    symmetries: list[SceneSymmetry], c: CyclicSequence, points: np.ndarray, reversal: bool = True
) -> list[tuple[CyclicSequence, np.ndarray]]:
    """Canonical images of an orbit under every symmetry (and time reversal)."""
    return [(ci, image_points(c, points, recipe)) for ci, recipe in image_cycles(symmetries, c, reversal)]
