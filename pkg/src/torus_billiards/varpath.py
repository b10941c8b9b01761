"""Trajectory pieces and periodic orbits as minimizers of broken-path length.

A piece of prescribed type is the shortest polygonal path whose vertices
lie on the boundary spheres of the typed obstacles, in order. Minimizers
satisfy the reflection law at every interior vertex. The optimizer works on
the product of spheres: a few sweeps of per-vertex relaxation, then
Riemannian Newton on all vertices at once with a sparse Hessian and a
monotone backtracking line search.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .admissible import CyclicSequence, SymbolicSequence, check_admissible
from .scene import LatticeObstacleId, Scene, batch_segment_clearance, path_clearance

RESIDUAL_TOL = 1e-10
GRAZE_TOL = 1e-8
ON_SPHERE_TOL = 1e-10


class VarPathError(RuntimeError):
    pass


class NotAdmissibleError(VarPathError):
    pass


class StagnationError(VarPathError):
    def __init__(self, residual: float, message: str = ""):
        super().__init__(message or f"optimizer stagnated at reflection residual {residual:.3e}")
        self.residual = residual


class ClearanceError(VarPathError):
    def __init__(self, segment: int, obstacle: LatticeObstacleId, gap: float):
        super().__init__(f"segment {segment} meets obstacle {obstacle} (gap {gap:.3e})")
        self.segment = segment
        self.obstacle = obstacle
        self.gap = gap


class GrazingError(VarPathError):
    pass


@dataclass
class TrajectoryPiece:
    type: SymbolicSequence
    points: np.ndarray  # one vertex per typed obstacle
    start: np.ndarray | None = None  # free-space anchors, when given
    end: np.ndarray | None = None
    length: float = 0.0
    displacement: np.ndarray = field(default_factory=lambda: np.zeros(0))
    residual: float = 0.0
    clearance: float = math.inf
    history: list = field(default_factory=list, repr=False)

    @property
    def path(self) -> np.ndarray:
        parts = [self.points]
        if self.start is not None:
            parts.insert(0, self.start[None, :])
        if self.end is not None:
            parts.append(self.end[None, :])
        return np.vstack(parts)

    @property
    def rotation(self) -> np.ndarray:
        return self.displacement / self.length

    def to_dict(self) -> dict:
        return {
            "type": self.type.to_rows(),
            "points": self.path.tolist(),
            "length": self.length,
            "displacement": self.displacement.tolist(),
            "residual": self.residual,
            "clearance": self.clearance,
        }


@dataclass
class PeriodicOrbit:
    cycle: CyclicSequence
    points: np.ndarray  # x_0 .. x_{q-1}; x_q = x_0 + p
    period_length: float
    residual: float
    clearance: float = math.inf
    history: list = field(default_factory=list, repr=False)

    @property
    def q(self) -> int:
        return self.cycle.q

    @property
    def p(self) -> np.ndarray:
        return np.asarray(self.cycle.p, dtype=float)

    @property
    def rotation_vector(self) -> np.ndarray:
        return self.p / self.period_length

    def to_dict(self) -> dict:
        return {
            **self.cycle.to_dict(),
            "points": self.points.tolist(),
            "period_length": self.period_length,
            "rotation_vector": self.rotation_vector.tolist(),
            "residual": self.residual,
            "clearance": self.clearance,
        }


# ---------------------------------------------------------------------------
# chain geometry


@dataclass
class _Chain:
    """Vertices of a broken path; ``free[j]`` vertices move on their spheres."""

    x: np.ndarray
    centers: np.ndarray
    radii: np.ndarray
    free: np.ndarray  # bool
    cyclic: bool = False
    shift: np.ndarray | None = None  # closure offset for cyclic chains

    @property
    def n(self) -> int:
        return len(self.x)

    def segments(self, x=None) -> np.ndarray:
        x = self.x if x is None else x
        if self.cyclic:
            nxt = np.vstack([x[1:], x[:1] + self.shift])
            return nxt - x
        return x[1:] - x[:-1]

    def length(self, x=None) -> float:
        return float(np.linalg.norm(self.segments(x), axis=1).sum())

    def neighbors(self, j: int):
        """(previous vertex or None, next vertex or None) honoring the closure."""
        n = self.n
        x = self.x
        if self.cyclic:
            prev = x[j - 1] - (self.shift if j == 0 else 0.0)
            nxt = x[j + 1] if j + 1 < n else x[0] + self.shift
            return prev, nxt
        return (x[j - 1] if j > 0 else None), (x[j + 1] if j + 1 < n else None)

    def gradient(self, x=None) -> np.ndarray:
        seg = self.segments(x)
        u = seg / np.linalg.norm(seg, axis=1)[:, None]
        g = np.zeros_like(self.x)
        if self.cyclic:
            g -= u
            g += np.roll(u, 1, axis=0)
        else:
            g[:-1] -= u
            g[1:] += u
        return g


def _tangent_basis(nrm: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the complement of unit ``nrm``."""
    m = len(nrm)
    if m == 2:
        return np.array([[-nrm[1]], [nrm[0]]])
    q, _ = np.linalg.qr(np.column_stack([nrm, np.eye(m)]))
    return q[:, 1:m]


def reflection_defects(chain: _Chain) -> np.ndarray:
    """Angle between the mirrored incoming direction and the outgoing one, per vertex.

    Pinned vertices and path ends get 0.
    """
    x = chain.x
    n = chain.n
    out = np.zeros(n)
    seg = chain.segments()
    u = seg / np.linalg.norm(seg, axis=1)[:, None]
    if chain.cyclic:
        idx = np.arange(n)
        vin, vout = np.roll(u, 1, axis=0), u
    else:
        idx = np.arange(1, n - 1)
        vin, vout = u[:-1], u[1:]
    if len(idx) == 0:
        return out
    nrm = (x[idx] - chain.centers[idx]) / chain.radii[idx, None]
    mirrored = vin - 2.0 * np.einsum("ij,ij->i", vin, nrm)[:, None] * nrm
    gap = np.linalg.norm(mirrored - vout, axis=1)
    out[idx] = 2.0 * np.arcsin(np.minimum(1.0, gap / 2.0))
    out[~chain.free] = 0.0
    return out


def _incidence(chain: _Chain) -> float:
    """Smallest |cos| between a segment touching a free vertex and its normal."""
    worst = math.inf
    for j in np.flatnonzero(chain.free):
        nrm = (chain.x[j] - chain.centers[j]) / chain.radii[j]
        for nb in chain.neighbors(j):
            if nb is None:
                continue
            d = nb - chain.x[j]
            worst = min(worst, abs(float(d @ nrm)) / float(np.linalg.norm(d)))
    return worst


def _project(chain: _Chain, x: np.ndarray) -> np.ndarray:
    d = x - chain.centers
    # fixed anchors sit on their own "center"; they are passed through below
    nrm = np.linalg.norm(d, axis=1)
    d /= np.where(nrm > 0, nrm, 1.0)[:, None]
    y = chain.centers + chain.radii[:, None] * d
    return np.where(chain.free[:, None], y, x)


def _tangent_bases(normals: np.ndarray) -> np.ndarray:
    n, m = normals.shape
    if m == 2:
        return np.stack([-normals[:, 1], normals[:, 0]], axis=1)[:, :, None]
    return np.array([_tangent_basis(v) for v in normals])


def _riemannian_system(chain: _Chain, dense: bool):
    """Tangent bases, Riemannian gradient and Hessian over the free vertices."""
    x = chain.x
    n, m = x.shape
    k = m - 1
    free_idx = np.flatnonzero(chain.free)
    slot = -np.ones(n, dtype=int)
    slot[free_idx] = np.arange(len(free_idx))
    normals = (x - chain.centers) / chain.radii[:, None]
    E = _tangent_bases(normals)  # (n, m, k)
    eg = chain.gradient()
    seg = chain.segments()
    nseg = np.linalg.norm(seg, axis=1)
    u = seg / nseg[:, None]
    S = len(seg)
    sa = np.arange(S)
    sb = (sa + 1) % n if chain.cyclic else sa + 1
    P = (np.eye(m)[None] - u[:, :, None] * u[:, None, :]) / nseg[:, None, None]
    Daa = np.einsum("sik,sij,sjl->skl", E[sa], P, E[sa])
    Dbb = np.einsum("sik,sij,sjl->skl", E[sb], P, E[sb])
    Dab = -np.einsum("sik,sij,sjl->skl", E[sa], P, E[sb])
    curv = np.einsum("ij,ij->i", eg, normals) / chain.radii
    Dcc = -curv[:, None, None] * np.eye(k)[None]
    rows_v = np.concatenate([sa, sb, sa, sb, np.arange(n)])
    cols_v = np.concatenate([sa, sb, sb, sa, np.arange(n)])
    blocks = np.concatenate([Daa, Dbb, Dab, np.transpose(Dab, (0, 2, 1)), Dcc])
    keep = (slot[rows_v] >= 0) & (slot[cols_v] >= 0)
    rows_v, cols_v, blocks = slot[rows_v[keep]], slot[cols_v[keep]], blocks[keep]
    rr = (rows_v[:, None, None] * k + np.arange(k)[None, :, None]) + 0 * np.arange(k)[None, None, :]
    cc = (cols_v[:, None, None] * k + np.arange(k)[None, None, :]) + 0 * np.arange(k)[None, :, None]
    g = np.einsum("nmk,nm->nk", E[free_idx], eg[free_idx]).ravel()
    size = len(free_idx) * k
    if dense:
        H = np.zeros((size, size))
        np.add.at(H, (rr.ravel(), cc.ravel()), blocks.ravel())
    else:
        H = sp.coo_matrix((blocks.ravel(), (rr.ravel(), cc.ravel())), shape=(size, size)).tocsc()
    return free_idx, E, g, H


def _retract(chain: _Chain, free_idx, E, step: np.ndarray, alpha: float) -> np.ndarray:
    k = chain.x.shape[1] - 1
    x = chain.x.copy()
    x[free_idx] += alpha * np.einsum("nmk,nk->nm", E[free_idx], step.reshape(-1, k))
    return _project(chain, x)


def _newton(chain: _Chain, tol: float, max_iter: int, history: list) -> float:
    """Riemannian Newton with Levenberg damping and monotone backtracking."""
    F = chain.length()
    res = float(reflection_defects(chain).max(initial=0.0))
    k = chain.x.shape[1] - 1
    dense = int(chain.free.sum()) * k <= 120
    for _ in range(max_iter):
        if res < tol:
            break
        free_idx, E, g, H = _riemannian_system(chain, dense)
        gnorm = float(np.linalg.norm(g))
        if gnorm == 0.0:
            break
        mu = 0.0
        direction = None
        scale = max(1.0, float(abs(H).max()))
        eye = np.eye(len(g)) if dense else sp.identity(len(g), format="csc")
        for _attempt in range(30):
            M = H + mu * eye if mu else H
            try:
                d = np.linalg.solve(M, -g) if dense else spla.spsolve(M, -g)
            except (np.linalg.LinAlgError, RuntimeError):
                d = None
            if d is not None and np.all(np.isfinite(d)) and float(d @ g) < -1e-3 * gnorm * np.linalg.norm(d):
                direction = d
                break
            mu = 1e-4 * scale if mu == 0.0 else 4.0 * mu
        if direction is None:
            direction = -g
        # keep individual moves well below the sphere scale
        moves = np.linalg.norm(direction.reshape(-1, k), axis=1) / chain.radii[free_idx]
        biggest = float(moves.max())
        alpha = min(1.0, 0.5 / biggest) if biggest > 0 else 1.0
        slope = float(direction @ g)
        # near the minimum F is flat to roundoff; allow that much slack
        slack = 1e-15 * F * chain.n if res < 1e-6 else 0.0
        accepted = False
        while alpha > 1e-16:
            x_new = _retract(chain, free_idx, E, direction, alpha)
            F_new = chain.length(x_new)
            if F_new <= F + 1e-4 * alpha * slope + slack:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        chain.x = x_new
        F = F_new
        history.append(F)
        res = float(reflection_defects(chain).max(initial=0.0))
    return res


def _relax_sweeps(chain: _Chain, sweeps: int, target: float, history: list) -> None:
    """Per-vertex two-segment minimization, Gauss-Seidel order."""
    m = chain.x.shape[1]
    for _ in range(sweeps):
        for j in np.flatnonzero(chain.free):
            prev, nxt = chain.neighbors(j)
            for _inner in range(3):
                c, rho = chain.centers[j], chain.radii[j]
                x = chain.x[j]
                nrm = (x - c) / rho
                E = _tangent_basis(nrm)
                g = np.zeros(m)
                Hm = np.zeros((m, m))
                f0 = 0.0
                for nb in (prev, nxt):
                    if nb is None:
                        continue
                    w = x - nb
                    L = float(np.linalg.norm(w))
                    f0 += L
                    g += w / L
                    Hm += (np.eye(m) - np.outer(w, w) / L**2) / L
                Hr = E.T @ Hm @ E - (float(g @ nrm) / rho) * np.eye(m - 1)
                gr = E.T @ g
                if float(np.linalg.norm(gr)) < 1e-9:
                    break
                try:
                    d = -np.linalg.solve(Hr, gr)
                    if float(d @ gr) >= 0:
                        d = -gr
                except np.linalg.LinAlgError:
                    d = -gr
                alpha = min(1.0, 0.5 * rho / max(float(np.linalg.norm(d)), 1e-300))
                while alpha > 1e-12:
                    y = x + alpha * (E @ d)
                    y = c + rho * (y - c) / np.linalg.norm(y - c)
                    f1 = sum(float(np.linalg.norm(y - nb)) for nb in (prev, nxt) if nb is not None)
                    if f1 < f0:
                        chain.x[j] = y
                        break
                    alpha *= 0.5
                else:
                    break
        history.append(chain.length())
        if float(reflection_defects(chain).max(initial=0.0)) < target:
            break


def _initial_points(centers: np.ndarray, radii: np.ndarray, anchors_prev, anchors_next, cyclic_shift=None):
    """Each vertex starts at the sphere point nearest the segment joining its neighbors' centers."""
    n, m = centers.shape
    x = np.empty_like(centers)
    for j in range(n):
        if cyclic_shift is not None:
            a = centers[j - 1] - (cyclic_shift if j == 0 else 0.0)
            b = centers[j + 1] if j + 1 < n else centers[0] + cyclic_shift
        else:
            a = centers[j - 1] if j > 0 else anchors_prev
            b = centers[j + 1] if j + 1 < n else anchors_next
        c = centers[j]
        if a is None and b is None:
            target = c + np.eye(m)[0]
        elif a is None or b is None:
            target = b if a is None else a
        else:
            seg = b - a
            t = float(np.clip((c - a) @ seg / (seg @ seg), 0.0, 1.0)) if seg @ seg > 0 else 0.0
            target = a + t * seg
        d = target - c
        nd = float(np.linalg.norm(d))
        if nd < 1e-12:
            # neighbors' segment runs through the center; pick a perpendicular
            ref = (b - a) if a is not None and b is not None else np.eye(m)[0]
            d = _tangent_basis(ref / np.linalg.norm(ref))[:, 0]
            nd = 1.0
        x[j] = c + radii[j] * d / nd
    return x


def _check_clearance(scene: Scene, path: np.ndarray, owners: list, cyclic_shift=None) -> float:
    """Minimum gap of every segment to non-incident obstacles; raises on contact."""
    pts = path
    if cyclic_shift is not None:
        pts = np.vstack([path, path[:1] + cyclic_shift])
        owners = owners + [owners[0].shifted(tuple(int(v) for v in cyclic_shift)) if owners[0] else None]
    gap, seg, who = path_clearance(scene, pts, owners)
    if gap <= 0.0:
        raise ClearanceError(seg, who, gap)
    return gap


def _solve(chain: _Chain, tol: float, sweeps: int, max_iter: int):
    history = [chain.length()]
    if sweeps:
        _relax_sweeps(chain, sweeps, 1e-2, history)
    res = _newton(chain, tol * 1e-2, max_iter, history)
    if not res <= tol:
        raise StagnationError(res)
    return res, history


def _on_sphere(scene: Scene, ob: LatticeObstacleId, pt) -> bool:
    return abs(float(np.linalg.norm(np.asarray(pt, float) - scene.center(ob))) - scene.radius(ob)) <= ON_SPHERE_TOL


def minimize_open(
    scene: Scene,
    seq: SymbolicSequence,
    x_start=None,
    x_end=None,
    *,
    init: np.ndarray | None = None,
    tol: float = RESIDUAL_TOL,
    sweeps: int | None = None,
    max_iter: int = 200,
    check: bool = True,
) -> TrajectoryPiece:
    """Shortest broken path of type ``seq``.

    Endpoint handling, for each end separately:

    * ``None`` -- the end vertex is free on its typed sphere;
    * a point on the typed sphere -- the end vertex is pinned there;
    * any other point -- a fixed free-space anchor, and the typed obstacle
      is an interior reflection.

    ``init`` optionally seeds the typed vertices (shape ``(len(seq), m)``);
    NaN rows fall back to the geometric start.
    """
    if check:
        verdict = check_admissible(scene, seq)
        if not verdict.ok:
            raise NotAdmissibleError(f"type is not admissible: {verdict.violation}")
    ids = list(seq.entries)
    centers = np.array([scene.center(o) for o in ids])
    radii = np.array([scene.radius(o) for o in ids])
    m = scene.m
    start_anchor = end_anchor = None
    pinned_first = pinned_last = False
    if x_start is not None:
        x_start = np.asarray(x_start, dtype=float)
        if _on_sphere(scene, ids[0], x_start):
            pinned_first = True
        else:
            start_anchor = x_start
    if x_end is not None:
        x_end = np.asarray(x_end, dtype=float)
        if _on_sphere(scene, ids[-1], x_end):
            pinned_last = True
        else:
            end_anchor = x_end
    x = _initial_points(centers, radii, start_anchor, end_anchor)
    if init is not None:
        # rows left as NaN keep the geometric start
        init = np.asarray(init, dtype=float)
        x = np.where(np.isnan(init), x, init)
        x = _project(_Chain(x, centers, radii, np.ones(len(ids), bool)), x)
    free = np.ones(len(ids), dtype=bool)
    if pinned_first:
        x[0] = x_start
        free[0] = False
    if pinned_last:
        x[-1] = x_end
        free[-1] = False
    # assemble the full chain including anchors
    xs, cs, rs, fr = [x], [centers], [radii], [free]
    if start_anchor is not None:
        xs.insert(0, start_anchor[None]), cs.insert(0, start_anchor[None]), rs.insert(0, np.ones(1)), fr.insert(0, np.zeros(1, bool))
    if end_anchor is not None:
        xs.append(end_anchor[None]), cs.append(end_anchor[None]), rs.append(np.ones(1)), fr.append(np.zeros(1, bool))
    chain = _Chain(np.vstack(xs), np.vstack(cs), np.concatenate(rs), np.concatenate(fr))
    if chain.n < 2:
        # a lone free vertex: nothing to minimize
        pt = chain.x[0]
        return TrajectoryPiece(seq, pt[None].copy(), None, None, 0.0, np.zeros(m), 0.0, math.inf, [0.0])
    if sweeps is None:
        sweeps = 0 if init is not None else 10
    if chain.free.any():
        res, history = _solve(chain, tol, sweeps, max_iter)
    else:
        res, history = float(reflection_defects(chain).max(initial=0.0)), [chain.length()]
    lo = 1 if start_anchor is not None else 0
    pts = chain.x[lo:lo + len(ids)].copy()
    incidence = _incidence(chain)
    if incidence < GRAZE_TOL:
        raise GrazingError(f"tangential reflection (|cos| = {incidence:.2e})")
    owners = ([None] if start_anchor is not None else []) + ids + ([None] if end_anchor is not None else [])
    clearance = _check_clearance(scene, chain.x, owners)
    path = chain.x
    return TrajectoryPiece(
        type=seq,
        points=pts,
        start=start_anchor,
        end=end_anchor,
        length=chain.length(),
        displacement=path[-1] - path[0],
        residual=res,
        clearance=clearance,
        history=history,
    )


def minimize_periodic(
    scene: Scene,
    cycle: CyclicSequence,
    p=None,
    *,
    init: np.ndarray | None = None,
    tol: float = RESIDUAL_TOL,
    sweeps: int | None = None,
    max_iter: int = 200,
    check: bool = True,
) -> PeriodicOrbit:
    """Periodic orbit of the given cycle: minimal cyclic length with ``x_q = x_0 + p``."""
    if p is not None and tuple(int(v) for v in p) != cycle.p:
        raise ValueError(f"lattice period {tuple(p)} does not match the cycle's increment sum {cycle.p}")
    if check:
        verdict = check_admissible(scene, cycle.expand(3))
        if not verdict.ok:
            raise NotAdmissibleError(f"cycle is not admissible across seams: {verdict.violation}")
    ids = list(cycle.entries.entries)
    shift = np.asarray(cycle.p, dtype=float)
    centers = np.array([scene.center(o) for o in ids])
    radii = np.array([scene.radius(o) for o in ids])
    x = _initial_points(centers, radii, None, None, cyclic_shift=shift) if init is None else np.asarray(init, float).copy()
    chain = _Chain(x, centers, radii, np.ones(len(ids), bool), cyclic=True, shift=shift)
    chain.x = _project(chain, chain.x)
    if sweeps is None:
        sweeps = 0 if init is not None else 10
    res, history = _solve(chain, tol, sweeps, max_iter)
    incidence = _incidence(chain)
    if incidence < GRAZE_TOL:
        raise GrazingError(f"degenerate grazing orbit (|cos| = {incidence:.2e})")
    clearance = _check_clearance(scene, chain.x, ids, cyclic_shift=shift)
    return PeriodicOrbit(cycle, chain.x.copy(), chain.length(), res, clearance, history)


@dataclass(frozen=True)
class BatchCheck:
    residual: np.ndarray
    clearance: np.ndarray
    incidence: np.ndarray
    length: np.ndarray

    @property
    def ok(self) -> np.ndarray:
        return (self.residual < RESIDUAL_TOL) & (self.clearance > 0.0) & (self.incidence >= GRAZE_TOL)


def check_periodic_batch(scene: Scene, cycles: list[CyclicSequence], points: np.ndarray) -> BatchCheck:
    """Reflection residual, clearance, incidence and length of many orbits of one period.

    ``points`` has shape ``(B, q, m)``; row ``b`` belongs to ``cycles[b]``.
    """
    pts = np.asarray(points, dtype=float)
    B, q, m = pts.shape
    steps = np.array([[s.l for s in c.states] for c in cycles], dtype=int).reshape(B, q, m)
    cum = np.cumsum(steps, axis=1)
    ks = np.concatenate([np.zeros((B, 1, m), dtype=int), cum[:, :-1]], axis=1)
    p = cum[:, -1]
    labels = np.array([[c.states[0].r_prev] + [s.r for s in c.states[:-1]] for c in cycles], dtype=int).reshape(B, q)
    centers = scene.centers[labels - 1] + ks
    radii = scene.radii[labels - 1]
    closed = np.concatenate([pts, pts[:, :1] + p[:, None, :]], axis=1)
    seg = closed[:, 1:] - closed[:, :-1]
    seg_len = np.linalg.norm(seg, axis=2)
    u = seg / seg_len[:, :, None]
    vin, vout = np.roll(u, 1, axis=1), u
    nrm = (pts - centers) / radii[:, :, None]
    mirrored = vin - 2.0 * np.einsum("bqm,bqm->bq", vin, nrm)[:, :, None] * nrm
    gap = np.linalg.norm(mirrored - vout, axis=2)
    residual = (2.0 * np.arcsin(np.minimum(1.0, gap / 2.0))).max(axis=1)
    incidence = np.minimum(
        np.abs(np.einsum("bqm,bqm->bq", vout, nrm)), np.abs(np.einsum("bqm,bqm->bq", vin, nrm))
    ).min(axis=1)
    ks_next = np.concatenate([ks[:, 1:], ks[:, :1] + p[:, None, :]], axis=1)
    lab_next = np.roll(labels, -1, axis=1)
    clear = batch_segment_clearance(
        scene,
        closed[:, :-1].reshape(-1, m),
        closed[:, 1:].reshape(-1, m),
        (ks.reshape(-1, m), labels.reshape(-1)),
        (ks_next.reshape(-1, m), lab_next.reshape(-1)),
    ).reshape(B, q)
    return BatchCheck(residual, clear.min(axis=1), incidence, seg_len.sum(axis=1))


def reflection_residual(scene: Scene, piece) -> float:
    """Largest reflection defect (radians) over the interior vertices of a piece or orbit."""
    if isinstance(piece, PeriodicOrbit):
        ids = list(piece.cycle.entries.entries)
        chain = _Chain(
            piece.points,
            np.array([scene.center(o) for o in ids]),
            np.array([scene.radius(o) for o in ids]),
            np.ones(len(ids), bool),
            cyclic=True,
            shift=piece.p,
        )
        return float(reflection_defects(chain).max(initial=0.0))
    ids = list(piece.type.entries)
    path = piece.path
    centers = [scene.center(o) for o in ids]
    radii = [scene.radius(o) for o in ids]
    free = [True] * len(ids)
    if piece.start is not None:
        centers.insert(0, piece.start), radii.insert(0, 1.0), free.insert(0, False)
    if piece.end is not None:
        centers.append(piece.end), radii.append(1.0), free.append(False)
    chain = _Chain(path, np.array(centers), np.array(radii), np.array(free))
    defects = reflection_defects(chain)
    return float(defects.max(initial=0.0))


def random_sphere_point(scene: Scene, ob: LatticeObstacleId, rng: np.random.Generator) -> np.ndarray:
    d = rng.normal(size=scene.m)
    return scene.center(ob) + scene.radius(ob) * d / np.linalg.norm(d)


@dataclass(frozen=True)
class SpreadReport:
    length_spread: float
    displacement_spread: float
    bound: float
    trials: int

    @property
    def ok(self) -> bool:
        return self.length_spread <= self.bound and self.displacement_spread <= self.bound


def length_gap_check(
    scene: Scene, seq: SymbolicSequence, trials: int, rng: np.random.Generator | int | None = None, endpoints=None
) -> SpreadReport:
    """Spread of lengths and displacements over pieces of one type with random endpoints.

    Both spreads are bounded by twice the largest obstacle diameter.
    ``endpoints`` optionally supplies the ``(x_start, x_end)`` pairs.
    """
    if trials < 2 and endpoints is None:
        raise ValueError("need at least two trials")
    rng = np.random.default_rng(rng)
    first, last = seq.entries[0], seq.entries[-1]
    if endpoints is None:
        endpoints = [(random_sphere_point(scene, first, rng), random_sphere_point(scene, last, rng)) for _ in range(trials)]
    lengths, disps = [], []
    for a, b in endpoints:
        piece = minimize_open(scene, seq, a, b)
        lengths.append(piece.length)
        disps.append(piece.displacement)
    lengths = np.array(lengths)
    disps = np.array(disps)
    ls = float(lengths.max() - lengths.min())
    diff = disps[:, None, :] - disps[None, :, :]
    ds = float(np.linalg.norm(diff, axis=2).max())
    return SpreadReport(ls, ds, 2.0 * scene.max_diameter, len(endpoints))
