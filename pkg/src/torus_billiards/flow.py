"""Billiard flow in the universal cover, by exact ray casting against the lattice.

Positions and directions are tuples of numbers; floats by default, or
``mpmath.mpf`` for high-precision verification runs (dispersing billiards
amplify rounding errors by roughly an order of magnitude per bounce).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .scene import LatticeObstacleId, Scene, cast_ray, segment_clearance

TANGENCY_TOL = 1e-10
ESCAPE_CELLS = 1000


class FlowError(RuntimeError):
    pass


class Escape(FlowError):
    """The ray crossed the cell cutoff without hitting anything."""

    def __init__(self, state: "FlowState", cells: int):
        super().__init__(f"no obstacle within {cells} cells from {tuple(float(a) for a in state.position)}")
        self.state = state
        self.cells = cells


class Tangency(FlowError):
    def __init__(self, state: "FlowState", obstacle: LatticeObstacleId, impact):
        super().__init__(f"tangential hit on {obstacle} (impact parameter {float(impact):.3e})")
        self.state = state
        self.obstacle = obstacle


@dataclass(frozen=True)
class FlowState:
    position: tuple
    direction: tuple
    time: float = 0.0
    obstacle: LatticeObstacleId | None = None  # ball the state sits on, if any

    @classmethod
    def make(cls, position, direction, time=0.0, obstacle=None, normalize: bool = True) -> "FlowState":
        pos = tuple(position)
        d = tuple(direction)
        if normalize:
            nrm = sum(a * a for a in d) ** 0.5
            d = tuple(a / nrm for a in d)
        return cls(pos, d, time, obstacle)

    @property
    def speed(self):
        return sum(a * a for a in self.direction) ** 0.5


@dataclass(frozen=True)
class Event:
    time: float
    point: tuple
    obstacle: LatticeObstacleId
    incoming: tuple


def _normal(scene: Scene, ob: LatticeObstacleId, point):
    c = scene.center(ob)
    n = [p - float(ci) for p, ci in zip(point, c)]
    nrm = sum(a * a for a in n) ** 0.5
    return [a / nrm for a in n]


def _reflect(scene: Scene, ob: LatticeObstacleId, point, v):
    # renormalized normal: the hit point carries rounding of the order of
    # its coordinates, which would otherwise leak into the speed
    n = _normal(scene, ob, point)
    vn = sum(a * b for a, b in zip(v, n))
    return tuple(a - 2 * vn * b for a, b in zip(v, n))


def step(scene: Scene, state: FlowState, max_cells: int = ESCAPE_CELLS, t_max=math.inf) -> tuple[Event, FlowState]:
    """Advance to the next reflection.

    Raises :class:`Escape` when no ball is met within ``max_cells`` cells
    and :class:`Tangency` on a grazing hit.
    """
    res = cast_ray(
        scene, state.position, state.direction, exclude=state.obstacle, max_cells=max_cells,
        graze_tol=TANGENCY_TOL, t_max=t_max,
    )
    if res.grazing is not None:
        raise Tangency(state, res.grazing.obstacle, res.grazing.impact)
    if res.hit is None:
        raise Escape(state, res.cells)
    t = res.hit.t
    point = tuple(p + t * v for p, v in zip(state.position, state.direction))
    # snap onto the sphere
    n = _normal(scene, res.hit.obstacle, point)
    rho = float(scene.radius(res.hit.obstacle))
    point = tuple(float(ci) + rho * a for ci, a in zip(scene.center(res.hit.obstacle), n))
    new_dir = _reflect(scene, res.hit.obstacle, point, state.direction)
    event = Event(state.time + t, point, res.hit.obstacle, state.direction)
    return event, FlowState(point, new_dir, state.time + t, res.hit.obstacle)


@dataclass
class Flight:
    initial: FlowState
    events: list[Event] = field(default_factory=list)
    final: FlowState | None = None
    terminal: str = ""  # "n_max", "t_max", "escape" or "tangency"

    @property
    def displacement(self) -> np.ndarray:
        return np.array([float(a) - float(b) for a, b in zip(self.final.position, self.initial.position)])

    def symbols(self) -> list[LatticeObstacleId]:
        return [e.obstacle for e in self.events]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        m = len(self.initial.position)
        w.writerow(["time"] + [f"x{i + 1}" for i in range(m)] + [f"k{i + 1}" for i in range(m)] + ["r"])
        for e in self.events:
            w.writerow([f"{float(e.time):.17g}"] + [f"{float(a):.17g}" for a in e.point] + list(e.obstacle.k) + [e.obstacle.r])
        return buf.getvalue()


def trace(
    scene: Scene, start: FlowState, n_max: int, t_max: float = math.inf, max_cells: int = ESCAPE_CELLS
) -> Flight:
    """Iterate :func:`step` until ``n_max`` reflections, time ``t_max``, escape or tangency."""
    flight = Flight(start)
    state = start
    while True:
        if len(flight.events) >= n_max:
            flight.terminal = "n_max"
            break
        remaining = t_max - state.time
        try:
            event, nxt = step(scene, state, max_cells=max_cells, t_max=remaining)
        except Tangency:
            flight.terminal = "tangency"
            break
        except Escape as exc:
            if exc.cells < max_cells:
                # cast_ray stops once the remaining time is used up
                flight.terminal = "t_max"
                state = FlowState(
                    tuple(p + remaining * v for p, v in zip(state.position, state.direction)),
                    state.direction,
                    t_max,
                    None,
                )
            else:
                flight.terminal = "escape"
            break
        if event.time > t_max:
            flight.terminal = "t_max"
            state = FlowState(
                tuple(p + remaining * v for p, v in zip(state.position, state.direction)), state.direction, t_max, None
            )
            break
        flight.events.append(event)
        state = nxt
    flight.final = state
    return flight


def reversed_state(scene: Scene, state: FlowState) -> FlowState:
    """State retracing the motion backwards from ``state``.

    At a reflection point the reversed velocity is the negated incoming
    velocity, i.e. the mirrored outgoing one.
    """
    if state.obstacle is None:
        return FlowState(state.position, tuple(-a for a in state.direction), 0.0, None)
    incoming = _reflect(scene, state.obstacle, state.position, state.direction)
    return FlowState(state.position, tuple(-a for a in incoming), 0.0, state.obstacle)


def retrace(scene: Scene, flight: Flight, max_cells: int = ESCAPE_CELLS) -> Flight:
    """Run ``flight`` backwards for its full duration; ends where it started."""
    back = reversed_state(scene, flight.final)
    duration = flight.final.time - flight.initial.time
    return trace(scene, back, len(flight.events) + 1, t_max=duration, max_cells=max_cells)


def rotation_estimate(flight: Flight, n: int) -> np.ndarray:
    """``(point of event n - initial position) / time of event n`` (``n`` is 1-based)."""
    if not 1 <= n <= len(flight.events):
        raise IndexError(f"flight has {len(flight.events)} events, asked for event {n}")
    e = flight.events[n - 1]
    return np.array([float(a) - float(b) for a, b in zip(e.point, flight.initial.position)]) / float(
        e.time - flight.initial.time
    )


def rotation_series(flight: Flight) -> list[tuple[int, np.ndarray]]:
    return [(n, rotation_estimate(flight, n)) for n in range(1, len(flight.events) + 1)]


# ---------------------------------------------------------------------------
# free flight towards (1, 0, ..., 0)


@dataclass(frozen=True)
class FarFlight:
    k: int
    start: np.ndarray
    end: np.ndarray
    length: float
    ratio: np.ndarray
    clearance: float
    lowest: int  # label of the obstacle the segment leaves
    highest: int
    ties: tuple[tuple[int, ...], tuple[int, ...]]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.ratio))

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "start": self.start.tolist(),
            "end": self.end.tolist(),
            "length": self.length,
            "ratio": self.ratio.tolist(),
            "norm": self.norm,
            "clearance": self.clearance,
            "lowest_label": self.lowest,
            "highest_label": self.highest,
        }


def far_flight_example(scene: Scene, k: int, k_cap: int = 1 << 20) -> FarFlight:
    """Free segment from the lowest boundary point in cell 0 to the highest one in cell ``(k, -1, 0, ...)``.

    "Low" and "high" refer to the second coordinate. If the open segment
    meets another obstacle, ``k`` is doubled until it clears or exceeds
    ``k_cap``.
    """
    m = scene.m
    lows = scene.centers[:, 1] - scene.radii
    highs = scene.centers[:, 1] + scene.radii
    lo_ties = tuple(int(i) + 1 for i in np.flatnonzero(np.isclose(lows, lows.min(), rtol=0, atol=1e-15)))
    hi_ties = tuple(int(i) + 1 for i in np.flatnonzero(np.isclose(highs, highs.max(), rtol=0, atol=1e-15)))
    r_lo, r_hi = lo_ties[0], hi_ties[0]
    e2 = np.zeros(m)
    e2[1] = 1.0
    while k <= k_cap:
        cell = np.zeros(m, dtype=int)
        cell[0], cell[1] = k, -1
        a_id = LatticeObstacleId((0,) * m, r_lo)
        b_id = LatticeObstacleId(tuple(int(c) for c in cell), r_hi)
        x = scene.center(a_id) - scene.radius(a_id) * e2
        y = scene.center(b_id) + scene.radius(b_id) * e2
        gap, _ = segment_clearance(scene, x, y, exclude=[a_id, b_id])
        # the end balls are touched only at the endpoints: the segment leaves
        # the lowest point downwards and arrives at the highest from above
        if gap > 0.0:
            d = y - x
            L = float(np.linalg.norm(d))
            return FarFlight(k, x, y, L, d / L, gap, r_lo, r_hi, (lo_ties, hi_ties))
        k *= 2
    raise FlowError(f"no clearing free flight found for k <= {k_cap}")


def start_on_orbit(points: Sequence, obstacle: LatticeObstacleId, next_point) -> FlowState:
    """Flow state leaving ``points`` towards ``next_point``."""
    return FlowState.make(tuple(float(a) for a in points), tuple(float(b) - float(a) for a, b in zip(points, next_point)),
                          0.0, obstacle)
