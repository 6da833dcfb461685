"""Domain types, trajectory arithmetic, and geometric primitives.

Everything downstream (relation labeling, predictors, metrics, the scenario
generator) builds on the types in this module. All types are immutable after
construction and every operation is a pure function, so scenarios can be
processed in parallel without shared state.

Conventions: distances in meters, angles in radians wrapped to (-pi, pi],
speeds in m/s. Time is never stored; step k of a trajectory corresponds to
time k * dt exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

# Fixed sampling grid: 0.1 s steps, 11 observed steps, 80 future steps (8 s).
DT = 0.1
HISTORY_STEPS = 11
FUTURE_STEPS = 80
HORIZON_SEC = FUTURE_STEPS * DT

TWO_PI = 2.0 * math.pi


def wrap_angle(theta):
    """Wrap an angle (scalar or array) to (-pi, pi]."""
    wrapped = (-theta + math.pi) % TWO_PI
    return -(wrapped - math.pi)


@dataclass(frozen=True)
class AgentState:
    """One timestep of an agent: planar pose plus speed and a validity flag."""

    x: float
    y: float
    heading: float
    speed: float
    valid: bool = True

    def __post_init__(self):
        if self.speed < 0.0:
            raise ValueError(f"speed must be >= 0, got {self.speed}")
        object.__setattr__(self, "heading", float(wrap_angle(self.heading)))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


class Trajectory:
    """Fixed-rate timed 2-D pose sequence, array-backed and immutable.

    Attributes
    ----------
    xy : (L, 2) float array of positions
    heading : (L,) float array, wrapped to (-pi, pi]
    speed : (L,) float array, >= 0
    valid : (L,) bool array; invalid entries carry placeholder pose values
        and are excluded from all distance/feature computations
    dt : seconds per step
    """

    __slots__ = ("xy", "heading", "speed", "valid", "dt")

    def __init__(self, xy, heading, speed, valid=None, dt: float = DT):
        xy = np.ascontiguousarray(xy, dtype=float)
        heading = wrap_angle(np.ascontiguousarray(heading, dtype=float))
        speed = np.ascontiguousarray(speed, dtype=float)
        if xy.ndim != 2 or xy.shape[1] != 2 or xy.shape[0] == 0:
            raise ValueError(f"xy must have shape (L, 2) with L > 0, got {xy.shape}")
        length = xy.shape[0]
        if heading.shape != (length,) or speed.shape != (length,):
            raise ValueError("heading/speed must match trajectory length")
        if (speed < 0.0).any():
            raise ValueError("speeds must be >= 0")
        if valid is None:
            valid = np.ones(length, dtype=bool)
        else:
            valid = np.ascontiguousarray(valid, dtype=bool)
            if valid.shape != (length,):
                raise ValueError("valid mask must match trajectory length")
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        for arr in (xy, heading, speed, valid):
            arr.setflags(write=False)
        object.__setattr__(self, "xy", xy)
        object.__setattr__(self, "heading", heading)
        object.__setattr__(self, "speed", speed)
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "dt", float(dt))

    def __setattr__(self, name, value):
        raise AttributeError("Trajectory is immutable")

    def __len__(self) -> int:
        return self.xy.shape[0]

    @property
    def length(self) -> int:
        return self.xy.shape[0]

    def state(self, k: int) -> AgentState:
        return AgentState(
            float(self.xy[k, 0]),
            float(self.xy[k, 1]),
            float(self.heading[k]),
            float(self.speed[k]),
            bool(self.valid[k]),
        )

    def states(self) -> list[AgentState]:
        return [self.state(k) for k in range(len(self))]

    def valid_count(self) -> int:
        return int(self.valid.sum())

    def last_valid_index(self) -> int:
        idx = np.flatnonzero(self.valid)
        if idx.size == 0:
            raise ValueError("trajectory has no valid states")
        return int(idx[-1])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.dt == other.dt
            and np.array_equal(self.xy, other.xy)
            and np.array_equal(self.heading, other.heading)
            and np.array_equal(self.speed, other.speed)
            and np.array_equal(self.valid, other.valid)
        )

    @classmethod
    def from_states(cls, states: Sequence[AgentState], dt: float = DT) -> "Trajectory":
        xy = [(s.x, s.y) for s in states]
        return cls(
            xy,
            [s.heading for s in states],
            [s.speed for s in states],
            [s.valid for s in states],
            dt=dt,
        )

    def to_rows(self, include_valid: bool) -> list[list[float]]:
        rows = []
        for k in range(len(self)):
            row = [
                float(self.xy[k, 0]),
                float(self.xy[k, 1]),
                float(self.heading[k]),
                float(self.speed[k]),
            ]
            if include_valid:
                row.append(int(self.valid[k]))
            rows.append(row)
        return rows

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]], dt: float = DT) -> "Trajectory":
        arr = [list(r) for r in rows]
        xy = [(r[0], r[1]) for r in arr]
        heading = [r[2] for r in arr]
        speed = [r[3] for r in arr]
        valid = [bool(r[4]) if len(r) > 4 else True for r in arr]
        return cls(xy, heading, speed, valid, dt=dt)


@dataclass(frozen=True)
class AgentFootprint:
    """Rectangular footprint; length along heading, width across."""

    length: float
    width: float

    def __post_init__(self):
        if not (self.length >= self.width > 0.0):
            raise ValueError(
                f"footprint requires length >= width > 0, got {self.length} x {self.width}"
            )

    @property
    def diagonal(self) -> float:
        return math.hypot(self.length, self.width)


@dataclass(frozen=True)
class Lane:
    """Lane centerline with successor connectivity."""

    id: str
    centerline: np.ndarray  # (P, 2)
    successors: tuple[str, ...] = ()

    def __post_init__(self):
        line = np.ascontiguousarray(self.centerline, dtype=float)
        if line.ndim != 2 or line.shape[1] != 2 or line.shape[0] < 2:
            raise ValueError(f"lane {self.id}: centerline needs >= 2 points")
        if (np.hypot(*(np.diff(line, axis=0).T)) == 0.0).any():
            raise ValueError(f"lane {self.id}: consecutive centerline points must be distinct")
        line.setflags(write=False)
        object.__setattr__(self, "centerline", line)
        object.__setattr__(self, "successors", tuple(self.successors))


@dataclass(frozen=True)
class AgentTrack:
    """One agent in a scenario: footprint, observed history, ground-truth future."""

    id: str
    footprint: AgentFootprint
    history: Trajectory
    future: Trajectory


class Scenario:
    """Map lanes plus agent tracks and the designated interacting agents.

    ``interacting`` is an ordered tuple of agent ids; the first two form the
    interacting pair, longer tuples designate a multi-agent interacting set.
    """

    __slots__ = ("id", "lanes", "agents", "interacting", "_agent_map", "_lane_map")

    def __init__(
        self,
        id: str,
        lanes: Sequence[Lane],
        agents: Sequence[AgentTrack],
        interacting: Sequence[str],
    ):
        lanes = tuple(lanes)
        agents = tuple(agents)
        interacting = tuple(interacting)
        agent_map = {a.id: a for a in agents}
        if len(agent_map) != len(agents):
            raise ValueError(f"scenario {id}: duplicate agent ids")
        if len(interacting) < 2:
            raise ValueError(f"scenario {id}: needs >= 2 interacting agents")
        for aid in interacting:
            if aid not in agent_map:
                raise ValueError(f"scenario {id}: interacting agent {aid!r} not present")
        hist_lengths = {len(a.history) for a in agents}
        fut_lengths = {len(a.future) for a in agents}
        if len(hist_lengths) > 1 or len(fut_lengths) > 1:
            raise ValueError(f"scenario {id}: agents disagree on history/future length")
        for a in agents:
            if a.history.valid_count() == 0:
                raise ValueError(f"scenario {id}: agent {a.id} history has no valid states")
            if len(a.future) != FUTURE_STEPS:
                raise ValueError(
                    f"scenario {id}: agent {a.id} future must have {FUTURE_STEPS} steps"
                )
            if not a.future.valid.all():
                raise ValueError(f"scenario {id}: agent {a.id} future must be fully valid")
        object.__setattr__(self, "id", id)
        object.__setattr__(self, "lanes", lanes)
        object.__setattr__(self, "agents", agents)
        object.__setattr__(self, "interacting", interacting)
        object.__setattr__(self, "_agent_map", agent_map)
        object.__setattr__(self, "_lane_map", {ln.id: ln for ln in lanes})

    def __setattr__(self, name, value):
        raise AttributeError("Scenario is immutable")

    def agent(self, agent_id: str) -> AgentTrack:
        return self._agent_map[agent_id]

    def lane(self, lane_id: str) -> Lane:
        return self._lane_map[lane_id]

    @property
    def pair(self) -> tuple[str, str]:
        return self.interacting[0], self.interacting[1]

    def ground_truth(self, agent_ids: Iterable[str] | None = None) -> dict[str, Trajectory]:
        ids = tuple(agent_ids) if agent_ids is not None else self.interacting
        return {aid: self.agent(aid).future for aid in ids}


@dataclass(frozen=True)
class OrientedBox:
    """Rectangle given by center, heading, and half extents."""

    cx: float
    cy: float
    heading: float
    half_length: float
    half_width: float

    def __post_init__(self):
        if self.half_length <= 0.0 or self.half_width <= 0.0:
            raise ValueError("box half extents must be positive")

    def corners(self) -> np.ndarray:
        c, s = math.cos(self.heading), math.sin(self.heading)
        hl, hw = self.half_length, self.half_width
        local = np.array([(hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw)])
        rot = np.array([(c, -s), (s, c)])
        return local @ rot.T + np.array([self.cx, self.cy])


# ---------------------------------------------------------------------------
# Geometric operations
# ---------------------------------------------------------------------------


def pairwise_min_distance(a: Trajectory, b: Trajectory) -> tuple[float, int, int]:
    """Closest spatial approach between two trajectories over all index pairs.

    Only valid states participate. Returns ``(distance, idx_a, idx_b)`` where
    the indices achieve the minimum; ties are broken by the lexicographically
    smallest ``(idx_a, idx_b)`` so outputs are fully deterministic.

    Raises ``ValueError`` if either trajectory has no valid states.
    """
    ia = np.flatnonzero(a.valid)
    ib = np.flatnonzero(b.valid)
    if ia.size == 0 or ib.size == 0:
        raise ValueError("pairwise_min_distance requires at least one valid state per trajectory")
    pa = a.xy[ia]
    pb = b.xy[ib]
    diff = pa[:, None, :] - pb[None, :, :]
    d2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
    # argmin on the row-major flattening picks the smallest (i, j) among ties
    flat = int(np.argmin(d2))
    i, j = divmod(flat, d2.shape[1])
    return math.sqrt(float(d2[i, j])), int(ia[i]), int(ib[j])


def _project_interval(corners: np.ndarray, axis: np.ndarray) -> tuple[float, float]:
    dots = corners @ axis
    return float(dots.min()), float(dots.max())


def boxes_overlap(p: OrientedBox, q: OrientedBox) -> bool:
    """Separating-axis intersection test for two oriented rectangles.

    Boundary contact counts as overlap. A bounding-circle check rejects
    distant pairs before any corner math.
    """
    rp = math.hypot(p.half_length, p.half_width)
    rq = math.hypot(q.half_length, q.half_width)
    if math.hypot(q.cx - p.cx, q.cy - p.cy) > rp + rq:
        return False
    cp = p.corners()
    cq = q.corners()
    for heading in (p.heading, q.heading):
        c, s = math.cos(heading), math.sin(heading)
        for axis in (np.array([c, s]), np.array([-s, c])):
            lo_p, hi_p = _project_interval(cp, axis)
            lo_q, hi_q = _project_interval(cq, axis)
            if hi_p < lo_q or hi_q < lo_p:
                return False
    return True


def polyline_arclengths(line: np.ndarray) -> np.ndarray:
    """Cumulative arc length at each vertex of a polyline; starts at 0."""
    line = np.asarray(line, dtype=float)
    seg = np.diff(line, axis=0)
    return np.concatenate([[0.0], np.cumsum(np.hypot(seg[:, 0], seg[:, 1]))])


def resample_along_polyline(
    line: np.ndarray, arc_lengths: Sequence[float]
) -> tuple[np.ndarray, np.ndarray]:
    """Points and tangent headings at the given arc lengths along a polyline.

    Arc lengths must lie within ``[0, total length]`` (a tolerance of 1e-9 is
    allowed for accumulated rounding); anything else raises ``ValueError``.
    """
    line = np.asarray(line, dtype=float)
    seg = np.diff(line, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    if (seg_len == 0.0).any():
        raise ValueError("polyline has zero-length segments")
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = float(cum[-1])
    s = np.asarray(arc_lengths, dtype=float)
    if (s < -1e-9).any() or (s > total + 1e-9).any():
        raise ValueError(f"arc length outside [0, {total}]")
    s = np.clip(s, 0.0, total)
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg_len) - 1)
    frac = (s - cum[idx]) / seg_len[idx]
    points = line[idx] + seg[idx] * frac[:, None]
    headings = np.arctan2(seg[idx, 1], seg[idx, 0])
    return points, headings


def project_point_to_polyline(line: np.ndarray, point) -> tuple[float, float, float]:
    """Project a point onto a polyline.

    Returns ``(arc, distance, heading)`` for the closest point on the line;
    ties go to the earliest segment.
    """
    line = np.asarray(line, dtype=float)
    p = np.asarray(point, dtype=float)
    a = line[:-1]
    seg = np.diff(line, axis=0)
    seg_len2 = (seg**2).sum(axis=1)
    t = np.clip(((p - a) * seg).sum(axis=1) / seg_len2, 0.0, 1.0)
    closest = a + seg * t[:, None]
    d2 = ((closest - p) ** 2).sum(axis=1)
    i = int(np.argmin(d2))
    cum = polyline_arclengths(line)
    arc = float(cum[i] + t[i] * math.sqrt(seg_len2[i]))
    heading = math.atan2(seg[i, 1], seg[i, 0])
    return arc, math.sqrt(float(d2[i])), heading


# ---------------------------------------------------------------------------
# Scenario JSON schema
# ---------------------------------------------------------------------------


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "id": scenario.id,
        "lanes": [
            {
                "id": lane.id,
                "centerline": [[float(x), float(y)] for x, y in lane.centerline],
                "successors": list(lane.successors),
            }
            for lane in scenario.lanes
        ],
        "agents": [
            {
                "id": a.id,
                "footprint": {"length": a.footprint.length, "width": a.footprint.width},
                "history": a.history.to_rows(include_valid=True),
                "future": a.future.to_rows(include_valid=False),
            }
            for a in scenario.agents
        ],
        "interacting": list(scenario.interacting),
    }


def scenario_from_dict(data: Mapping) -> Scenario:
    lanes = [
        Lane(ln["id"], np.asarray(ln["centerline"], dtype=float), tuple(ln.get("successors", ())))
        for ln in data["lanes"]
    ]
    agents = [
        AgentTrack(
            ag["id"],
            AgentFootprint(ag["footprint"]["length"], ag["footprint"]["width"]),
            Trajectory.from_rows(ag["history"]),
            Trajectory.from_rows(ag["future"]),
        )
        for ag in data["agents"]
    ]
    return Scenario(data["id"], lanes, agents, tuple(data["interacting"]))


def scenario_to_json(scenario: Scenario) -> str:
    return json.dumps(scenario_to_dict(scenario), separators=(",", ":"))


def scenario_from_json(text: str) -> Scenario:
    return scenario_from_dict(json.loads(text))


def save_corpus(path, scenarios: Iterable[Scenario]) -> None:
    with open(path, "w") as fh:
        for sc in scenarios:
            fh.write(scenario_to_json(sc))
            fh.write("\n")


def load_corpus(path) -> list[Scenario]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(scenario_from_json(line))
    return out
