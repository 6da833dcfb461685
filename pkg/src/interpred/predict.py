"""Pluggable trajectory predictors.

Three predictors share one analytic goal-rollout backbone:

* ``predict_marginal``: lane-graph goal enumeration, speed-consistency
  scoring, trapezoidal speed profiles to each goal.
* ``predict_conditional``: the same rollouts, re-optimized longitudinally so
  the reactor clears conflicts with a given influencer future only after the
  influencer has passed, with a braking penalty on the sample confidence.
* ``predict_joint_baseline``: goal-pair enumeration over both agents with an
  analytic collision penalty, rolled out independently (deliberately
  non-reactive, mirroring the weakness of pairing-by-enumeration).

All predictors are deterministic: same scenario and config give bit-identical
outputs.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DT,
    FUTURE_STEPS,
    HORIZON_SEC,
    AgentFootprint,
    Scenario,
    Trajectory,
    polyline_arclengths,
    project_point_to_polyline,
    resample_along_polyline,
)
from .relation import dynamic_threshold

# heading mismatch weight (meters per radian) when matching agents to lanes
_LANE_HEADING_WEIGHT = 2.0
# corridors explored through the lane graph per agent
_MAX_CORRIDORS = 6
# iterative conflict-resolution rounds inside the conditional predictor
_MAX_CONFLICT_ROUNDS = 6
# conflicts closer than this along the path cannot be resolved by braking
_MIN_CONFLICT_ARC = 0.5


@dataclass(frozen=True)
class PredictorConfig:
    """Knobs shared by all predictors.

    ``num_samples`` is the per-agent sample count N; ``goal_candidates`` the
    goal pool size G per agent (the joint baseline scores all G^2 pairs).
    Acceleration limits bound every rollout; the safety gap is the time and
    distance margin a yielding reactor keeps at a conflict point.
    """

    num_samples: int = 6
    goal_candidates: int = 24
    max_accel: float = 3.0
    max_decel: float = 5.0
    comfort_decel: float = 2.5
    gap_seconds: float = 1.0
    gap_meters: float = 2.0
    yield_penalty: float = 0.2  # score units per m/s^2 of peak braking
    lane_bonus: float = 2.0
    lane_match_radius: float = 20.0
    collision_penalty: float = 4.0  # joint-baseline pair score penalty

    def __post_init__(self):
        positive = (
            self.num_samples,
            self.goal_candidates,
            self.max_accel,
            self.max_decel,
            self.comfort_decel,
            self.gap_seconds,
            self.gap_meters,
            self.lane_match_radius,
        )
        if any(v <= 0 for v in positive):
            raise ValueError("predictor config values must be positive")
        if self.num_samples > self.goal_candidates:
            raise ValueError("num_samples must not exceed goal_candidates")


@dataclass(frozen=True)
class PredictionSample:
    trajectory: Trajectory
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class PredictionSet:
    """Multi-modal prediction: samples sorted by descending confidence, sum 1."""

    agent_id: str
    samples: tuple[PredictionSample, ...]

    def __post_init__(self):
        if not self.samples:
            raise ValueError("prediction set needs at least one sample")
        confs = [s.confidence for s in self.samples]
        if abs(sum(confs) - 1.0) > 1e-9:
            raise ValueError(f"confidences must sum to 1, got {sum(confs)}")
        if any(confs[i] < confs[i + 1] for i in range(len(confs) - 1)):
            raise ValueError("samples must be sorted by descending confidence")

    def top(self) -> PredictionSample:
        return self.samples[0]

    def to_dict(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "samples": [
                {
                    "confidence": s.confidence,
                    "trajectory": s.trajectory.to_rows(include_valid=False),
                }
                for s in self.samples
            ],
        }


@dataclass(frozen=True)
class GoalCandidate:
    """A scored target point on (or off) the lane graph."""

    x: float
    y: float
    lane_id: str | None  # None for the constant-velocity fallback goal
    arc_offset: float  # along-path distance from the agent's position
    score: float


@dataclass(frozen=True)
class JointSample:
    """One trajectory per agent with a single probability."""

    trajectories: dict[str, Trajectory]
    probability: float
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0 + 1e-12:
            raise ValueError(f"probability must be in [0, 1], got {self.probability}")
        for aid, traj in self.trajectories.items():
            if len(traj) != FUTURE_STEPS:
                raise ValueError(f"trajectory for {aid} must have {FUTURE_STEPS} steps")


@dataclass(frozen=True)
class JointPredictionSet:
    """K selected joint samples, descending probability, renormalized to 1."""

    scenario_id: str
    samples: tuple[JointSample, ...]
    relation: object = None  # RelationType or None for independent pairing
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.samples:
            raise ValueError("joint prediction set needs at least one sample")
        probs = [s.probability for s in self.samples]
        if any(probs[i] < probs[i + 1] for i in range(len(probs) - 1)):
            raise ValueError("joint samples must be sorted by descending probability")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError(f"joint probabilities must sum to 1, got {sum(probs)}")

    def top(self) -> JointSample:
        return self.samples[0]

    def agent_ids(self) -> tuple[str, ...]:
        return tuple(self.samples[0].trajectories.keys())

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "relation": getattr(self.relation, "label", None),
            "samples": [
                {
                    "probability": s.probability,
                    "provenance": s.provenance,
                    "trajectories": {
                        aid: t.to_rows(include_valid=False)
                        for aid, t in s.trajectories.items()
                    },
                }
                for s in self.samples
            ],
        }


# ---------------------------------------------------------------------------
# Speed profiles
# ---------------------------------------------------------------------------


def trapezoid_speeds(
    v0: float,
    target_arc: float,
    steps: int,
    dt: float = DT,
    accel: float = 3.0,
    decel: float = 5.0,
) -> np.ndarray:
    """Speed profile ramping from v0 to a cruise speed within accel limits.

    The cruise speed is bisected so the Euler-integrated travel matches
    ``target_arc`` at the final step whenever the limits allow; infeasible
    targets clamp to the closest achievable profile (full braking or full
    acceleration). Speeds never go negative.
    """
    k = np.arange(1, steps + 1)

    def profile(cruise: float) -> np.ndarray:
        if cruise >= v0:
            return np.minimum(v0 + accel * dt * k, cruise)
        return np.maximum(v0 - decel * dt * k, cruise)

    lo, hi = 0.0, v0 + accel * dt * steps
    v_lo, v_hi = profile(lo), profile(hi)
    if target_arc <= float(v_lo.sum()) * dt:
        return v_lo
    if target_arc >= float(v_hi.sum()) * dt:
        return v_hi
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if float(profile(mid).sum()) * dt < target_arc:
            lo = mid
        else:
            hi = mid
    return profile(0.5 * (lo + hi))


def constrained_speeds(
    v0: float,
    base: np.ndarray,
    constraints: list[tuple[float, int]],
    dt: float = DT,
    accel: float = 3.0,
    decel: float = 5.0,
    comfort_decel: float = 2.5,
) -> tuple[np.ndarray, float]:
    """Follow ``base`` speeds while honoring hold-until-release constraints.

    Each constraint ``(hold_arc, release_step)`` caps the speed before its
    release step by the comfort-braking envelope toward ``hold_arc`` (so the
    agent can stop short of the hold point and wait); entering the envelope
    too fast escalates braking up to the hard ``decel`` limit. The result
    never exceeds the base profile. Returns the speeds and the peak realized
    deceleration in m/s^2.
    """
    out = np.empty_like(base)
    v_prev = v0
    s = 0.0
    peak = 0.0
    for k in range(len(base)):
        target = float(base[k])
        for hold_arc, release in constraints:
            if k < release:
                margin = hold_arc - s
                cap = math.sqrt(max(0.0, 2.0 * comfort_decel * margin))
                target = min(target, cap)
        v = min(max(target, v_prev - decel * dt), v_prev + accel * dt)
        v = max(v, 0.0)
        peak = max(peak, (v_prev - v) / dt)
        s += v * dt
        out[k] = v
        v_prev = v
    return out, peak


# ---------------------------------------------------------------------------
# Goal enumeration and rollouts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Corridor:
    """A drivable path: concatenated centerlines extended past the last lane."""

    lane_id: str
    line: np.ndarray
    start_arc: float  # agent's projected arc position on the line


@dataclass(frozen=True)
class _Rollout:
    goal: GoalCandidate
    corridor: _Corridor
    initial_speed: float
    speeds: np.ndarray
    trajectory: Trajectory


def _agent_pose(scenario: Scenario, agent_id: str) -> tuple[float, float, float, float]:
    history = scenario.agent(agent_id).history
    if history.valid_count() < 2:
        raise ValueError(f"agent {agent_id} needs >= 2 valid history states")
    k = history.last_valid_index()
    return (
        float(history.xy[k, 0]),
        float(history.xy[k, 1]),
        float(history.heading[k]),
        float(history.speed[k]),
    )


def _match_lane(scenario: Scenario, x: float, y: float, heading: float, cfg: PredictorConfig):
    """Nearest lane by position plus heading alignment; None when too far."""
    best = None
    for lane in scenario.lanes:
        arc, dist, lane_heading = project_point_to_polyline(lane.centerline, (x, y))
        if dist > cfg.lane_match_radius:
            continue
        mismatch = abs(
            math.remainder(heading - lane_heading, 2.0 * math.pi)
        )
        cost = dist + _LANE_HEADING_WEIGHT * mismatch
        key = (cost, lane.id)
        if best is None or key < best[0]:
            best = (key, lane, arc)
    if best is None:
        return None, 0.0
    return best[1], best[2]


def _extend_line(line: np.ndarray, extra: float) -> np.ndarray:
    tail = line[-1] - line[-2]
    tail = tail / math.hypot(*tail)
    return np.vstack([line, line[-1] + tail * extra])


def _corridors(
    scenario: Scenario,
    lane,
    start_arc: float,
    need_length: float,
    cfg: PredictorConfig,
) -> list[_Corridor]:
    """Enumerate lane-graph paths from the matched lane, breadth-first.

    Each corridor concatenates successor centerlines until it covers
    ``need_length`` past the agent's projection, then is extended straight so
    rollouts can never run off the end.
    """
    corridors: list[_Corridor] = []
    queue: list[tuple[np.ndarray, str, float]] = [(lane.centerline, lane.id, start_arc)]
    while queue and len(corridors) < _MAX_CORRIDORS:
        line, last_lane_id, arc0 = queue.pop(0)
        total = float(polyline_arclengths(line)[-1])
        successors = scenario.lane(last_lane_id).successors
        if total - arc0 >= need_length or not successors:
            corridors.append(_Corridor(lane.id, _extend_line(line, need_length + 60.0), arc0))
            continue
        for succ_id in sorted(successors):
            nxt = scenario.lane(succ_id).centerline
            if np.array_equal(line[-1], nxt[0]):
                nxt = nxt[1:]
            queue.append((np.vstack([line, nxt]), succ_id, arc0))
    if not corridors:
        corridors.append(
            _Corridor(lane.id, _extend_line(lane.centerline, need_length + 60.0), start_arc)
        )
    return corridors


def _base_rollouts(
    scenario: Scenario, agent_id: str, cfg: PredictorConfig
) -> tuple[list[_Rollout], np.ndarray]:
    """Exactly G scored goal rollouts for one agent.

    G - 1 goals sit at arc offsets evenly spread over the speed-reachable
    range along lane-graph corridors (round-robin across corridors); the last
    goal is the constant-velocity fallback along the current heading. Goals
    are scored by speed consistency plus a lane bonus; each rollout follows
    its corridor with a trapezoidal profile ending at the goal at the
    horizon.
    """
    x, y, heading, v0 = _agent_pose(scenario, agent_id)
    reach = v0 * HORIZON_SEC + 0.5 * cfg.max_accel * HORIZON_SEC**2

    lane, proj_arc = _match_lane(scenario, x, y, heading, cfg)
    if lane is None:
        if v0 < 1e-3 and not math.isfinite(heading):
            raise ValueError(f"agent {agent_id}: off-lane, stationary, no usable heading")
        ray = np.array(
            [
                [x, y],
                [x + math.cos(heading) * (reach + 60.0), y + math.sin(heading) * (reach + 60.0)],
            ]
        )
        corridors = [_Corridor(None, ray, 0.0)]
    else:
        corridors = _corridors(scenario, lane, proj_arc, reach, cfg)

    g = cfg.goal_candidates
    offsets = np.linspace(0.0, reach, g - 1) if g > 1 else np.array([])
    rollouts: list[_Rollout] = []
    direction = np.array([math.cos(heading), math.sin(heading)])

    def build(corridor: _Corridor, offset: float, lane_id, bonus: float) -> _Rollout:
        speeds = trapezoid_speeds(
            v0, offset, FUTURE_STEPS, DT, cfg.max_accel, cfg.max_decel
        )
        arcs = corridor.start_arc + np.cumsum(speeds) * DT
        points, tangents = resample_along_polyline(corridor.line, arcs)
        goal_xy, _ = resample_along_polyline(corridor.line, [corridor.start_arc + offset])
        goal = GoalCandidate(
            float(goal_xy[0, 0]),
            float(goal_xy[0, 1]),
            lane_id,
            float(offset),
            -((offset / HORIZON_SEC) - v0) ** 2 + bonus,
        )
        return _Rollout(goal, corridor, v0, speeds, Trajectory(points, tangents, speeds))

    for i, offset in enumerate(offsets):
        corridor = corridors[i % len(corridors)]
        rollouts.append(build(corridor, float(offset), corridor.lane_id, cfg.lane_bonus))

    # constant-velocity fallback: straight ray along the current heading
    ray = np.array([[x, y], [x + direction[0] * (reach + 60.0), y + direction[1] * (reach + 60.0)]])
    cv_corridor = _Corridor(None, ray, 0.0)
    rollouts.append(build(cv_corridor, v0 * HORIZON_SEC, None, 0.0))

    scores = np.array([ro.goal.score for ro in rollouts])
    return rollouts, scores


def _assemble_set(
    agent_id: str,
    trajectories: list[Trajectory],
    scores: np.ndarray,
    cfg: PredictorConfig,
) -> PredictionSet:
    """Top-N by score (stable on ties), softmax confidences, renormalized."""
    shifted = scores - scores.max()
    weights = np.exp(shifted)
    probs = weights / weights.sum()
    order = np.lexsort((np.arange(len(scores)), -scores))[: cfg.num_samples]
    kept = probs[order]
    kept = kept / kept.sum()
    samples = tuple(
        PredictionSample(trajectories[int(i)], float(p)) for i, p in zip(order, kept)
    )
    return PredictionSet(agent_id, samples)


def predict_marginal(scenario: Scenario, agent_id: str, cfg: PredictorConfig) -> PredictionSet:
    """Multi-modal lane-following prediction ignoring other agents' futures."""
    rollouts, scores = _base_rollouts(scenario, agent_id, cfg)
    return _assemble_set(agent_id, [ro.trajectory for ro in rollouts], scores, cfg)


# ---------------------------------------------------------------------------
# Conditional prediction
# ---------------------------------------------------------------------------


def _timed_violation(xy: np.ndarray, influencer_xy: np.ndarray, eps: float) -> int | None:
    """First common step where the two positions are within eps, else None."""
    steps = min(len(xy), len(influencer_xy))
    d = np.hypot(
        xy[:steps, 0] - influencer_xy[:steps, 0], xy[:steps, 1] - influencer_xy[:steps, 1]
    )
    hits = np.flatnonzero(d <= eps)
    return int(hits[0]) if hits.size else None


def _clear_step(influencer_xy: np.ndarray, point: np.ndarray, eps: float) -> int:
    """Last step the influencer is within eps of the point (argmin if never)."""
    d = np.hypot(influencer_xy[:, 0] - point[0], influencer_xy[:, 1] - point[1])
    near = np.flatnonzero(d <= eps)
    if near.size:
        return int(near[-1])
    return int(np.argmin(d))


def _conflict_arc(xy: np.ndarray, arcs: np.ndarray, influencer_xy: np.ndarray) -> tuple[float, np.ndarray]:
    """Arc of the rollout point closest to any influencer position."""
    diff = xy[:, None, :] - influencer_xy[None, :, :]
    d2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
    row = int(np.argmin(d2)) // d2.shape[1]
    return float(arcs[row]), xy[row]


def _resolve_against_influencers(
    rollout: _Rollout,
    influencers: list[tuple[Trajectory, float]],
    cfg: PredictorConfig,
) -> tuple[np.ndarray, float, bool]:
    """Iteratively brake the rollout until no timed conflict remains.

    Round one places the hold point behind the path-to-trajectory closest
    approach; later rounds (shared-corridor geometry, where the first fix can
    leave a catch-up conflict downstream) hold behind the first remaining
    encroachment. Each hold sits ``eps + gap_meters`` short of the conflict
    and releases ``gap_seconds`` after the influencer clears it. Braking is
    skipped when the conflict is behind the agent or the rollout already
    arrives late enough.
    """
    base = rollout.speeds
    base_arcs = np.cumsum(base) * DT
    gap_steps = math.ceil(cfg.gap_seconds / DT)

    constraints: list[tuple[float, int]] = []
    speeds = base
    peak = 0.0
    for round_idx in range(_MAX_CONFLICT_ROUNDS):
        arcs = np.cumsum(speeds) * DT
        points, _ = resample_along_polyline(
            rollout.corridor.line, rollout.corridor.start_arc + arcs
        )
        pending: tuple[float, int] | None = None
        for traj, eps in influencers:
            hit = _timed_violation(points, traj.xy, eps)
            if hit is None:
                continue
            if round_idx == 0:
                arc_c, point_c = _conflict_arc(points, arcs, traj.xy)
            else:
                arc_c, point_c = float(arcs[hit]), points[hit]
            if arc_c < _MIN_CONFLICT_ARC:
                continue  # conflict at or behind the start: braking cannot help
            release = _clear_step(traj.xy, point_c, eps) + gap_steps
            arrival = np.flatnonzero(arcs >= arc_c)
            arrival_step = int(arrival[0]) if arrival.size else len(arcs)
            if arrival_step >= release:
                continue  # already late enough
            hold = max(0.0, arc_c - (eps + cfg.gap_meters))
            if pending is None or release > pending[1] or (
                release == pending[1] and hold < pending[0]
            ):
                pending = (hold, release)
        if pending is None:
            break
        if pending in constraints:
            break  # no further progress possible
        constraints.append(pending)
        speeds, peak = constrained_speeds(
            rollout.initial_speed,
            base,
            constraints,
            DT,
            cfg.max_accel,
            cfg.max_decel,
            cfg.comfort_decel,
        )
    return speeds, peak, bool(constraints)


def predict_conditional_multi(
    scenario: Scenario,
    reactor_id: str,
    influencers: list[tuple[Trajectory, AgentFootprint]],
    cfg: PredictorConfig,
    _base: tuple[list[_Rollout], np.ndarray] | None = None,
) -> PredictionSet:
    """Reactor prediction conditioned on one or more influencer futures.

    With several influencers the most constraining arrival shift applies at
    each conflict. ``_base`` lets callers reuse precomputed goal rollouts
    when conditioning the same reactor on many influencer samples.
    """
    rollouts, scores = _base if _base is not None else _base_rollouts(scenario, reactor_id, cfg)
    reactor_fp = scenario.agent(reactor_id).footprint
    pairs = [(traj, dynamic_threshold(reactor_fp, fp)) for traj, fp in influencers]

    trajectories: list[Trajectory] = []
    adjusted = scores.copy()
    for idx, rollout in enumerate(rollouts):
        speeds, peak, modified = _resolve_against_influencers(rollout, pairs, cfg)
        if modified:
            arcs = rollout.corridor.start_arc + np.cumsum(speeds) * DT
            points, tangents = resample_along_polyline(rollout.corridor.line, arcs)
            trajectories.append(Trajectory(points, tangents, speeds))
            adjusted[idx] = scores[idx] - cfg.yield_penalty * peak
        else:
            trajectories.append(rollout.trajectory)
    return _assemble_set(reactor_id, trajectories, adjusted, cfg)


def predict_conditional(
    scenario: Scenario,
    reactor_id: str,
    influencer_future: Trajectory,
    influencer_footprint: AgentFootprint,
    cfg: PredictorConfig,
) -> PredictionSet:
    """Reactor prediction conditioned on a single influencer future."""
    if len(influencer_future) != FUTURE_STEPS:
        raise ValueError(f"influencer future must have {FUTURE_STEPS} steps")
    return predict_conditional_multi(
        scenario, reactor_id, [(influencer_future, influencer_footprint)], cfg
    )


# ---------------------------------------------------------------------------
# Joint goal-pair baseline
# ---------------------------------------------------------------------------


def joint_pair_probabilities(
    scenario: Scenario, pair: tuple[str, str], cfg: PredictorConfig
) -> tuple[np.ndarray, list[_Rollout], list[_Rollout]]:
    """Softmax distribution over all G x G goal pairs for the agent pair.

    A pair's score is the sum of the individual goal scores minus a penalty
    when straight-line interpolations to the two goals come within the
    footprint threshold at a common step.
    """
    first, second = pair
    rollouts_a, scores_a = _base_rollouts(scenario, first, cfg)
    rollouts_b, scores_b = _base_rollouts(scenario, second, cfg)
    eps = dynamic_threshold(
        scenario.agent(first).footprint, scenario.agent(second).footprint
    )

    def straight_lines(scn_agent: str, rollouts: list[_Rollout]) -> np.ndarray:
        x, y, _, _ = _agent_pose(scenario, scn_agent)
        start = np.array([x, y])
        goals = np.array([[ro.goal.x, ro.goal.y] for ro in rollouts])
        frac = (np.arange(1, FUTURE_STEPS + 1) / FUTURE_STEPS)[None, :, None]
        return start[None, None, :] + (goals[:, None, :] - start[None, None, :]) * frac

    lines_a = straight_lines(first, rollouts_a)  # (G, T, 2)
    lines_b = straight_lines(second, rollouts_b)
    diff = lines_a[:, None, :, :] - lines_b[None, :, :, :]
    dist2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
    colliding = (dist2 <= eps * eps).any(axis=2)

    pair_scores = scores_a[:, None] + scores_b[None, :] - cfg.collision_penalty * colliding
    flat = pair_scores - pair_scores.max()
    weights = np.exp(flat)
    probs = weights / weights.sum()
    return probs, rollouts_a, rollouts_b


def predict_joint_baseline(
    scenario: Scenario,
    pair: tuple[str, str],
    cfg: PredictorConfig,
    k: int | None = None,
) -> JointPredictionSet:
    """Goal-pair enumeration baseline: top-K pairs, independent rollouts."""
    k = cfg.num_samples if k is None else k
    first, second = pair
    probs, rollouts_a, rollouts_b = joint_pair_probabilities(scenario, pair, cfg)
    g_a, g_b = probs.shape
    flat = probs.ravel()
    i_idx, j_idx = np.divmod(np.arange(flat.size), g_b)
    order = np.lexsort((j_idx, i_idx, -flat))[:k]
    raw = flat[order]
    total = float(raw.sum())
    samples = []
    for rank, flat_idx in enumerate(order):
        i, j = int(i_idx[flat_idx]), int(j_idx[flat_idx])
        samples.append(
            JointSample(
                trajectories={
                    first: rollouts_a[i].trajectory,
                    second: rollouts_b[j].trajectory,
                },
                probability=float(raw[rank]) / total,
                provenance={
                    "goal_indices": [i, j],
                    "raw_probability": float(raw[rank]),
                    "normalizer": total,
                },
            )
        )
    return JointPredictionSet(scenario.id, tuple(samples), relation=None, meta={"mode": "joint"})


def fit_collision_penalty(
    scenarios: list[Scenario],
    cfg: PredictorConfig,
    grid: np.ndarray | None = None,
) -> tuple[float, float]:
    """1-D grid search of the pair-collision penalty against labeled best pairs.

    For each scenario the supervision target is the goal pair whose endpoints
    are closest to the ground-truth endpoints; the loss is the mean cross
    entropy of the pair distribution at that index. Returns (weight, loss).
    """
    grid = np.linspace(0.0, 10.0, 21) if grid is None else np.asarray(grid, dtype=float)
    best: tuple[float, float] | None = None
    for weight in grid:
        trial_cfg = dataclasses.replace(cfg, collision_penalty=float(weight))
        losses = []
        for scenario in scenarios:
            pair = scenario.pair
            probs, rollouts_a, rollouts_b = joint_pair_probabilities(scenario, pair, trial_cfg)
            gt_a = scenario.agent(pair[0]).future.xy[-1]
            gt_b = scenario.agent(pair[1]).future.xy[-1]
            ends_a = np.array([[ro.goal.x, ro.goal.y] for ro in rollouts_a])
            ends_b = np.array([[ro.goal.x, ro.goal.y] for ro in rollouts_b])
            best_a = int(np.argmin(np.hypot(*(ends_a - gt_a).T)))
            best_b = int(np.argmin(np.hypot(*(ends_b - gt_b).T)))
            losses.append(-math.log(max(float(probs[best_a, best_b]), 1e-300)))
        mean_loss = float(np.mean(losses))
        if best is None or mean_loss < best[1]:
            best = (float(weight), mean_loss)
    assert best is not None
    return best
