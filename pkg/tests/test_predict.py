import math

import numpy as np
import pytest

from interpred.core import (
    DT,
    FUTURE_STEPS,
    HISTORY_STEPS,
    AgentFootprint,
    AgentTrack,
    Lane,
    Scenario,
    Trajectory,
)
from interpred.predict import (
    JointPredictionSet,
    JointSample,
    PredictionSet,
    PredictorConfig,
    constrained_speeds,
    fit_collision_penalty,
    joint_pair_probabilities,
    predict_conditional,
    predict_conditional_multi,
    predict_joint_baseline,
    predict_marginal,
    trapezoid_speeds,
)
from interpred.relation import dynamic_threshold

CAR = AgentFootprint(4.0, 2.0)
CFG = PredictorConfig()


def history_ending_at(x, y, heading, speed):
    back = DT * np.arange(HISTORY_STEPS - 1, -1, -1)
    xy = np.stack(
        [x - speed * math.cos(heading) * back, y - speed * math.sin(heading) * back], axis=1
    )
    return Trajectory(xy, np.full(HISTORY_STEPS, heading), np.full(HISTORY_STEPS, speed))


def straight_future(x, y, heading, speed):
    steps = DT * np.arange(1, FUTURE_STEPS + 1)
    xy = np.stack(
        [x + speed * math.cos(heading) * steps, y + speed * math.sin(heading) * steps], axis=1
    )
    return Trajectory(xy, np.full(FUTURE_STEPS, heading), np.full(FUTURE_STEPS, speed))


def crossing_influencer(cross_step, speed):
    """Future going +y through the origin at the given step."""
    steps = np.arange(1, FUTURE_STEPS + 1)
    y = (steps - float(cross_step)) * speed * DT
    return Trajectory(
        np.stack([np.zeros(FUTURE_STEPS), y], axis=1),
        np.full(FUTURE_STEPS, math.pi / 2),
        np.full(FUTURE_STEPS, speed),
    )


def two_agent_scenario(pose_a, pose_b, lanes=None):
    lanes = lanes if lanes is not None else [
        Lane("lane-0", np.array([[-200.0, 0.0], [600.0, 0.0]]))
    ]
    agents = [
        AgentTrack("a", CAR, history_ending_at(*pose_a), straight_future(*pose_a)),
        AgentTrack("b", CAR, history_ending_at(*pose_b), straight_future(*pose_b)),
    ]
    return Scenario("pred-test", lanes, agents, ("a", "b"))


def assert_kinematics(traj, cfg=CFG):
    limit = max(cfg.max_accel, cfg.max_decel) * DT + 1e-6
    assert (traj.speed >= 0.0).all()
    assert (np.abs(np.diff(traj.speed)) <= limit).all()


class TestPredictorConfig:
    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            PredictorConfig(max_accel=0.0)

    def test_rejects_n_above_goal_count(self):
        with pytest.raises(ValueError):
            PredictorConfig(num_samples=30, goal_candidates=24)


class TestTrapezoidSpeeds:
    def test_constant_speed_target(self):
        v = trapezoid_speeds(10.0, 80.0, FUTURE_STEPS)
        assert float(v.sum()) * DT == pytest.approx(80.0, abs=1e-6)
        assert np.abs(v - 10.0).max() < 1e-6

    def test_random_targets_feasible_and_accurate(self):
        rng = np.random.default_rng(20)
        for _ in range(50):
            v0 = rng.uniform(0.0, 15.0)
            lo = float(np.maximum(v0 - 5.0 * DT * np.arange(1, 81), 0.0).sum()) * DT
            hi = float(np.minimum(v0 + 3.0 * DT * np.arange(1, 81), 1e9).sum()) * DT
            target = rng.uniform(lo, hi)
            v = trapezoid_speeds(v0, target, FUTURE_STEPS)
            assert float(v.sum()) * DT == pytest.approx(target, abs=1e-6)
            dv = np.diff(np.concatenate([[v0], v]))
            assert (dv <= 3.0 * DT + 1e-9).all()
            assert (-dv <= 5.0 * DT + 1e-9).all()
            assert (v >= 0.0).all()

    def test_unreachably_far_target_clamps_to_full_accel(self):
        v = trapezoid_speeds(5.0, 1e6, FUTURE_STEPS)
        expect = np.minimum(5.0 + 3.0 * DT * np.arange(1, 81), 5.0 + 3.0 * DT * 80)
        np.testing.assert_allclose(v, expect)

    def test_too_close_target_brakes_fully(self):
        v = trapezoid_speeds(12.0, 0.0, FUTURE_STEPS)
        assert v[-1] == 0.0
        assert (np.diff(v) <= 1e-12).all()


class TestConstrainedSpeeds:
    def test_hold_then_release(self):
        base = np.full(FUTURE_STEPS, 8.0)
        speeds, peak = constrained_speeds(8.0, base, [(20.0, 50)])
        arcs = np.cumsum(speeds) * DT
        assert arcs[49] <= 20.0 + 1e-9  # held short of the hold point
        assert speeds[-1] > 1.0  # released and re-accelerating
        assert peak <= 5.0 + 1e-9

    def test_never_exceeds_base(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            v0 = rng.uniform(0.0, 12.0)
            base = trapezoid_speeds(v0, rng.uniform(10.0, 120.0), FUTURE_STEPS)
            hold = rng.uniform(1.0, 40.0)
            release = int(rng.integers(5, 75))
            speeds, _ = constrained_speeds(v0, base, [(hold, release)])
            assert (speeds <= base + 1e-12).all()


class TestPredictMarginal:
    def test_stationary_agent_stays_near_start(self):
        sc = two_agent_scenario((0.0, 0.0, 0.0, 0.0), (0.0, 80.0, 0.0, 0.0))
        pred = predict_marginal(sc, "a", CFG)
        top = pred.top().trajectory
        assert np.hypot(*(top.xy[-1] - np.array([0.0, 0.0]))) < 2.0

    def test_straight_lane_samples_stay_on_centerline(self):
        sc = two_agent_scenario((0.0, 0.0, 0.0, 10.0), (0.0, 80.0, 0.0, 10.0))
        pred = predict_marginal(sc, "a", CFG)
        for sample in pred.samples:
            assert np.abs(sample.trajectory.xy[:, 1]).max() < 0.1

    def test_constant_velocity_goal_covered(self):
        sc = two_agent_scenario((5.0, 0.0, 0.0, 10.0), (0.0, 80.0, 0.0, 10.0))
        pred = predict_marginal(sc, "a", CFG)
        target = np.array([5.0 + 80.0, 0.0])
        finals = [np.hypot(*(s.trajectory.xy[-1] - target)) for s in pred.samples]
        assert min(finals) < 1.0

    def test_normalized_sorted_and_sized(self):
        sc = two_agent_scenario((0.0, 0.0, 0.0, 7.0), (0.0, 80.0, 0.0, 7.0))
        pred = predict_marginal(sc, "a", CFG)
        assert len(pred.samples) == CFG.num_samples
        confs = [s.confidence for s in pred.samples]
        assert sum(confs) == pytest.approx(1.0, abs=1e-9)
        assert confs == sorted(confs, reverse=True)

    def test_kinematic_limits_on_all_samples(self):
        sc = two_agent_scenario((0.0, 0.0, 0.0, 13.0), (0.0, 80.0, 0.0, 13.0))
        for sample in predict_marginal(sc, "a", CFG).samples:
            assert_kinematics(sample.trajectory)

    def test_deterministic(self):
        sc = two_agent_scenario((0.0, 0.0, 0.0, 9.0), (0.0, 80.0, 0.0, 9.0))
        p1 = predict_marginal(sc, "a", CFG)
        p2 = predict_marginal(sc, "a", CFG)
        for s1, s2 in zip(p1.samples, p2.samples):
            assert s1.confidence == s2.confidence
            assert s1.trajectory == s2.trajectory

    def test_off_lane_agent_falls_back_to_heading_ray(self):
        lanes = [Lane("far", np.array([[0.0, 500.0], [100.0, 500.0]]))]
        sc = two_agent_scenario((0.0, 0.0, 0.3, 6.0), (0.0, 80.0, 0.0, 6.0), lanes=lanes)
        pred = predict_marginal(sc, "a", CFG)
        top = pred.top().trajectory
        ray = np.array([math.cos(0.3), math.sin(0.3)])
        lateral = top.xy @ np.array([-ray[1], ray[0]])
        assert np.abs(lateral).max() < 1e-6

    def test_requires_two_valid_history_states(self):
        sc = two_agent_scenario((0.0, 0.0, 0.0, 5.0), (0.0, 80.0, 0.0, 5.0))
        agent = sc.agent("a")
        mask = np.zeros(HISTORY_STEPS, dtype=bool)
        mask[-1] = True
        sparse = AgentTrack(
            "a",
            agent.footprint,
            Trajectory(agent.history.xy, agent.history.heading, agent.history.speed, mask),
            agent.future,
        )
        broken = Scenario("x", sc.lanes, [sparse, sc.agent("b")], ("a", "b"))
        with pytest.raises(ValueError):
            predict_marginal(broken, "a", CFG)

    def test_branching_lanes_spread_samples(self):
        lanes = [
            Lane("stem", np.array([[-50.0, 0.0], [20.0, 0.0]]), successors=("left", "right")),
            Lane("left", np.array([[20.0, 0.0], [200.0, 120.0]])),
            Lane("right", np.array([[20.0, 0.0], [200.0, -120.0]])),
        ]
        sc = two_agent_scenario((0.0, 0.0, 0.0, 10.0), (0.0, 80.0, 0.0, 10.0), lanes=lanes)
        finals = [s.trajectory.xy[-1] for s in predict_marginal(sc, "a", CFG).samples]
        ys = [f[1] for f in finals]
        assert max(ys) > 1.0
        assert min(ys) < -1.0


class TestPredictConditional:
    def reactor_scenario(self, v_r=8.0, arrival_step=40):
        x0 = -v_r * arrival_step * DT
        return two_agent_scenario((x0, 0.0, 0.0, v_r), (0.0, 200.0, 0.0, 8.0))

    def test_far_influencer_is_exact_passthrough(self):
        sc = self.reactor_scenario()
        faraway = straight_future(0.0, 1000.0, 0.0, 8.0)
        marginal = predict_marginal(sc, "a", CFG)
        conditional = predict_conditional(sc, "a", faraway, CAR, CFG)
        for ms, cs in zip(marginal.samples, conditional.samples):
            assert ms.confidence == cs.confidence
            assert ms.trajectory == cs.trajectory

    def test_crossing_conflict_yields_with_gap(self):
        v_r, v_i = 8.0, 8.0
        sc = self.reactor_scenario(v_r=v_r, arrival_step=40)
        influencer = crossing_influencer(38, v_i)
        eps = dynamic_threshold(CAR, CAR)
        marginal = predict_marginal(sc, "a", CFG)
        conditional = predict_conditional(sc, "a", influencer, CAR, CFG)

        un = marginal.top().trajectory
        d_un = np.hypot(un.xy[:, 0] - influencer.xy[:, 0], un.xy[:, 1] - influencer.xy[:, 1])
        assert d_un.min() < eps  # the unmodified plan genuinely conflicts

        t_clear = 38 + math.ceil(eps / v_i / DT)
        gap_steps = math.ceil(CFG.gap_seconds / DT)
        top = conditional.top().trajectory
        arrivals = np.flatnonzero(top.xy[:, 0] >= 0.0)
        assert arrivals.size > 0
        assert int(arrivals[0]) >= t_clear + gap_steps

        d_mod = np.hypot(top.xy[:, 0] - influencer.xy[:, 0], top.xy[:, 1] - influencer.xy[:, 1])
        assert d_mod.min() > eps
        assert_kinematics(top)

    def test_modified_samples_never_get_closer(self):
        sc = self.reactor_scenario(v_r=8.0, arrival_step=40)
        influencer = crossing_influencer(38, 8.0)
        marginal = predict_marginal(sc, "a", CFG)
        conditional = predict_conditional(sc, "a", influencer, CAR, CFG)
        margins = {
            tuple(np.round(s.trajectory.xy[-1], 6)): s.trajectory for s in marginal.samples
        }
        for cs in conditional.samples:
            key = tuple(np.round(cs.trajectory.xy[-1], 6))
            if key in margins:
                continue  # unmodified sample
            d_mod = np.hypot(
                cs.trajectory.xy[:, 0] - influencer.xy[:, 0],
                cs.trajectory.xy[:, 1] - influencer.xy[:, 1],
            ).min()
            d_all_un = [
                np.hypot(
                    t.xy[:, 0] - influencer.xy[:, 0], t.xy[:, 1] - influencer.xy[:, 1]
                ).min()
                for t in margins.values()
            ]
            assert d_mod >= min(d_all_un) - 1e-9

    def test_braking_penalizes_confidence(self):
        sc = self.reactor_scenario(v_r=8.0, arrival_step=40)
        influencer = crossing_influencer(38, 8.0)
        marginal = predict_marginal(sc, "a", CFG)
        conditional = predict_conditional(sc, "a", influencer, CAR, CFG)
        assert conditional.top().confidence < marginal.top().confidence

    def test_most_constraining_influencer_applies(self):
        sc = self.reactor_scenario(v_r=8.0, arrival_step=30)
        early = crossing_influencer(25, 8.0)
        late = crossing_influencer(35, 8.0)
        single = predict_conditional_multi(sc, "a", [(early, CAR)], CFG)
        both = predict_conditional_multi(sc, "a", [(early, CAR), (late, CAR)], CFG)

        def arrival(pred):
            xs = pred.top().trajectory.xy[:, 0]
            hits = np.flatnonzero(xs >= 0.0)
            return int(hits[0]) if hits.size else FUTURE_STEPS

        assert arrival(both) >= arrival(single)
        eps = dynamic_threshold(CAR, CAR)
        t_clear_late = 35 + math.ceil(eps / 8.0 / DT)
        assert arrival(both) >= t_clear_late + math.ceil(CFG.gap_seconds / DT)


class TestJointBaseline:
    def no_conflict_scenario(self):
        lanes = [
            Lane("lane-0", np.array([[-200.0, 0.0], [600.0, 0.0]])),
            Lane("lane-1", np.array([[-200.0, 60.0], [600.0, 60.0]])),
        ]
        return two_agent_scenario((0.0, 0.0, 0.0, 9.0), (0.0, 60.0, 0.0, 7.0), lanes=lanes)

    def test_pair_probabilities_sum_to_one(self):
        sc = self.no_conflict_scenario()
        probs, _, _ = joint_pair_probabilities(sc, ("a", "b"), CFG)
        assert probs.shape == (CFG.goal_candidates, CFG.goal_candidates)
        assert float(probs.sum()) == pytest.approx(1.0, abs=1e-9)

    def test_no_conflict_top_pair_is_top_marginals(self):
        sc = self.no_conflict_scenario()
        joint = predict_joint_baseline(sc, ("a", "b"), CFG)
        top = joint.top()
        top_a = predict_marginal(sc, "a", CFG).top().trajectory
        top_b = predict_marginal(sc, "b", CFG).top().trajectory
        assert top.trajectories["a"] == top_a
        assert top.trajectories["b"] == top_b

    def test_k_samples_sorted_renormalized(self):
        sc = self.no_conflict_scenario()
        joint = predict_joint_baseline(sc, ("a", "b"), CFG)
        assert len(joint.samples) == CFG.num_samples
        probs = [s.probability for s in joint.samples]
        assert sum(probs) == pytest.approx(1.0, abs=1e-9)
        assert probs == sorted(probs, reverse=True)
        for s in joint.samples:
            assert s.provenance["raw_probability"] <= 1.0

    def test_fit_collision_penalty_runs_on_grid(self):
        sc = self.no_conflict_scenario()
        weight, loss = fit_collision_penalty([sc], CFG, grid=np.array([0.0, 4.0]))
        assert weight in (0.0, 4.0)
        assert math.isfinite(loss)


class TestContainers:
    def test_joint_sample_validates_probability(self):
        traj = straight_future(0.0, 0.0, 0.0, 5.0)
        with pytest.raises(ValueError):
            JointSample({"a": traj}, probability=1.5)

    def test_joint_set_requires_descending(self):
        traj = straight_future(0.0, 0.0, 0.0, 5.0)
        s1 = JointSample({"a": traj}, probability=0.3)
        s2 = JointSample({"a": traj}, probability=0.7)
        with pytest.raises(ValueError):
            JointPredictionSet("x", (s1, s2))

    def test_prediction_set_requires_normalization(self):
        traj = straight_future(0.0, 0.0, 0.0, 5.0)
        with pytest.raises(ValueError):
            PredictionSet("a", (type("S", (), {})(),))
