"""Influencer-reactor relation labeling and prediction.

Training-time labels come from a heuristic over ground-truth futures: find the
closest spatial approach of the two agents, compare when each agent reaches
its side of that approach, and call the later agent the yielder. At inference
time a small multinomial logistic regression over hand-crafted observation
features stands in for a learned context encoder.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    DT,
    FUTURE_STEPS,
    AgentFootprint,
    Scenario,
    Trajectory,
    pairwise_min_distance,
    wrap_angle,
)


class RelationType(enum.IntEnum):
    """Pairwise interaction category, phrased relative to the first agent.

    PASS: the first agent passes the second (first agent is the influencer).
    YIELD: the first agent yields to the second (first agent is the reactor).
    NONE: the agents never come close enough to interact.

    The integer values double as classifier class indices and as the fixed
    tie-break order NONE < PASS < YIELD.
    """

    NONE = 0
    PASS = 1
    YIELD = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, text: str) -> "RelationType":
        return cls[text.strip().upper()]


@dataclass(frozen=True)
class ConflictGeometry:
    """Closest-approach summary backing a relation label.

    ``distance`` is the minimum over all index pairs of the two futures,
    ``t1``/``t2`` are the per-agent arrival steps at that closest approach,
    and ``threshold`` is the footprint-dependent interaction cutoff.
    """

    distance: float
    t1: int
    t2: int
    threshold: float

    def __post_init__(self):
        if self.distance < 0.0:
            raise ValueError("distance must be >= 0")
        for t in (self.t1, self.t2):
            if not 0 <= t < FUTURE_STEPS:
                raise ValueError(f"arrival step {t} outside [0, {FUTURE_STEPS})")


@dataclass(frozen=True)
class RelationDistribution:
    """Probabilities over (NONE, PASS, YIELD)."""

    probabilities: tuple[float, float, float]

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.shape != (3,):
            raise ValueError("need exactly three probabilities")
        if (p < 0.0).any() or abs(float(p.sum()) - 1.0) > 1e-9:
            raise ValueError(f"not a distribution: {self.probabilities}")
        object.__setattr__(self, "probabilities", tuple(float(v) for v in p))

    def argmax(self) -> RelationType:
        # np.argmax takes the first maximum, realizing NONE < PASS < YIELD ties
        return RelationType(int(np.argmax(self.probabilities)))

    def confidence(self) -> float:
        return max(self.probabilities)


def dynamic_threshold(f1: AgentFootprint, f2: AgentFootprint) -> float:
    """Interaction cutoff: half the sum of the two footprint diagonals.

    This is the largest center distance at which the rectangles could touch
    under worst-case orientation, so it absorbs agent size into a single
    center-point comparison.
    """
    return 0.5 * (f1.diagonal + f2.diagonal)


def label_relation(
    y1: Trajectory,
    y2: Trajectory,
    f1: AgentFootprint,
    f2: AgentFootprint,
) -> tuple[RelationType, ConflictGeometry]:
    """Heuristic relation label from two ground-truth futures.

    The closest approach over all index pairs gives the conflict distance;
    each agent's arrival step is its own argmin (earliest step on ties).
    Beyond the dynamic threshold the relation is NONE. Otherwise the agent
    arriving later yields. Equal arrival steps resolve to PASS for the agent
    with the higher speed at the conflict step, PASS for agent 1 on a full
    tie, keeping labels deterministic.
    """
    if len(y1) != FUTURE_STEPS or len(y2) != FUTURE_STEPS:
        raise ValueError(f"futures must have {FUTURE_STEPS} steps")
    if not (y1.valid.all() and y2.valid.all()):
        raise ValueError("futures must be fully valid")
    distance, t1, _ = pairwise_min_distance(y1, y2)
    _, t2, _ = pairwise_min_distance(y2, y1)
    threshold = dynamic_threshold(f1, f2)
    geometry = ConflictGeometry(distance, t1, t2, threshold)
    if distance > threshold:
        return RelationType.NONE, geometry
    if t1 > t2:
        return RelationType.YIELD, geometry
    if t1 < t2:
        return RelationType.PASS, geometry
    if y1.speed[t1] >= y2.speed[t2]:
        return RelationType.PASS, geometry
    return RelationType.YIELD, geometry


@dataclass(frozen=True)
class RoleAssignment:
    """Influencer/reactor designation for an agent pair.

    ``reactor`` is None for independent (NONE) pairs, where both agents are
    treated as influencers and predicted marginally.
    """

    influencers: tuple[str, ...]
    reactor: str | None

    @property
    def independent(self) -> bool:
        return self.reactor is None


def assign_roles(relation: RelationType, pair: tuple[str, str]) -> RoleAssignment:
    """Map a pairwise relation onto influencer/reactor roles."""
    first, second = pair
    if relation is RelationType.YIELD:
        return RoleAssignment(influencers=(second,), reactor=first)
    if relation is RelationType.PASS:
        return RoleAssignment(influencers=(first,), reactor=second)
    return RoleAssignment(influencers=(first, second), reactor=None)


# ---------------------------------------------------------------------------
# Observation features
# ---------------------------------------------------------------------------

FEATURE_NAMES = (
    "rel_x",
    "rel_y",
    "rel_heading",
    "speed_1",
    "speed_2",
    "crossing_angle",
    "time_to_conflict_1",
    "time_to_conflict_2",
    "cv_min_distance",
)
NUM_FEATURES = len(FEATURE_NAMES)


def _constant_velocity_future(x, y, heading, speed) -> Trajectory:
    steps = np.arange(1, FUTURE_STEPS + 1) * DT
    xy = np.stack(
        [x + speed * math.cos(heading) * steps, y + speed * math.sin(heading) * steps],
        axis=1,
    )
    return Trajectory(xy, np.full(FUTURE_STEPS, heading), np.full(FUTURE_STEPS, speed))


def extract_pair_features(scenario: Scenario, first_id: str, second_id: str) -> np.ndarray:
    """Deterministic relation features for an agent pair, first-agent-centric.

    Uses each agent's last valid observed state: relative pose of the second
    agent in the first agent's frame, both speeds, the unsigned heading
    crossing angle, and a constant-velocity extrapolation of both agents over
    the horizon summarized by its closest approach and per-agent arrival
    times. All features are invariant to rigid transforms of the scene.
    """
    sa = scenario.agent(first_id).history
    sb = scenario.agent(second_id).history
    ka = sa.last_valid_index()
    kb = sb.last_valid_index()
    xa, ya = float(sa.xy[ka, 0]), float(sa.xy[ka, 1])
    xb, yb = float(sb.xy[kb, 0]), float(sb.xy[kb, 1])
    ha, hb = float(sa.heading[ka]), float(sb.heading[kb])
    va, vb = float(sa.speed[ka]), float(sb.speed[kb])

    dx, dy = xb - xa, yb - ya
    cos_a, sin_a = math.cos(ha), math.sin(ha)
    rel_x = dx * cos_a + dy * sin_a
    rel_y = -dx * sin_a + dy * cos_a
    rel_heading = float(wrap_angle(hb - ha))
    crossing = abs(rel_heading)

    cv_a = _constant_velocity_future(xa, ya, ha, va)
    cv_b = _constant_velocity_future(xb, yb, hb, vb)
    cv_dist, ta, _ = pairwise_min_distance(cv_a, cv_b)
    _, tb, _ = pairwise_min_distance(cv_b, cv_a)

    return np.array(
        [rel_x, rel_y, rel_heading, va, vb, crossing, ta * DT, tb * DT, cv_dist]
    )


def extract_relation_features(scenario: Scenario) -> np.ndarray:
    """Features for the scenario's designated interacting pair."""
    first_id, second_id = scenario.pair
    return extract_pair_features(scenario, first_id, second_id)


# ---------------------------------------------------------------------------
# Classifier
# ---------------------------------------------------------------------------


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def cross_entropy_loss_and_grad(
    weights: np.ndarray,
    bias: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy of softmax(W x + b) and its analytic gradient.

    ``features`` is (n, F) already standardized, ``labels`` is (n,) integer
    class indices. Returns (loss, d_weights, d_bias).
    """
    n = features.shape[0]
    probs = _softmax_rows(features @ weights.T + bias)
    picked = probs[np.arange(n), labels]
    loss = float(-np.log(np.maximum(picked, 1e-300)).mean())
    delta = probs.copy()
    delta[np.arange(n), labels] -= 1.0
    grad_w = delta.T @ features / n
    grad_b = delta.mean(axis=0)
    return loss, grad_w, grad_b


class RelationClassifier:
    """Multinomial logistic regression over the hand-crafted pair features.

    Standardization statistics are stored with the parameters so inference is
    self-contained; ``predict_proba`` accepts raw (unstandardized) features.
    """

    def __init__(
        self,
        weights: np.ndarray,
        bias: np.ndarray,
        feature_mean: np.ndarray,
        feature_std: np.ndarray,
    ):
        self.weights = np.asarray(weights, dtype=float)
        self.bias = np.asarray(bias, dtype=float)
        self.feature_mean = np.asarray(feature_mean, dtype=float)
        self.feature_std = np.asarray(feature_std, dtype=float)
        if self.weights.shape != (3, self.feature_mean.shape[0]):
            raise ValueError("weight matrix must be 3 x F")
        if self.bias.shape != (3,):
            raise ValueError("bias must have 3 entries")
        if not (
            np.isfinite(self.weights).all()
            and np.isfinite(self.bias).all()
            and np.isfinite(self.feature_mean).all()
            and np.isfinite(self.feature_std).all()
        ):
            raise ValueError("classifier parameters must be finite")

    def standardize(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=float) - self.feature_mean) / self.feature_std

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(self.standardize(features))
        return _softmax_rows(x @ self.weights.T + self.bias)

    def to_dict(self) -> dict:
        return {
            "weights": [[float(v) for v in row] for row in self.weights],
            "bias": [float(v) for v in self.bias],
            "feature_mean": [float(v) for v in self.feature_mean],
            "feature_std": [float(v) for v in self.feature_std],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RelationClassifier":
        return cls(
            np.asarray(data["weights"], dtype=float),
            np.asarray(data["bias"], dtype=float),
            np.asarray(data["feature_mean"], dtype=float),
            np.asarray(data["feature_std"], dtype=float),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "RelationClassifier":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def train_relation_classifier(
    corpus: list[tuple[np.ndarray, RelationType]],
    epochs: int = 800,
    learning_rate: float = 0.2,
) -> tuple[RelationClassifier, list[float]]:
    """Fit the relation classifier by full-batch gradient descent.

    Deterministic: parameters start at zero and the corpus order fixes the
    gradient exactly. Raises ``ValueError`` on an empty corpus or when any of
    the three classes is absent (a degenerate training set).

    Returns the classifier and the per-epoch loss trace (final entry is the
    loss after the last update).
    """
    if not corpus:
        raise ValueError("training corpus is empty")
    features = np.stack([np.asarray(f, dtype=float) for f, _ in corpus])
    labels = np.array([int(rel) for _, rel in corpus])
    present = set(labels.tolist())
    missing = [r.label for r in RelationType if int(r) not in present]
    if missing:
        raise ValueError(f"training corpus is missing relation classes: {missing}")

    mean = features.mean(axis=0)
    std = features.std(axis=0)
    std = np.where(std < 1e-8, 1.0, std)
    x = (features - mean) / std

    weights = np.zeros((3, x.shape[1]))
    bias = np.zeros(3)
    losses = []
    for _ in range(epochs):
        loss, grad_w, grad_b = cross_entropy_loss_and_grad(weights, bias, x, labels)
        weights -= learning_rate * grad_w
        bias -= learning_rate * grad_b
        losses.append(loss)
    final_loss, _, _ = cross_entropy_loss_and_grad(weights, bias, x, labels)
    losses.append(final_loss)
    return RelationClassifier(weights, bias, mean, std), losses


def predict_relation(classifier: RelationClassifier, features: np.ndarray) -> RelationDistribution:
    """Distribution over relation types for raw pair features."""
    probs = classifier.predict_proba(features)[0]
    # guard against rounding drift so the distribution invariant holds exactly
    probs = probs / probs.sum()
    return RelationDistribution(tuple(float(p) for p in probs))
