"""Point-count detection model, importance weights and perception gain.

An object with difficulty ``N_j`` is detected iff at least ``N_j`` LiDAR
points land on it. Difficulties follow the power-law survival function
``P(N_j > n) = n ** -0.6265``, which reproduces a miss probability that
decays as a power of the point count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MISS_EXPONENT = 0.6265
OBJECT_HEIGHT_M = 1.7


@dataclass(frozen=True)
class TrackedObject:
    object_id: int
    kind: str
    difficulty: int
    height_m: float = OBJECT_HEIGHT_M

    def __post_init__(self):
        if self.kind not in ("car", "pedestrian"):
            raise ValueError(f"unknown object kind {self.kind!r}")
        if self.difficulty < 1:
            raise ValueError("difficulty must be >= 1")


def difficulty_from_uniform(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u > 1)):
        raise ValueError("u must lie in (0, 1]")
    return np.ceil(u ** (-1.0 / MISS_EXPONENT)).astype(np.int64)


def sample_difficulty(rng: np.random.Generator, size=None):
    """``ceil(U ** (-1/0.6265))`` with ``U ~ Uniform(0, 1]``."""
    u = 1.0 - rng.random(size)  # (0, 1]
    n = difficulty_from_uniform(u)
    return int(n) if size is None else n


def detect(points_total: int, difficulty: int) -> bool:
    return points_total >= difficulty


def importance_weight(d: float) -> float:
    if d < 0:
        raise ValueError("distance must be >= 0")
    if d <= 10.0:
        return 1.0
    if d < 100.0:
        return 2.0 - math.log10(d)
    return 0.0


@dataclass
class PerceptionOutcome:
    object_ids: list
    weights: np.ndarray
    points_ego: np.ndarray
    points_cov: np.ndarray
    detected_standalone: np.ndarray
    detected_cp: np.ndarray
    cost_standalone: float
    cost_cp: float
    gain: float
    recall_standalone: float
    recall: float


def evaluate_perception(weights, difficulties, ego_points, cov_points, object_ids=None) -> PerceptionOutcome:
    """Costs, gain and recall for one (ego, CoV) pairing.

    All arrays are per object, restricted to objects with positive weight.
    An empty object set gives zero cost and recall 1 (nothing to miss).
    """
    w = np.asarray(weights, dtype=float)
    n_req = np.asarray(difficulties)
    p0 = np.asarray(ego_points, dtype=np.int64)
    pi = np.asarray(cov_points, dtype=np.int64)
    if np.any(w <= 0):
        raise ValueError("evaluate_perception expects only positively weighted objects")
    det0 = p0 >= n_req
    det_cp = (p0 + pi) >= n_req
    miss0 = ~det0
    c0 = float(np.sum(w * miss0))
    ci = float(np.sum(w * miss0 * ~det_cp))
    n = len(w)
    return PerceptionOutcome(
        object_ids=list(object_ids) if object_ids is not None else list(range(n)),
        weights=w,
        points_ego=p0,
        points_cov=pi,
        detected_standalone=det0,
        detected_cp=det_cp,
        cost_standalone=c0,
        cost_cp=ci,
        gain=float(np.sum(w * miss0 * det_cp)),
        recall_standalone=float(det0.mean()) if n else 1.0,
        recall=float(det_cp.mean()) if n else 1.0,
    )
