import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopsched.analysis import loglog_miss_slope
from coopsched.rng import substream
from coopsched.world.detection import (MISS_EXPONENT, TrackedObject, detect, difficulty_from_uniform,
                                       evaluate_perception, importance_weight, sample_difficulty)


def test_difficulty_examples():
    assert difficulty_from_uniform(1.0) == 1
    # 0.0130 ** (-1/0.6265) = 1024.4, so the ceiling is 1025
    assert 0.0130 ** (-1 / 0.6265) == pytest.approx(1024.39, abs=0.01)
    assert difficulty_from_uniform(0.0130) == 1025
    assert difficulty_from_uniform(1024 ** -0.6265 * (1 + 1e-12)) == 1024
    with pytest.raises(ValueError):
        difficulty_from_uniform(0.0)


def test_sample_difficulty_scalar_and_array():
    rng = np.random.default_rng(0)
    assert isinstance(sample_difficulty(rng), int)
    arr = sample_difficulty(rng, 100)
    assert arr.shape == (100,) and arr.min() >= 1


def test_miss_rate_power_law():
    d = sample_difficulty(substream(0, "difficulty-fit"), 100_000)
    assert loglog_miss_slope(d) == pytest.approx(-MISS_EXPONENT, abs=0.05)


@given(st.integers(1, 5000))
def test_survival_function(n):
    # P(N > n) = P(U < n^-a) = n^-a, evaluated exactly at the boundary uniform
    u = n ** -MISS_EXPONENT
    assert difficulty_from_uniform(min(1.0, u * (1 + 1e-9))) <= n
    if n > 1:
        assert difficulty_from_uniform(u * (1 - 1e-9)) > n


def test_detect_examples():
    assert detect(5, 5)
    assert not detect(4, 5)
    assert not detect(0, 1)


def test_tracked_object_validates():
    with pytest.raises(ValueError):
        TrackedObject(1, "truck", 3)
    with pytest.raises(ValueError):
        TrackedObject(1, "car", 0)


def test_importance_weight_examples():
    assert importance_weight(5) == 1.0
    assert importance_weight(10) == 1.0
    assert importance_weight(10 ** 1.5) == pytest.approx(0.5)
    assert importance_weight(100) == 0.0
    assert importance_weight(150) == 0.0
    with pytest.raises(ValueError):
        importance_weight(-1)


@given(st.floats(0, 200), st.floats(0, 50))
def test_importance_weight_non_increasing(d, dd):
    assert importance_weight(d + dd) <= importance_weight(d)
    assert 0.0 <= importance_weight(d) <= 1.0


def test_evaluate_perception_example():
    out = evaluate_perception([1.0, 0.5, 0.2], [5, 5, 5], [9, 2, 0], [0, 4, 1])
    assert list(out.detected_standalone) == [True, False, False]
    assert list(out.detected_cp) == [True, True, False]
    assert out.gain == pytest.approx(0.5)
    assert out.cost_cp == pytest.approx(0.2)
    assert out.cost_standalone == pytest.approx(out.gain + out.cost_cp)
    assert out.recall == pytest.approx(2 / 3)


def test_evaluate_perception_identity_cases():
    assert evaluate_perception([1.0, 0.4], [3, 3], [0, 1], [0, 0]).gain == 0.0
    assert evaluate_perception([1.0, 0.4], [3, 3], [3, 9], [50, 50]).gain == 0.0
    empty = evaluate_perception([], [], [], [])
    assert empty.gain == 0.0 and empty.recall == 1.0
    with pytest.raises(ValueError):
        evaluate_perception([0.0], [1], [0], [0])


@given(st.lists(st.tuples(st.floats(0.01, 1), st.integers(1, 50), st.integers(0, 60),
                          st.integers(0, 60), st.integers(0, 30)), min_size=1, max_size=12))
def test_gain_monotone_in_cov_points(objs):
    w, n, p0, pi, extra = map(list, zip(*objs))
    a = evaluate_perception(w, n, p0, pi)
    b = evaluate_perception(w, n, p0, [x + e for x, e in zip(pi, extra)])
    assert b.gain >= a.gain - 1e-12
    assert 0.0 <= a.gain <= a.cost_standalone + 1e-12
    assert a.recall >= a.recall_standalone
