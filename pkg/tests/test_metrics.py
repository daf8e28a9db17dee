import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swarmtrack.core import BoundingBox
from swarmtrack.metrics import (
    fps,
    frame_rmse,
    lost_targets,
    overlap_score,
    precision_curve,
    recall_curve,
    sequence_rmse,
)


def test_frame_rmse_examples():
    assert frame_rmse(np.array([[3.0, 4.0]] * 5), (3.0, 4.0)) == 0.0
    assert frame_rmse(np.array([[7.0, 0.0]]), (0.0, 0.0)) == 7.0
    assert frame_rmse(np.array([[3.0, 0.0], [0.0, 4.0]]), (0.0, 0.0)) == pytest.approx(math.sqrt(12.5), rel=1e-15)
    with pytest.raises(ValueError):
        frame_rmse(np.empty((0, 2)), (0, 0))


def test_frame_rmse_literal_variant():
    assert frame_rmse(np.array([[3.0, 0.0], [0.0, 4.0]]), (0.0, 0.0), literal=True) == pytest.approx(2.5)


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_single_particle_rmse_is_center_distance(x, y):
    assert frame_rmse(np.array([[x, y]]), (1.0, -2.0)) == pytest.approx(math.hypot(x - 1.0, y + 2.0), rel=1e-12, abs=1e-12)


class _Report:
    def __init__(self, errs):
        self.per_frame_swarm_errors = errs


@pytest.mark.parametrize("errs, expected", [([0.0, 0.0], 0.0), ([2.0, 4.0], 3.0), ([1.0, 2.0, 6.0], 3.0)])
def test_sequence_rmse(errs, expected):
    assert sequence_rmse(_Report(errs)) == expected


def test_overlap_examples():
    a = BoundingBox(1, 1, 2, 2)
    assert overlap_score(a, a) == 1.0
    assert overlap_score(a, BoundingBox(10, 10, 2, 2)) == 0.0
    assert overlap_score(a, BoundingBox(2, 1, 2, 2)) == pytest.approx(2 / 6, rel=1e-15)
    assert overlap_score(BoundingBox(0, 0, 0, 0), BoundingBox(0, 0, 0, 0)) == 0.0


# extents below ~1e-3 vanish under a shift of tens of pixels in float arithmetic
boxes = st.builds(
    BoundingBox,
    st.floats(-100, 100),
    st.floats(-100, 100),
    st.floats(1e-3, 50),
    st.floats(1e-3, 50),
)


@given(boxes, boxes, st.floats(-50, 50), st.floats(-50, 50))
def test_overlap_symmetric_bounded_translation_invariant(a, b, dx, dy):
    s = overlap_score(a, b)
    assert s == overlap_score(b, a)
    assert 0.0 <= s <= 1.0
    shifted = overlap_score(BoundingBox(a.cx + dx, a.cy + dy, a.w, a.h), BoundingBox(b.cx + dx, b.cy + dy, b.w, b.h))
    assert shifted == pytest.approx(s, abs=1e-9)


def test_precision_examples():
    assert precision_curve([5, 15, 25], [20]) == [(20.0, 2 / 3)]
    assert precision_curve([5, 15, 25], [1])[0][1] == 0.0
    assert precision_curve([5, 15, 25], [26])[0][1] == 1.0
    # strict inequality
    assert precision_curve([20.0], [20])[0][1] == 0.0
    with pytest.raises(ValueError):
        precision_curve([], [1])
    with pytest.raises(ValueError):
        precision_curve([1.0], [3, 2])


def test_recall_examples():
    assert recall_curve([0.2, 0.6, 0.9], [0.5]) == [(0.5, 2 / 3)]
    assert recall_curve([0.2, 0.6, 0.9], [0.0])[0][1] == 1.0
    assert recall_curve([0.2, 1.0, 0.9], [1.0])[0][1] == 0.0
    with pytest.raises(ValueError):
        recall_curve([1.2], [0.5])


def test_lost_targets_examples():
    assert lost_targets([5, 25, 15], 20) == 1
    assert lost_targets([1, 2, 3], 20) == 0
    assert lost_targets([21, 22, 30], 20) == 3
    assert lost_targets([20.0], 20) == 1


errors = st.lists(st.floats(0, 100), min_size=1, max_size=400)


@given(errors)
def test_curves_monotone(errs):
    p = [v for _, v in precision_curve(errs)]
    assert all(b >= a for a, b in zip(p, p[1:]))
    ov = [min(1.0, e / 100) for e in errs]
    r = [v for _, v in recall_curve(ov)]
    assert all(b <= a for a, b in zip(r, r[1:]))


@given(errors, st.floats(0.5, 60))
def test_lost_targets_complements_precision(errs, cet):
    p = precision_curve(errs, [cet])[0][1]
    lost = lost_targets(errs, cet)
    assert math.isclose(len(errs) * (1 - p), lost, abs_tol=1e-9)
    assert round(len(errs) * (1 - p)) == lost


def test_fps_examples():
    assert fps(301, 10) == pytest.approx(30.1)
    assert fps(100, 4) == 25
    assert fps(1, 0.5) == 2
    for bad in [(0, 1.0), (10, 0.0), (10, -1.0)]:
        with pytest.raises(ValueError):
            fps(*bad)
