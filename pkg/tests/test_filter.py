import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarmtrack.core import Swarm, TrackerConfig, rng_stream
from swarmtrack.filter import (
    VelocityMemory,
    effective_sample_size,
    estimate_state,
    importance_weights,
    memory_step_size,
    propagate,
    sir_resample,
    systematic_indices,
    track_sequence,
)
from swarmtrack.scenesim import preset, simulate


class _Fixed:
    """Generator stand-in that returns a fixed offset for the single systematic draw."""

    def __init__(self, u):
        self.u = u

    def random(self):
        return self.u


def loop_systematic(weights, u):
    """Two-pointer systematic selection, written independently of the library path."""
    n = len(weights)
    cum, out, j = 0.0, [], 0
    cum = weights[0]
    for i in range(n):
        point = (u + i) / n
        while point >= cum and j < n - 1:
            j += 1
            cum += weights[j]
        out.append(j)
    return out


def test_importance_weights_examples():
    w, flag = importance_weights([2, 2])
    assert w.tolist() == [0.5, 0.5] and not flag
    w, flag = importance_weights([0, 5])
    assert w.tolist() == [0.0, 1.0] and not flag
    w, flag = importance_weights([0, 0, 0])
    np.testing.assert_array_equal(w, np.full(3, 1 / 3))
    assert flag
    for bad in ([-1.0, 2.0], [math.inf, 1.0], [math.nan]):
        with pytest.raises(ValueError):
            importance_weights(bad)


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=300))
def test_importance_weights_normalized(lik):
    w, _ = importance_weights(lik)
    assert abs(w.sum() - 1.0) <= 1e-12


def test_ess_examples():
    assert effective_sample_size(np.full(300, 1 / 300)) == pytest.approx(300, abs=1e-12)
    assert effective_sample_size([0, 0, 1.0, 0]) == 1.0
    assert effective_sample_size([0.5, 0.5, 0, 0]) == 2.0
    with pytest.raises(ValueError):
        effective_sample_size([0.5, 0.6])


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=200).filter(lambda v: sum(v) > 0))
def test_ess_bounds(raw):
    w = np.asarray(raw) / np.sum(raw)
    ess = effective_sample_size(w)
    assert 1 - 1e-9 <= ess <= len(w) + 1e-9


def test_systematic_one_hot():
    idx = systematic_indices([0, 0, 1.0, 0, 0], rng_stream(0, 0))
    assert idx.tolist() == [2] * 5


@pytest.mark.parametrize("n", [1, 3, 7, 49, 300])
@pytest.mark.parametrize("u", [0.0, 0.25, 0.5, 0.999999])
def test_systematic_uniform_selects_each_once(n, u):
    idx = systematic_indices(np.full(n, 1.0 / n), _Fixed(u))
    assert sorted(idx.tolist()) == list(range(n))


@settings(max_examples=100)
@given(st.integers(0, 2**32), st.integers(1, 50), st.floats(0, 0.999))
def test_systematic_matches_loop_oracle(seed, n, u):
    w = np.random.default_rng(seed).random(n) ** 3
    w /= w.sum()
    assert systematic_indices(w, _Fixed(u)).tolist() == loop_systematic(w, u)


def test_sir_resample_contract():
    rand = np.random.default_rng(4)
    sw = Swarm.from_positions(rand.normal(size=(20, 2)))
    sw.weights = rand.random(20)
    sw.weights /= sw.weights.sum()
    out = sir_resample(sw, rng_stream(1, 0))
    assert out.size == 20
    np.testing.assert_array_equal(out.weights, np.full(20, 1 / 20))
    originals = {tuple(p) for p in sw.positions}
    assert all(tuple(p) in originals for p in out.positions)


def test_resampled_mean_tracks_weighted_mean():
    rand = np.random.default_rng(8)
    sw = Swarm.from_positions(rand.uniform(1, 10, size=(10, 1)))
    w = rand.random(10)
    sw.weights = w / w.sum()
    exact = float(sw.weights @ sw.positions[:, 0])
    means = [sir_resample(sw, rng_stream(3, i)).positions.mean() for i in range(10_000)]
    assert abs(np.mean(means) - exact) / exact < 0.01


def test_estimate_state_examples():
    sw = Swarm.from_positions(np.array([[1.0, 2.0], [5.0, 6.0]]), weights=np.array([1.0, 0.0]))
    np.testing.assert_array_equal(estimate_state(sw), [1.0, 2.0])
    sw = Swarm.from_positions(np.array([[0.0, 0.0], [2.0, 2.0]]))
    np.testing.assert_array_equal(estimate_state(sw), [1.0, 1.0])
    sw = Swarm.from_positions(np.array([[0.0], [4.0]]), weights=np.array([0.75, 0.25]))
    np.testing.assert_array_equal(estimate_state(sw), [1.0])


# hand oracle: v_f = 2 * sum(lambda_sorted[a] * v_{k-a}); descending pairing reverses lambda
MEMORY_FIXTURES = [
    # (oldest .. newest, literal, descending)
    (((1.0, 0.0), (1.0, 0.0), (1.0, 0.0)), (2.0, 0.0), (2.0, 0.0)),
    (((0.0, 0.0), (0.0, 0.0), (1.0, 0.0)), (0.0, 0.0), (2.0, 0.0)),
    (((0.0, 0.0), (0.0, 0.0), (0.0, 0.0)), (0.0, 0.0), (0.0, 0.0)),
]


@pytest.mark.parametrize("recent, literal, descending", MEMORY_FIXTURES)
def test_memory_step_size_fixtures(recent, literal, descending):
    mem = VelocityMemory(recent)
    np.testing.assert_allclose(memory_step_size(mem), literal, atol=1e-12)
    np.testing.assert_allclose(memory_step_size(mem, pair_descending=True), descending, atol=1e-12)


def test_memory_step_size_unequal_speeds():
    # speeds 1, 2, 3 -> lambda sorted [1/6, 2/6, 3/6]; newest (3,0) gets 1/6
    mem = VelocityMemory(((1.0, 0.0), (0.0, 2.0), (3.0, 0.0)))
    np.testing.assert_allclose(memory_step_size(mem), (2 * (3 / 6 + 3 / 6), 2 * (2 / 6 * 2)), atol=1e-12)
    np.testing.assert_allclose(
        memory_step_size(mem, pair_descending=True), (2 * (3 * 3 / 6 + 1 / 6), 2 * (2 / 6 * 2)), atol=1e-12
    )


def test_memory_bootstrap_and_depth():
    assert memory_step_size(VelocityMemory(((5.0, 5.0),))).tolist() == [0.0, 0.0]
    mem = VelocityMemory()
    for i in range(5):
        mem = mem.push((float(i), 0.0))
    assert mem.recent == ((2.0, 0.0), (3.0, 0.0), (4.0, 0.0))


def test_propagate_no_drift_no_diffusion():
    pos = np.random.default_rng(0).normal(size=(50, 2))
    out = propagate(pos, np.zeros(2), np.zeros(2), rng_stream(0, 0))
    np.testing.assert_array_equal(out, pos)


def test_propagate_drift_bounded_by_step():
    pos = np.zeros((1000, 2))
    out = propagate(pos, np.array([2.0, -3.0]), np.zeros(2), rng_stream(0, 0))
    assert np.all(np.abs(out) <= [2.0, 3.0])


def test_propagate_displacement_has_zero_mean():
    pos = np.zeros((10_000, 2))
    out = propagate(pos, np.array([2.0, 0.0]), np.array([1.0, 1.0]), rng_stream(17, 0))
    assert np.all(np.abs(out.mean(axis=0)) <= 0.05)


def point_scene(**kw):
    return simulate(preset("constant_velocity", 60, seed=3, mode="point", **kw))


@pytest.mark.parametrize("tracker", ["PF", "PSO-PF", "AWQPSO-PF"])
def test_stationary_target_error_bounded_by_diffusion(tracker):
    seq = point_scene(velocity=(0.0, 0.0), measurement_noise_sigma=0.0)
    cfg = TrackerConfig(population=60, seed=2)
    rep = track_sequence(seq, tracker, cfg)
    bound = 3 * math.sqrt(max(cfg.motion_diffusion))
    assert max(rep.center_errors()) <= bound
    assert max(rep.per_frame_swarm_errors) <= bound


@pytest.mark.parametrize("tracker", ["PF", "AWQPSO-PF"])
def test_tracking_is_deterministic(tracker):
    seq = simulate(preset("distractor_cross", 30, seed=5))
    cfg = TrackerConfig(population=40, seed=5)
    a = track_sequence(seq, tracker, cfg).to_dict(include_timing=False)
    b = track_sequence(seq, tracker, cfg).to_dict(include_timing=False)
    assert a == b


def test_population_of_one():
    seq = point_scene()
    rep = track_sequence(seq, "AWQPSO-PF", TrackerConfig(population=1, seed=1))
    assert rep.frames_processed == len(seq)
    assert all(math.isfinite(e) for e in rep.per_frame_swarm_errors)


def test_track_rejects_bad_inputs():
    seq = point_scene()
    with pytest.raises(ValueError, match="PF, PSO-PF, AWQPSO-PF"):
        track_sequence(seq, "KF", TrackerConfig(population=10))
    with pytest.raises(ValueError):
        track_sequence(simulate(preset("constant_velocity", 1, mode="point")), "PF", TrackerConfig(population=10))
    raster = simulate(preset("constant_velocity", 5))
    with pytest.raises(ValueError, match="point"):
        track_sequence(raster, "PF", TrackerConfig(population=10), observation="point")


def test_box_mode_keeps_center_on_growing_target():
    # a mean-color window inside the target scores the peak at any size, so only the center is checked
    seq = simulate(preset("scale_change", 40, seed=2, pixel_noise_sigma=4.0))
    rep = track_sequence(seq, "AWQPSO-PF", TrackerConfig(population=80, seed=2, box_mode=True))
    assert all(e.has_box for e in rep.per_frame_estimates)
    assert max(rep.center_errors()) < 10.0


def test_resampling_triggered_below_ess_threshold():
    seq = simulate(preset("constant_velocity", 30, seed=1))
    lo = track_sequence(seq, "PF", TrackerConfig(population=50, seed=1, ess_threshold_fraction=1e-9))
    hi = track_sequence(seq, "PF", TrackerConfig(population=50, seed=1, ess_threshold_fraction=1.0))
    assert lo.resampled_frames == []
    assert len(hi.resampled_frames) > 0
