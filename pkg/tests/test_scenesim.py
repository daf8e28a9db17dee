import numpy as np
import pytest

from swarmtrack.metrics import overlap_score
from swarmtrack.scenesim import (
    Scenario,
    generate_trajectory,
    preset,
    read_sequence,
    render_sequence,
    simulate,
    write_sequence,
)


def test_constant_velocity_path():
    s = Scenario(kind="constant_velocity", frame_count=10, start=(30.0, 30.0), velocity=(1.0, 0.0))
    traj = generate_trajectory(s)
    assert traj.target[5].center() == (35.0, 30.0)


def test_abrupt_turn_reverses_velocity():
    s = Scenario(kind="abrupt_turn", frame_count=30, start=(40.0, 100.0), velocity=(2.0, 0.0), event_frames=(10,))
    t = generate_trajectory(s).target
    assert (t[10].cx - t[9].cx, t[10].cy - t[9].cy) == (2.0, 0.0)
    assert (t[11].cx - t[10].cx, t[11].cy - t[10].cy) == (-2.0, 0.0)


def test_distractor_overlaps_at_event_frame():
    s = preset("distractor_cross", 41, event_frames=(20,))
    traj = generate_trajectory(s)
    assert overlap_score(traj.target[20], traj.distractor[20]) > 0


def test_escaping_trajectory_rejected():
    with pytest.raises(ValueError, match="leaves"):
        generate_trajectory(Scenario(frame_count=400, velocity=(2.0, 0.0)))


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(frame_count=0)
    with pytest.raises(ValueError):
        Scenario(kind="occlusion", frame_count=10)
    with pytest.raises(ValueError):
        Scenario(kind="occlusion", frame_count=10, event_frames=(10,))
    with pytest.raises(ValueError):
        Scenario(kind="teleport")


def noiseless(kind, **kw):
    return preset(kind, 40, seed=1, pixel_noise_sigma=0.0, **kw)


def test_noiseless_paint():
    s = noiseless("constant_velocity")
    seq = render_sequence(s, generate_trajectory(s))
    gt = seq.ground_truth[0]
    frame = seq.frames[0]
    x0, y0 = int(gt.x0), int(gt.y0)
    patch = frame[y0 : y0 + int(gt.h), x0 : x0 + int(gt.w)]
    assert np.all(patch == s.target_color)
    assert np.all(frame[2, 2] == s.background_color)


def test_occluded_frame_paints_occluder():
    s = noiseless("occlusion", event_frames=(5,), occlusion_length=3)
    seq = simulate(s)
    traj = generate_trajectory(s)
    gt = seq.ground_truth[6]
    assert gt == traj.target[6]
    patch = seq.frames[6][int(gt.y0) + 1 : int(gt.y1) - 1, int(gt.x0) + 1 : int(gt.x1) - 1]
    assert np.all(patch == s.occluder_color)
    visible = seq.frames[9][int(seq.ground_truth[9].cy), int(seq.ground_truth[9].cx)]
    assert np.all(visible == s.target_color)


@pytest.mark.parametrize("kind", ["constant_velocity", "sinusoidal", "abrupt_turn", "distractor_cross", "occlusion", "scale_change"])
def test_presets_valid_and_deterministic(kind):
    s = preset(kind, 101, seed=4)
    a, b = simulate(s), simulate(s)
    assert len(a.ground_truth) == len(a.frames) == 101
    for fa, fb in zip(a.frames, b.frames):
        assert np.array_equal(fa, fb)
    for g in a.ground_truth:
        assert g.x0 >= 0 and g.y0 >= 0 and g.x1 <= a.width and g.y1 <= a.height


def test_point_mode_without_noise_reports_gt_center():
    seq = simulate(preset("sinusoidal", 50, mode="point", measurement_noise_sigma=0.0))
    for obs, gt in zip(seq.frames, seq.ground_truth):
        assert tuple(obs) == gt.center()


def test_scale_change_grows_box():
    traj = generate_trajectory(preset("scale_change", 21, scale_factor=2.0))
    assert traj.target[0].w == 20.0 and traj.target[-1].w == 40.0


@pytest.mark.parametrize("mode", ["raster", "point"])
def test_sequence_files_round_trip(tmp_path, mode):
    seq = simulate(preset("distractor_cross", 12, seed=9, mode=mode))
    write_sequence(seq, tmp_path / "a")
    back = read_sequence(tmp_path / "a")
    assert back.ground_truth == seq.ground_truth
    for f0, f1 in zip(seq.frames, back.frames):
        assert np.array_equal(f0, f1)
    gt_lines = (tmp_path / "a" / "gt.txt").read_text().splitlines()
    assert len(gt_lines) == 12 and gt_lines[0].startswith("0,")
    write_sequence(seq, tmp_path / "b")
    for p in (tmp_path / "a").rglob("*"):
        if p.is_file():
            assert p.read_bytes() == (tmp_path / "b" / p.relative_to(tmp_path / "a")).read_bytes()


def test_raster_frame_file_layout(tmp_path):
    seq = simulate(preset("constant_velocity", 3, seed=1))
    write_sequence(seq, tmp_path)
    raw = (tmp_path / "frames" / "frame_000001.rgb").read_bytes()
    assert len(raw) == seq.width * seq.height * 3
    # row-major RGB8: pixel (x, y) starts at (y * W + x) * 3
    x, y = 7, 11
    off = (y * seq.width + x) * 3
    assert tuple(raw[off : off + 3]) == tuple(seq.frames[1][y, x])
