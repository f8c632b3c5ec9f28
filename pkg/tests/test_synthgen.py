import numpy as np
import pytest

import egofront.config as cfg
from egofront.camera import RigidPose
from egofront.dataset import default_splits, windows
from egofront.errors import LengthTooShort
from egofront.synthgen import (
    SCRIPTS,
    FaceState,
    SynthConfig,
    default_cameras,
    generate_sequence,
    make_state_track,
    mouth_box,
    render_pair,
    simulate_capture,
    state_deltas,
)

RES = 64


def _talking_state(mouth_open=0.5):
    return FaceState(mouth_open=mouth_open, gaze=(0.2, -0.1), brow_raise=0.3, rigid_pose=RigidPose((0.1, 0.05, 0.0)))


def test_face_state_clamps_scalars():
    state = FaceState(mouth_open=1.7, blink_left=-0.2, gaze=(3.0, -3.0), rigid_pose=RigidPose(translation=(2.0, 0.0, 0.0)))
    assert state.mouth_open == 1.0
    assert state.blink_left == 0.0
    assert state.gaze == (1.0, -1.0)
    assert state.rigid_pose.translation[0] == cfg.SCENE_BOUNDS[0]


def test_render_pair_is_deterministic():
    cams = default_cameras(RES)
    a = render_pair(_talking_state(), cams, RES, seed=3, background="textured")
    b = render_pair(_talking_state(), cams, RES, seed=3, background="textured")
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


def test_render_pair_rejects_unsupported_resolution():
    with pytest.raises(ValueError):
        render_pair(_talking_state(), default_cameras(RES), 48)


def test_open_mouth_changes_mouth_region():
    cams = default_cameras(RES)
    _, closed, _, _ = render_pair(FaceState(mouth_open=0.0), cams, RES)
    _, opened, _, _ = render_pair(FaceState(mouth_open=1.0), cams, RES)
    left, top, right, bottom = mouth_box(cams[1], RES)
    region = np.any(closed[top:bottom, left:right] != opened[top:bottom, left:right], axis=-1)
    assert region.size > 0
    assert region.mean() >= 0.01


def test_masks_are_binary_and_exact_on_black_background():
    ego, front, ego_mask, front_mask = render_pair(_talking_state(), default_cameras(RES), RES)
    for frame, mask in ((ego, ego_mask), (front, front_mask)):
        assert set(np.unique(mask)) <= {0, 1}
        assert mask.any()
        assert not np.any(frame[mask == 0])


def test_occlusion_pushes_face_off_left_edge():
    _, _, clear_mask, _ = render_pair(FaceState(), default_cameras(RES, occlusion=0.0), RES)
    _, _, occluded_mask, _ = render_pair(FaceState(), default_cameras(RES, occlusion=0.4), RES)
    assert occluded_mask.sum() < clear_mask.sum()
    assert occluded_mask[:, 0].any()


def test_mouth_box_is_visible_in_the_egocentric_mask():
    cams = default_cameras(RES)
    _, _, ego_mask, _ = render_pair(FaceState(mouth_open=1.0), cams, RES)
    left, top, right, bottom = mouth_box(cams[0], RES)
    assert right > left and bottom > top
    assert ego_mask[top:bottom, left:right].any()


def test_state_track_respects_max_delta():
    synth = SynthConfig(max_delta=0.1, max_pose_delta=0.02)
    track = make_state_track(400, SCRIPTS["multi_pose"], seed=5, synth=synth)
    deltas = state_deltas(track)
    assert (deltas <= 0.1 + 1e-12).all()
    pose_deltas = state_deltas(track, ["yaw", "pitch", "roll", "tx", "ty", "tz"])
    assert (pose_deltas <= 0.02 + 1e-12).all()
    assert track["mouth_open"].between(0.0, 1.0).all()


def test_state_track_is_seeded():
    a = make_state_track(100, seed=1)
    b = make_state_track(100, seed=1)
    c = make_state_track(100, seed=2)
    assert a.equals(b)
    assert not a.equals(c)


def test_static_pose_script_keeps_pose_fixed():
    track = make_state_track(120, SCRIPTS["static_pose"], seed=0)
    assert (track[["yaw", "pitch", "roll", "tx", "ty", "tz"]] == 0.0).all().all()


def test_generate_sequence_is_deterministic_and_writes_layout(tmp_path):
    a = generate_sequence(20, "talking", 1, window_size=5, root=tmp_path / "a")
    b = generate_sequence(20, "talking", 1, window_size=5, root=tmp_path / "b")
    assert np.array_equal(a.ego_frames, b.ego_frames)
    assert np.array_equal(a.front_frames, b.front_frames)
    assert a.meta == b.meta
    manifest_a = (tmp_path / "a" / "seq000" / "manifest.json").read_text()
    manifest_b = (tmp_path / "b" / "seq000" / "manifest.json").read_text()
    assert manifest_a == manifest_b
    for sub in ("ego", "front", "masks/ego", "masks/front"):
        assert len(list((tmp_path / "a" / "seq000" / sub).glob("*.png"))) == 20
    assert (tmp_path / "a" / "seq000" / "poses.csv").exists()


def test_parallel_rendering_matches_serial():
    serial = generate_sequence(12, "talking", 4, window_size=3)
    threaded = generate_sequence(12, "talking", 4, window_size=3, workers=3)
    assert np.array_equal(serial.ego_frames, threaded.ego_frames)
    assert np.array_equal(serial.front_masks, threaded.front_masks)


def test_sequence_of_window_length_gives_one_window():
    seq = generate_sequence(5, "talking", 0, window_size=5)
    assert len(seq) == 5
    assert seq.splits == (5, 5)
    assert len(list(windows(seq, "train", 5))) == 1


def test_short_sequence_raises():
    with pytest.raises(LengthTooShort):
        generate_sequence(4, "talking", 0, window_size=5)


def test_default_splits():
    assert default_splits(7500 + 2500 + 500) == (7500, 10000)
    assert default_splits(100) == (70, 85)
    assert default_splits(5, window_size=5) == (5, 5)
    assert default_splits(12, window_size=11) == (11, 11)
    assert default_splits(3, window_size=5) == (3, 3)


def test_simulate_capture_delays_frontal_stream():
    seq = generate_sequence(20, "talking", 2, window_size=3)
    raw = simulate_capture(seq, lag=3, flash_frame=2)
    assert raw.ego_frames[2].min() == 255
    assert raw.front_frames[5].min() == 255
    assert np.array_equal(raw.front_frames[10], seq.front_frames[7])
    assert raw.meta["synchronized"] is False
    with pytest.raises(LengthTooShort):
        simulate_capture(seq, lag=18, flash_frame=5)
