import numpy as np
import pandas as pd
import pytest

from egofront.camera import FrontalCamera, RigidPose
from egofront.conditioning import (
    ConditioningSpec,
    conditioning_track,
    landmark_layout,
    reflect_index,
    render_conditioning,
    render_conditioning_track,
    resample_pose_track,
    silhouette_boundary,
    static_pose_track,
)
from egofront.errors import EmptyPoseSet, IndexOutOfRange, UnknownMode
from egofront.synthgen import FaceState, HeadModel, generate_sequence, head_to_world, render_frontal

RES = 64
POSE_COLUMNS = ["yaw", "pitch", "roll", "tx", "ty", "tz"]


def _poses(n, seed=0):
    rng = np.random.default_rng(seed)
    data = rng.uniform(-0.3, 0.3, size=(n, 6))
    return pd.DataFrame(data, columns=POSE_COLUMNS).rename_axis("frame")


def _centroid_x(image):
    mask = image.any(axis=0)
    _, xs = np.nonzero(mask)
    return xs.mean() + 0.5


def test_mode_none_is_all_zero():
    spec = ConditioningSpec(mode="none", pose_track=[RigidPose()])
    image = render_conditioning(spec, 0, RES)
    assert image.shape == (3, RES, RES)
    assert not image.any()


def test_unknown_mode_raises():
    with pytest.raises(UnknownMode):
        ConditioningSpec(mode="depth", pose_track=[RigidPose()])


@pytest.mark.parametrize("mode", ["neutral_head", "landmarks", "contours"])
def test_rendering_is_deterministic_and_nonempty(mode):
    spec = ConditioningSpec(mode=mode, pose_track=[RigidPose(), RigidPose()])
    a = render_conditioning(spec, 0, RES)
    b = render_conditioning(spec, 1, RES)
    assert a.dtype == np.uint8
    assert a.any()
    assert np.array_equal(a, b)


def test_frame_index_out_of_range():
    spec = ConditioningSpec(mode="neutral_head", pose_track=[RigidPose()])
    with pytest.raises(IndexOutOfRange):
        render_conditioning(spec, 1, RES)


def test_yaw_shift_follows_projected_head_centre():
    res = 256
    camera = FrontalCamera.for_resolution(res)
    head = HeadModel()
    turned = RigidPose(rotation=(0.2, 0.0, 0.0))
    spec = ConditioningSpec(mode="neutral_head", pose_track=[RigidPose(), turned], head_model=head, camera=camera)

    centre = camera.project(head_to_world(np.zeros((1, 3)), RigidPose(), head))[0]
    shifted = camera.project(head_to_world(np.zeros((1, 3)), turned, head))[0]
    assert _centroid_x(render_conditioning(spec, 0, res)) == pytest.approx(res / 2, abs=1.0)
    measured = _centroid_x(render_conditioning(spec, 1, res)) - _centroid_x(render_conditioning(spec, 0, res))
    assert measured == pytest.approx(shifted[0] - centre[0], abs=1.0)


def test_neutral_head_is_unlit_albedo_of_expressionless_face():
    pose = RigidPose(rotation=(0.1, -0.1, 0.0))
    spec = ConditioningSpec(mode="neutral_head", pose_track=[pose])
    expected, _ = render_frontal(FaceState.neutral(pose), FrontalCamera.for_resolution(RES), RES, HeadModel(), lit=False)
    assert np.array_equal(render_conditioning(spec, 0, RES), expected.transpose(2, 0, 1))


def test_landmark_layout_has_68_points_by_group():
    points, groups = landmark_layout(HeadModel())
    assert points.shape == (68, 3)
    counts = pd.Series(groups).value_counts().to_dict()
    assert counts == {"jaw": 17, "mouth": 20, "eyes": 12, "brows": 10, "nose": 9}
    assert np.all(points[:, 2] <= 0.0)


def test_contours_are_one_pixel_boundary():
    mask = np.zeros((10, 10), dtype=np.uint8)
    mask[2:8, 3:7] = 1
    boundary = silhouette_boundary(mask)
    assert boundary.sum() == 2 * 6 + 2 * 4 - 4
    assert not boundary[4:6, 4:6].any()


def test_track_matches_per_frame_renders():
    poses = _poses(4)
    spec = ConditioningSpec(mode="landmarks", pose_track=poses)
    track = render_conditioning_track(spec, RES)
    assert track.shape == (4, RES, RES, 3)
    for i in range(4):
        assert np.array_equal(track[i], render_conditioning(spec, i, RES).transpose(1, 2, 0))


def test_sequence_track_uses_recorded_poses():
    seq = generate_sequence(6, "talking", 3, window_size=3)
    track = conditioning_track(seq, "neutral_head")
    other = conditioning_track(seq, "neutral_head", pose_track=seq.poses.copy())
    assert np.array_equal(track, other)
    assert conditioning_track(seq, "none") is None


def test_resample_full_track_and_slice():
    poses = _poses(300)
    assert resample_pose_track(poses, 0, 300).equals(poses.reset_index(drop=True).rename_axis("frame"))
    window = resample_pose_track(poses, 100, 50)
    assert np.array_equal(window.to_numpy(), poses.to_numpy()[100:150])


def test_resample_reflects_past_the_end():
    poses = _poses(5)
    track = resample_pose_track(poses, 3, 6)
    expected = [3, 4, 3, 2, 1, 0]
    assert np.array_equal(track.to_numpy(), poses.to_numpy()[expected])
    assert [reflect_index(k, 4) for k in range(8)] == [0, 1, 2, 3, 2, 1, 0, 1]
    assert reflect_index(7, 1) == 0


def test_resample_empty_pose_set_raises():
    with pytest.raises(EmptyPoseSet):
        resample_pose_track(_poses(0), 0, 5)


def test_static_pose_track_is_constant():
    poses = _poses(10)
    track = static_pose_track(poses, 4, 7)
    assert len(track) == 7
    assert (track.nunique() == 1).all()
    assert np.array_equal(track.iloc[0].to_numpy(), poses.iloc[4].to_numpy())
    with pytest.raises(IndexOutOfRange):
        static_pose_track(poses, 10, 3)
