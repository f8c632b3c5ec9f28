"""Per-frame pose conditioning images.

Modes: neutral_head (flat albedo of the expressionless head at the frame's
rigid pose), landmarks (68 head-anchored keypoints as 3x3 dots), contours
(one-pixel silhouette boundary) and none (all zeros). The image depends only
on (mode, head model, pose); expression never reaches it.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np
import pandas as pd

import egofront.config as cfg
from egofront.camera import FrontalCamera, RigidPose
from egofront.dataset import POSE_COLUMNS, PairedSequence
from egofront.errors import EmptyPoseSet, IndexOutOfRange, LengthMismatch, UnknownMode
from egofront.synthgen import FaceState, HeadModel, head_to_world, render_frontal

LANDMARK_COLOURS = {
    "jaw": (255, 255, 255),
    "brows": (255, 200, 0),
    "nose": (0, 255, 0),
    "eyes": (0, 160, 255),
    "mouth": (255, 0, 80),
}
CONTOUR_COLOUR = (255, 255, 255)


def _as_pose_list(poses) -> list[RigidPose]:
    if isinstance(poses, pd.DataFrame):
        return [RigidPose.from_row(row) for _, row in poses.iterrows()]
    return [p if isinstance(p, RigidPose) else RigidPose.from_row(p) for p in poses]


def poses_to_frame(poses: Sequence[RigidPose]) -> pd.DataFrame:
    df = pd.DataFrame([p.as_row() for p in poses], columns=POSE_COLUMNS)
    df.index.name = "frame"
    return df


@dataclasses.dataclass
class ConditioningSpec:
    mode: str
    pose_track: Sequence[RigidPose] | pd.DataFrame = ()
    head_model: HeadModel = dataclasses.field(default_factory=HeadModel)
    camera: FrontalCamera | None = None

    def __post_init__(self):
        if self.mode not in cfg.CONDITIONING_MODES:
            raise UnknownMode(f"Unknown conditioning mode '{self.mode}'. Available: {cfg.CONDITIONING_MODES}")
        self.pose_track = tuple(_as_pose_list(self.pose_track))

    def __len__(self) -> int:
        return len(self.pose_track)


# Landmarks

def landmark_layout(head: HeadModel) -> tuple[np.ndarray, list[str]]:
    """68 head-frame points on the neutral front surface and their group names."""
    points: list[tuple[float, float]] = []
    groups: list[str] = []

    def _add(group, xs, ys):
        for x, y in zip(xs, ys):
            points.append((float(x), float(y)))
            groups.append(group)

    a = np.linspace(0.95 * math.pi, 0.05 * math.pi, 17)
    _add("jaw", 0.70 * np.cos(a), 0.05 + 0.85 * np.sin(a))

    bx = np.linspace(head.brow_span[0], head.brow_span[1], 5)
    _add("brows", -bx[::-1], np.full(5, head.brow_y))
    _add("brows", bx, np.full(5, head.brow_y))

    nx, ny = head.nose_centre
    _add("nose", np.full(4, nx), np.linspace(ny - 0.22, ny - 0.02, 4))
    _add("nose", np.linspace(nx - 0.1, nx + 0.1, 5), np.full(5, ny + head.nose_half[1]))

    ex, ey = head.eye_offset
    t = np.arange(6) * math.pi / 3.0
    for side in (-1.0, 1.0):
        _add("eyes", side * ex + head.eye_half[0] * np.cos(t), ey + head.eye_half[1] * np.sin(t))

    mx, my = head.mouth_centre
    mw, mh = head.mouth_half_width[0], head.mouth_half_height[0] + head.lip_thickness
    t = np.arange(12) * math.pi / 6.0
    _add("mouth", mx + mw * np.cos(t), my + mh * np.sin(t))
    t = np.arange(8) * math.pi / 4.0
    _add("mouth", mx + 0.6 * mw * np.cos(t), my + 0.5 * mh * np.sin(t))

    xy = np.asarray(points)
    xyz = np.column_stack([xy, head.surface_z(xy[:, 0], xy[:, 1])])
    if len(xyz) != cfg.LANDMARK_COUNT:
        raise ValueError(f"Landmark layout has {len(xyz)} points, expected {cfg.LANDMARK_COUNT}")
    return xyz, groups


def _splat(image: np.ndarray, uv: np.ndarray, colours: np.ndarray, size: int) -> None:
    h, w = image.shape[:2]
    half = size // 2
    for (u, v), colour in zip(uv, colours):
        cu, cv = int(math.floor(u)), int(math.floor(v))
        top, left = max(cv - half, 0), max(cu - half, 0)
        bottom, right = min(cv + half + 1, h), min(cu + half + 1, w)
        if top < bottom and left < right:
            image[top:bottom, left:right] = colour


def render_landmarks(pose: RigidPose, head: HeadModel, camera: FrontalCamera, resolution: int) -> np.ndarray:
    points, groups = landmark_layout(head)
    world = head_to_world(points, pose, head)
    normals = points / np.asarray(head.radii) ** 2
    normals_world = normals @ pose.rotation_matrix().T
    facing = np.einsum("ij,ij->i", normals_world, world - camera.centre) < 0.0

    image = np.zeros((resolution, resolution, 3), dtype=np.uint8)
    colours = np.array([LANDMARK_COLOURS[g] for g in groups], dtype=np.uint8)
    uv = camera.project(world[facing])
    _splat(image, uv, colours[facing], cfg.LANDMARK_DOT_SIZE)
    return image


def silhouette_boundary(mask: np.ndarray) -> np.ndarray:
    """Foreground pixels with at least one 4-neighbour outside the mask."""
    m = mask.astype(bool)
    padded = np.pad(m, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return m & ~interior


def render_contours(pose: RigidPose, head: HeadModel, camera: FrontalCamera, resolution: int) -> np.ndarray:
    _, mask = render_frontal(FaceState.neutral(pose), camera, resolution, head, lit=False)
    image = np.zeros((resolution, resolution, 3), dtype=np.uint8)
    image[silhouette_boundary(mask)] = CONTOUR_COLOUR
    return image


def _render_hwc(spec: ConditioningSpec, frame_index: int, resolution: int) -> np.ndarray:
    if not (0 <= frame_index < len(spec.pose_track)):
        raise IndexOutOfRange(f"Frame {frame_index} outside a pose track of {len(spec.pose_track)} frames")
    if spec.mode == cfg.NO_CONDITIONING:
        return np.zeros((resolution, resolution, 3), dtype=np.uint8)

    pose = spec.pose_track[frame_index]
    camera = spec.camera or FrontalCamera.for_resolution(resolution)
    if spec.mode == cfg.NEUTRAL_HEAD:
        frame, _ = render_frontal(FaceState.neutral(pose), camera, resolution, spec.head_model, lit=False)
        return frame
    if spec.mode == cfg.LANDMARKS:
        return render_landmarks(pose, spec.head_model, camera, resolution)
    return render_contours(pose, spec.head_model, camera, resolution)


def render_conditioning(spec: ConditioningSpec, frame_index: int, resolution: int) -> np.ndarray:
    """Conditioning image C_i as uint8 (3, H, W)."""
    return np.ascontiguousarray(_render_hwc(spec, frame_index, resolution).transpose(2, 0, 1))


def render_conditioning_track(spec: ConditioningSpec, resolution: int) -> np.ndarray:
    """Whole track as uint8 (L, H, W, 3), the layout frames use elsewhere."""
    if spec.mode == cfg.NO_CONDITIONING:
        return np.zeros((len(spec), resolution, resolution, 3), dtype=np.uint8)
    return np.stack([_render_hwc(spec, i, resolution) for i in range(len(spec))])


# Pose tracks

def reflect_index(k: int, n: int) -> int:
    """Map k onto [0, n) by reflection with period 2(n-1)."""
    if n == 1:
        return 0
    period = 2 * (n - 1)
    m = k % period
    return m if m < n else period - m


def resample_pose_track(training_poses, start_frame: int, length: int) -> pd.DataFrame:
    """Contiguous run of training poses from `start_frame`, reflecting at the end of the set."""
    poses = training_poses if isinstance(training_poses, pd.DataFrame) else poses_to_frame(_as_pose_list(training_poses))
    n = len(poses)
    if n == 0:
        raise EmptyPoseSet("Cannot resample from an empty pose set")
    if start_frame < 0 or length < 0:
        raise ValueError(f"start_frame and length must be non-negative, got {start_frame}, {length}")
    idx = [reflect_index(start_frame + j, n) for j in range(length)]
    out = poses[POSE_COLUMNS].iloc[idx].reset_index(drop=True)
    out.index.name = "frame"
    return out


def static_pose_track(training_poses, frame: int, length: int) -> pd.DataFrame:
    """Constant track holding the pose of one training frame."""
    poses = training_poses if isinstance(training_poses, pd.DataFrame) else poses_to_frame(_as_pose_list(training_poses))
    if len(poses) == 0:
        raise EmptyPoseSet("Cannot take a static pose from an empty pose set")
    if not (0 <= frame < len(poses)):
        raise IndexOutOfRange(f"Frame {frame} outside a pose set of {len(poses)} frames")
    out = poses[POSE_COLUMNS].iloc[[frame] * length].reset_index(drop=True)
    out.index.name = "frame"
    return out


def sequence_camera(seq: PairedSequence) -> FrontalCamera:
    """Frontal camera recorded in the sequence manifest, else the default for its resolution."""
    cameras = seq.meta.get("cameras") or {}
    if "front" in cameras:
        return FrontalCamera.from_dict(cameras["front"])
    return FrontalCamera.for_resolution(seq.resolution)


def conditioning_track(seq: PairedSequence, mode: str, pose_track=None) -> np.ndarray | None:
    """Rendered (L, H, W, 3) track for a sequence; None for mode 'none' (zeros downstream)."""
    spec = ConditioningSpec(mode=mode, pose_track=seq.poses if pose_track is None else pose_track, camera=sequence_camera(seq))
    if spec.mode == cfg.NO_CONDITIONING:
        return None
    if len(spec) != len(seq):
        raise LengthMismatch(f"Pose track has {len(spec)} poses for a {len(seq)}-frame sequence")
    return render_conditioning_track(spec, seq.resolution)
