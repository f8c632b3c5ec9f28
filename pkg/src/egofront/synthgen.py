"""Procedural paired-data generator standing in for the two-camera capture rig.

A 2.5D head (ellipsoid with painted eyes, brows, nose, mouth and hair) is posed
in 3D and rendered twice per frame: through a head-mounted equidistant fisheye
(egocentric view) and through a frontal pinhole camera. Masks are exact (ray
hits), poses are ground truth by construction.

Core API
--------
- FaceState / HeadModel: expression + rigid pose, and the shared head primitive
- default_cameras(resolution, occlusion): the egocentric/frontal camera pair
- render_head(...): ray-cast one view (used by conditioning for neutral renders)
- render_pair(state, cams, resolution): one paired egocentric/frontal frame
- make_state_track(length, script, seed): continuous FaceState trajectory
- generate_sequence(length, script, seed): full PairedSequence (+ on-disk layout)
- simulate_capture(seq, lag, flash_frame): unsynchronised raw recording for sync
"""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

import egofront.config as cfg
from egofront.camera import (
    FisheyeCamera,
    FrontalCamera,
    RigidPose,
    fisheye_project,
    fisheye_rays,
    look_at_pose,
)
from egofront.data.layout import save_sequence
from egofront.dataset import PairedSequence, default_splits
from egofront.errors import LengthTooShort
from egofront.sync import insert_flash

logger = logging.getLogger(__name__)

STATE_COLUMNS = ["mouth_open", "blink_left", "blink_right", "gaze_x", "gaze_y", "brow_raise"]
POSE_COLUMNS = ["yaw", "pitch", "roll", "tx", "ty", "tz"]

EGO_EYE = (0.55, 1.25, -1.45)  # camera position in head coordinates (below the chin, to the side)
EGO_TARGET = (0.0, 0.2, -0.7)
LIGHT_DIRECTION = np.array([0.3, -0.5, -1.0]) / np.linalg.norm([0.3, -0.5, -1.0])
AMBIENT = 0.35
DIFFUSE = 0.65


@dataclasses.dataclass(frozen=True)
class HeadModel:
    radii: tuple[float, float, float] = (0.75, 1.0, 0.85)
    pivot: tuple[float, float, float] = (0.0, 0.9, 0.3)  # neck
    skin: tuple[int, int, int] = (214, 160, 130)
    hair: tuple[int, int, int] = (70, 48, 34)
    sclera: tuple[int, int, int] = (235, 232, 225)
    iris: tuple[int, int, int] = (60, 82, 110)
    brow: tuple[int, int, int] = (80, 55, 40)
    nose: tuple[int, int, int] = (192, 138, 112)
    lips: tuple[int, int, int] = (176, 84, 84)
    mouth_interior: tuple[int, int, int] = (70, 22, 28)
    eye_offset: tuple[float, float] = (0.28, -0.12)
    eye_half: tuple[float, float] = (0.13, 0.07)
    iris_radius: float = 0.05
    gaze_range: float = 0.06
    brow_y: float = -0.30
    brow_lift: float = 0.08
    brow_span: tuple[float, float] = (0.12, 0.42)
    brow_half_thickness: float = 0.035
    nose_centre: tuple[float, float] = (0.0, 0.12)
    nose_half: tuple[float, float] = (0.07, 0.06)
    mouth_centre: tuple[float, float] = (0.0, 0.45)
    mouth_half_width: tuple[float, float] = (0.22, 0.04)  # closed width, extra when fully open
    mouth_half_height: tuple[float, float] = (0.03, 0.13)
    lip_thickness: float = 0.025
    hair_line: float = -0.55
    hair_back: float = 0.15

    def __post_init__(self):
        if min(self.radii) <= 0.0:
            raise ValueError(f"HeadModel radii must be positive, got {self.radii}")
        colours = (self.skin, self.hair, self.sclera, self.iris, self.brow, self.nose, self.lips, self.mouth_interior)
        for colour in colours:
            if min(colour) <= 0 or max(colour) > 255:
                raise ValueError(f"HeadModel albedo entries must be in (0, 255], got {colour}")

    def surface_z(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Front-surface depth (z < 0) at head-frame (x, y)."""
        rx, ry, rz = self.radii
        inside = np.clip(1.0 - (x / rx) ** 2 - (y / ry) ** 2, 0.0, None)
        return -rz * np.sqrt(inside)


@dataclasses.dataclass
class FaceState:
    mouth_open: float = 0.0
    blink_left: float = 0.0
    blink_right: float = 0.0
    gaze: tuple[float, float] = (0.0, 0.0)
    brow_raise: float = 0.0
    rigid_pose: RigidPose = dataclasses.field(default_factory=RigidPose)

    def __post_init__(self):
        self.mouth_open = _clamp(self.mouth_open, 0.0, 1.0)
        self.blink_left = _clamp(self.blink_left, 0.0, 1.0)
        self.blink_right = _clamp(self.blink_right, 0.0, 1.0)
        self.brow_raise = _clamp(self.brow_raise, 0.0, 1.0)
        if len(self.gaze) != 2:
            raise ValueError(f"FaceState gaze must be a 2-vector, got {self.gaze}")
        self.gaze = (_clamp(self.gaze[0], -1.0, 1.0), _clamp(self.gaze[1], -1.0, 1.0))
        bounded = tuple(
            _clamp(t, -b, b) for t, b in zip(self.rigid_pose.translation, cfg.SCENE_BOUNDS)
        )
        if bounded != self.rigid_pose.translation:
            self.rigid_pose = RigidPose(rotation=self.rigid_pose.rotation, translation=bounded)

    @classmethod
    def neutral(cls, pose: RigidPose | None = None) -> "FaceState":
        return cls(rigid_pose=pose if pose is not None else RigidPose())

    def as_row(self) -> dict[str, float]:
        row = {
            "mouth_open": self.mouth_open,
            "blink_left": self.blink_left,
            "blink_right": self.blink_right,
            "gaze_x": self.gaze[0],
            "gaze_y": self.gaze[1],
            "brow_raise": self.brow_raise,
        }
        row.update(self.rigid_pose.as_row())
        return row

    @classmethod
    def from_row(cls, row) -> "FaceState":
        return cls(
            mouth_open=float(row["mouth_open"]),
            blink_left=float(row["blink_left"]),
            blink_right=float(row["blink_right"]),
            gaze=(float(row["gaze_x"]), float(row["gaze_y"])),
            brow_raise=float(row["brow_raise"]),
            rigid_pose=RigidPose.from_row(row),
        )


def _clamp(value: float, low: float, high: float) -> float:
    return float(min(max(float(value), low), high))


@dataclasses.dataclass(frozen=True)
class ExpressionScript:
    name: str = "talking"
    mouth_interval: int = 4
    blink_rate: float = 0.04
    gaze_interval: int = 10
    gaze_amplitude: float = 0.7
    brow_interval: int = 16
    brow_amplitude: float = 0.6
    pose_interval: int = 30
    yaw_amplitude: float = 0.3
    pitch_amplitude: float = 0.15
    roll_amplitude: float = 0.08
    translation_amplitude: float = 0.12

    def __post_init__(self):
        for name in ("mouth_interval", "gaze_interval", "brow_interval", "pose_interval"):
            if getattr(self, name) < 1:
                raise ValueError(f"ExpressionScript {self.name}: {name} must be >= 1")
        for name in ("yaw_amplitude", "pitch_amplitude", "roll_amplitude"):
            if not (0.0 <= getattr(self, name) <= cfg.MAX_ANGLE):
                raise ValueError(f"ExpressionScript {self.name}: {name} must be in [0, pi/2]")
        if not (0.0 <= self.translation_amplitude <= min(cfg.SCENE_BOUNDS)):
            raise ValueError(f"ExpressionScript {self.name}: translation_amplitude exceeds scene bounds")


SCRIPTS = {
    "talking": ExpressionScript(),
    "multi_pose": ExpressionScript(
        name="multi_pose",
        pose_interval=20,
        yaw_amplitude=0.6,
        pitch_amplitude=0.35,
        roll_amplitude=0.2,
        translation_amplitude=0.25,
    ),
    "static_pose": ExpressionScript(
        name="static_pose",
        yaw_amplitude=0.0,
        pitch_amplitude=0.0,
        roll_amplitude=0.0,
        translation_amplitude=0.0,
    ),
}


def get_script(name: str) -> ExpressionScript:
    try:
        return SCRIPTS[name]
    except KeyError:
        raise KeyError(f"Unknown expression script '{name}'. Available: {sorted(SCRIPTS)}")


@dataclasses.dataclass(frozen=True)
class SynthConfig:
    occlusion: float = cfg.EGO_OCCLUSION
    background: str = "black"
    max_delta: float = cfg.MAX_STATE_DELTA
    max_pose_delta: float = cfg.MAX_POSE_DELTA
    mount_jitter: float = 0.0
    lit: bool = True

    def __post_init__(self):
        if self.background not in cfg.BACKGROUNDS:
            raise ValueError(f"Unknown background '{self.background}'. Available: {cfg.BACKGROUNDS}")
        if not (0.0 <= self.occlusion < 0.5):
            raise ValueError(f"occlusion must be in [0, 0.5), got {self.occlusion}")
        if self.max_delta <= 0.0 or self.max_pose_delta <= 0.0:
            raise ValueError("max_delta and max_pose_delta must be positive")
        if self.mount_jitter < 0.0:
            raise ValueError(f"mount_jitter must be non-negative, got {self.mount_jitter}")


# Rendering

def paint_albedo(points: np.ndarray, state: FaceState, head: HeadModel) -> np.ndarray:
    """Albedo (M, 3) for head-frame surface points (M, 3)."""
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    colour = np.tile(np.asarray(head.skin, dtype=float), (len(points), 1))
    front = z < 0.0

    nx, ny = head.nose_centre
    nose = front & (((x - nx) / head.nose_half[0]) ** 2 + ((y - ny) / head.nose_half[1]) ** 2 <= 1.0)
    colour[nose] = head.nose

    ex, ey = head.eye_offset
    for side, blink in ((-1.0, state.blink_left), (1.0, state.blink_right)):
        cx = side * ex
        half_h = head.eye_half[1] * (1.0 - blink)
        if half_h <= 1e-6:
            continue
        eye = front & (((x - cx) / head.eye_half[0]) ** 2 + ((y - ey) / half_h) ** 2 <= 1.0)
        colour[eye] = head.sclera
        ix = cx + state.gaze[0] * head.gaze_range
        iy = ey + state.gaze[1] * head.gaze_range
        iris = eye & ((x - ix) ** 2 + (y - iy) ** 2 <= head.iris_radius ** 2)
        colour[iris] = head.iris

    by = head.brow_y - head.brow_lift * state.brow_raise
    brow = front & (np.abs(x) >= head.brow_span[0]) & (np.abs(x) <= head.brow_span[1])
    brow &= np.abs(y - by) <= head.brow_half_thickness
    colour[brow] = head.brow

    mx, my = head.mouth_centre
    mw = head.mouth_half_width[0] + head.mouth_half_width[1] * state.mouth_open
    mh = head.mouth_half_height[0] + head.mouth_half_height[1] * state.mouth_open
    lips = front & (((x - mx) / mw) ** 2 + ((y - my) / mh) ** 2 <= 1.0)
    colour[lips] = head.lips
    inner_w = mw - head.lip_thickness
    inner_h = mh - head.lip_thickness
    if inner_h > 1e-6:
        interior = lips & (((x - mx) / inner_w) ** 2 + ((y - my) / inner_h) ** 2 <= 1.0)
        colour[interior] = head.mouth_interior

    hair = (y < head.hair_line) | (z > head.hair_back)
    colour[hair] = head.hair
    return colour


def textured_background(dirs_world: np.ndarray, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    phase = rng.uniform(0.0, 2.0 * math.pi, size=3)
    dx, dy = dirs_world[..., 0], dirs_world[..., 1]
    channels = [70.0 + 45.0 * np.sin(9.0 * dx + phase[c]) * np.cos(7.0 * dy + 2.0 * phase[c]) for c in range(3)]
    return np.rint(np.stack(channels, axis=-1))


def render_head(
    state: FaceState,
    head: HeadModel,
    origin: np.ndarray,
    dirs: np.ndarray,
    valid: np.ndarray,
    *,
    lit: bool = True,
    background: str = "black",
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Ray-cast the head for rays given in the head frame.

    Parameters
    ----------
    origin:
        Ray origin (3,) in head coordinates.
    dirs:
        Unit ray directions (H, W, 3) in head coordinates.
    valid:
        Boolean (H, W); invalid rays (outside a fisheye image circle) stay black.

    Returns
    -------
    frame:
        uint8 (H, W, 3).
    mask:
        uint8 (H, W), 1 where the ray hits the head.
    """
    pose = state.rigid_pose
    rot = pose.rotation_matrix()
    radii = np.asarray(head.radii, dtype=float)

    o_s = np.asarray(origin, dtype=float) / radii
    d_s = dirs / radii
    a = np.sum(d_s * d_s, axis=-1)
    b = 2.0 * np.sum(o_s * d_s, axis=-1)
    c = float(np.sum(o_s * o_s)) - 1.0
    disc = b * b - 4.0 * a * c
    t_hit = (-b - np.sqrt(np.clip(disc, 0.0, None))) / (2.0 * a)
    hit = valid & (disc >= 0.0) & (t_hit > 0.0)

    h, w = valid.shape
    frame = np.zeros((h, w, 3), dtype=float)
    if background == "textured":
        frame[valid] = textured_background(dirs[valid] @ rot.T, seed)

    if np.any(hit):
        points = np.asarray(origin, dtype=float) + t_hit[hit][:, None] * dirs[hit]
        albedo = paint_albedo(points, state, head)
        if lit:
            normals = points / radii ** 2
            normals /= np.linalg.norm(normals, axis=-1, keepdims=True)
            n_world = normals @ rot.T
            shade = AMBIENT + DIFFUSE * np.clip(-(n_world @ LIGHT_DIRECTION), 0.0, None)
            albedo = albedo * shade[:, None]
        frame[hit] = albedo

    frame = np.clip(np.rint(frame), 0, 255).astype(np.uint8)
    return frame, hit.astype(np.uint8)


def world_to_head(points: np.ndarray, pose: RigidPose, head: HeadModel, *, vectors: bool = False) -> np.ndarray:
    """Inverse of the neck-pivot rigid transform world = R (p - pivot) + pivot + t."""
    rot = pose.rotation_matrix()
    if vectors:
        return np.asarray(points, dtype=float) @ rot
    pivot = np.asarray(head.pivot, dtype=float)
    t = np.asarray(pose.translation, dtype=float)
    return (np.asarray(points, dtype=float) - pivot - t) @ rot + pivot


def head_to_world(points: np.ndarray, pose: RigidPose, head: HeadModel) -> np.ndarray:
    rot = pose.rotation_matrix()
    pivot = np.asarray(head.pivot, dtype=float)
    t = np.asarray(pose.translation, dtype=float)
    return (np.asarray(points, dtype=float) - pivot) @ rot.T + pivot + t


def render_frontal(
    state: FaceState,
    camera: FrontalCamera,
    resolution: int,
    head: HeadModel,
    *,
    lit: bool = True,
    background: str = "black",
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    dirs_world = camera.rays(resolution)
    origin = world_to_head(camera.centre, state.rigid_pose, head)
    dirs = world_to_head(dirs_world, state.rigid_pose, head, vectors=True)
    valid = np.ones((resolution, resolution), dtype=bool)
    return render_head(state, head, origin, dirs, valid, lit=lit, background=background, seed=seed)


def render_egocentric(
    state: FaceState,
    camera: FisheyeCamera,
    resolution: int,
    head: HeadModel,
    *,
    lit: bool = True,
    background: str = "black",
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    rays_cam, valid = fisheye_rays(camera, resolution)
    dirs = camera.to_mount_frame(rays_cam, points=False)
    origin = np.asarray(camera.mount_offset.translation, dtype=float)
    return render_head(state, head, origin, dirs, valid, lit=lit, background=background, seed=seed)


def default_cameras(
    resolution: int,
    occlusion: float = cfg.EGO_OCCLUSION,
    head: HeadModel | None = None,
) -> tuple[FisheyeCamera, FrontalCamera]:
    """Head-mounted 180 degree fisheye + frontal pinhole for a square resolution.

    The fisheye principal point is shifted so that `occlusion` of the face
    width falls outside the left image edge.
    """
    head = head or HeadModel()
    mount = look_at_pose(EGO_EYE, EGO_TARGET)
    focal = resolution * math.sqrt(2.0) / cfg.FISHEYE_FOV_DIAGONAL
    centre = (0.5 * resolution, 0.5 * resolution)
    ego = FisheyeCamera(focal=focal, principal_point=centre, fov_diagonal=cfg.FISHEYE_FOV_DIAGONAL, mount_offset=mount)

    if occlusion > 0.0:
        _, probe = render_egocentric(FaceState.neutral(), ego, resolution, head, lit=False)
        cols = np.flatnonzero(probe.any(axis=0))
        if cols.size:
            x0, x1 = float(cols[0]), float(cols[-1] + 1)
            shift = -occlusion * (x1 - x0) - x0
            ego = dataclasses.replace(ego, principal_point=(centre[0] + shift, centre[1]))

    return ego, FrontalCamera.for_resolution(resolution)


def mouth_outline(head: HeadModel, samples: int = 64) -> np.ndarray:
    """Head-frame outline (samples, 3) of the fully open mouth."""
    t = np.linspace(0.0, 2.0 * math.pi, samples, endpoint=False)
    mx, my = head.mouth_centre
    mw = sum(head.mouth_half_width)
    mh = sum(head.mouth_half_height)
    x = mx + mw * np.cos(t)
    y = my + mh * np.sin(t)
    return np.stack([x, y, head.surface_z(x, y)], axis=-1)


def mouth_box(
    camera: FisheyeCamera | FrontalCamera,
    resolution: int,
    head: HeadModel | None = None,
    pose: RigidPose | None = None,
) -> tuple[int, int, int, int]:
    """(left, top, right, bottom) pixel box of the fully open mouth in one view."""
    head = head or HeadModel()
    outline = mouth_outline(head)
    if isinstance(camera, FisheyeCamera):
        uv = fisheye_project(outline, camera)
    else:
        uv = camera.project(head_to_world(outline, pose or RigidPose(), head))
    left = int(np.clip(np.floor(uv[:, 0].min()), 0, resolution))
    top = int(np.clip(np.floor(uv[:, 1].min()), 0, resolution))
    right = int(np.clip(np.ceil(uv[:, 0].max()), 0, resolution))
    bottom = int(np.clip(np.ceil(uv[:, 1].max()), 0, resolution))
    return left, top, right, bottom


def render_pair(
    state: FaceState,
    cams: tuple[FisheyeCamera, FrontalCamera],
    resolution: int,
    *,
    seed: int = 0,
    background: str = "black",
    head: HeadModel | None = None,
    lit: bool = True,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Render (ego_frame, front_frame, ego_mask, front_mask) of one FaceState."""
    if resolution not in cfg.SUPPORTED_RESOLUTIONS:
        raise ValueError(f"resolution must be one of {cfg.SUPPORTED_RESOLUTIONS}, got {resolution}")
    if background not in cfg.BACKGROUNDS:
        raise ValueError(f"Unknown background '{background}'. Available: {cfg.BACKGROUNDS}")
    head = head or HeadModel()
    ego_cam, front_cam = cams
    ego, ego_mask = render_egocentric(state, ego_cam, resolution, head, lit=lit, background=background, seed=seed)
    front, front_mask = render_frontal(state, front_cam, resolution, head, lit=lit, background=background, seed=seed)
    return ego, front, ego_mask, front_mask


# Trajectories

def _keyframed(rng: np.random.Generator, length: int, interval: int, low: float, high: float) -> np.ndarray:
    keys = rng.uniform(low, high, size=length // interval + 2)
    t = np.arange(length, dtype=float) / interval
    i = np.floor(t).astype(int)
    w = 0.5 * (1.0 - np.cos(math.pi * (t - i)))
    return keys[i] * (1.0 - w) + keys[i + 1] * w


def _limit_rate(x: np.ndarray, max_delta: float) -> np.ndarray:
    out = np.empty_like(x)
    out[0] = x[0]
    for k in range(1, len(x)):
        out[k] = out[k - 1] + np.clip(x[k] - out[k - 1], -max_delta, max_delta)
    return out


def _blinks(rng: np.random.Generator, length: int, rate: float) -> np.ndarray:
    signal = np.zeros(length)
    pulse = np.array([0.5, 1.0, 1.0, 0.5])
    for onset in np.flatnonzero(rng.random(length) < rate):
        end = min(length, onset + len(pulse))
        signal[onset:end] = np.maximum(signal[onset:end], pulse[: end - onset])
    return signal


def make_state_track(
    length: int,
    script: ExpressionScript | None = None,
    seed: int = 0,
    synth: SynthConfig | None = None,
) -> pd.DataFrame:
    """Continuous FaceState trajectory, one row per frame (STATE_COLUMNS + POSE_COLUMNS)."""
    script = script or SCRIPTS["talking"]
    synth = synth or SynthConfig()
    if length < 1:
        raise LengthTooShort(f"State track length must be >= 1, got {length}")
    rng = np.random.default_rng(seed)

    blink = _blinks(rng, length, script.blink_rate)
    track = {
        "mouth_open": _keyframed(rng, length, script.mouth_interval, 0.0, 1.0),
        "blink_left": blink,
        "blink_right": blink.copy(),
        "gaze_x": _keyframed(rng, length, script.gaze_interval, -script.gaze_amplitude, script.gaze_amplitude),
        "gaze_y": _keyframed(rng, length, script.gaze_interval, -0.5 * script.gaze_amplitude, 0.5 * script.gaze_amplitude),
        "brow_raise": _keyframed(rng, length, script.brow_interval, 0.0, script.brow_amplitude),
    }
    amplitudes = {
        "yaw": script.yaw_amplitude,
        "pitch": script.pitch_amplitude,
        "roll": script.roll_amplitude,
        "tx": script.translation_amplitude,
        "ty": script.translation_amplitude,
        "tz": script.translation_amplitude,
    }
    for col, amp in amplitudes.items():
        track[col] = _keyframed(rng, length, script.pose_interval, -amp, amp) if amp > 0 else np.zeros(length)

    df = pd.DataFrame(track, index=pd.RangeIndex(length, name="frame"))
    for col in STATE_COLUMNS:
        df[col] = _limit_rate(df[col].to_numpy(), synth.max_delta)
    for col in POSE_COLUMNS:
        df[col] = _limit_rate(df[col].to_numpy(), synth.max_pose_delta)

    df[["mouth_open", "blink_left", "blink_right", "brow_raise"]] = df[
        ["mouth_open", "blink_left", "blink_right", "brow_raise"]
    ].clip(0.0, 1.0)
    df[["gaze_x", "gaze_y"]] = df[["gaze_x", "gaze_y"]].clip(-1.0, 1.0)
    return df[STATE_COLUMNS + POSE_COLUMNS]


def states_from_track(track: pd.DataFrame) -> list[FaceState]:
    return [FaceState.from_row(row) for _, row in track.iterrows()]


def _jittered(camera: FisheyeCamera, seed: int, frame: int, jitter: float) -> FisheyeCamera:
    if jitter <= 0.0:
        return camera
    rng = np.random.default_rng([seed, frame])
    offset = np.asarray(camera.mount_offset.translation) + rng.normal(0.0, jitter, size=3)
    mount = RigidPose(rotation=camera.mount_offset.rotation, translation=tuple(offset))
    return dataclasses.replace(camera, mount_offset=mount)


def generate_sequence(
    length: int,
    script: ExpressionScript | str | None = None,
    seed: int = 0,
    *,
    resolution: int = 64,
    window_size: int = cfg.WINDOW_SIZE,
    synth: SynthConfig | None = None,
    splits: tuple[int, int] | None = None,
    head: HeadModel | None = None,
    root: Path | None = None,
    name: str = "seq000",
    workers: int = 1,
) -> PairedSequence:
    """Render a synchronised PairedSequence; writes the dataset layout when `root` is given."""
    if length < window_size:
        raise LengthTooShort(f"Sequence length {length} is shorter than the window size {window_size}")
    if isinstance(script, str):
        script = get_script(script)
    script = script or SCRIPTS["talking"]
    synth = synth or SynthConfig()
    head = head or HeadModel()

    track = make_state_track(length, script, seed, synth)
    states = states_from_track(track)
    ego_cam, front_cam = default_cameras(resolution, synth.occlusion, head)

    def _render(i: int):
        cams = (_jittered(ego_cam, seed, i, synth.mount_jitter), front_cam)
        return render_pair(states[i], cams, resolution, seed=seed, background=synth.background, head=head, lit=synth.lit)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rendered = list(pool.map(_render, range(length)))
    else:
        rendered = [_render(i) for i in range(length)]

    ego_frames = np.stack([r[0] for r in rendered])
    front_frames = np.stack([r[1] for r in rendered])
    ego_masks = np.stack([r[2] for r in rendered])
    front_masks = np.stack([r[3] for r in rendered])

    meta = {
        "version": cfg.MANIFEST_VERSION,
        "name": name,
        "length": length,
        "seed": seed,
        "resolution": resolution,
        "window_size": window_size,
        "synchronized": True,
        "script": dataclasses.asdict(script),
        "synth": dataclasses.asdict(synth),
        "cameras": {"ego": ego_cam.as_dict(), "front": front_cam.as_dict()},
        "ego_mouth_box": list(mouth_box(ego_cam, resolution, head)),
    }
    seq = PairedSequence(
        ego_frames=ego_frames,
        front_frames=front_frames,
        ego_mask=ego_masks[0],
        front_masks=front_masks,
        poses=track[POSE_COLUMNS].copy(),
        splits=splits or default_splits(length, window_size),
        states=track.copy(),
        meta=meta,
    )
    logger.info("Generated sequence %s: %d frames at %dx%d (seed %d)", name, length, resolution, resolution, seed)

    if root is not None:
        save_sequence(seq, Path(root) / name, ego_masks=ego_masks)
    return seq


def simulate_capture(seq: PairedSequence, lag: int, flash_frame: int = 0) -> PairedSequence:
    """Unsynchronised raw recording: both streams carry a white frame, frontal tracks lag by `lag` frames."""
    length = len(seq)
    if lag < 0:
        raise ValueError(f"lag must be non-negative, got {lag}")
    if not (0 <= flash_frame and flash_frame + lag < length):
        raise LengthTooShort(f"flash frame {flash_frame} + lag {lag} must fall inside the {length}-frame sequence")

    def _delay(arr: np.ndarray) -> np.ndarray:
        prefix = np.repeat(arr[:1], lag, axis=0)
        return np.concatenate([prefix, arr], axis=0)[:length]

    def _delay_frame(df: pd.DataFrame) -> pd.DataFrame:
        out = pd.concat([df.iloc[[0] * lag], df], ignore_index=True).iloc[:length]
        out.index = pd.RangeIndex(length, name="frame")
        return out

    meta = dict(seq.meta)
    meta.update({"synchronized": False, "lag": lag, "flash_frame": flash_frame})
    return PairedSequence(
        ego_frames=insert_flash(seq.ego_frames, flash_frame),
        front_frames=insert_flash(_delay(seq.front_frames), flash_frame + lag),
        ego_mask=seq.ego_mask,
        front_masks=_delay(seq.front_masks),
        poses=_delay_frame(seq.poses),
        splits=default_splits(length, seq.meta.get("window_size", cfg.WINDOW_SIZE)),
        states=_delay_frame(seq.states) if seq.states is not None else None,
        meta=meta,
    )


def state_deltas(track: pd.DataFrame, columns: Sequence[str] = STATE_COLUMNS) -> pd.Series:
    """Largest absolute frame-to-frame change per column."""
    return track[list(columns)].diff().abs().max()
