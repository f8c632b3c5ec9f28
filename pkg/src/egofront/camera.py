"""Camera models for the synthetic capture rig.

- RigidPose: Euler yaw/pitch/roll (radians) + translation (scene units)
- FisheyeCamera: equidistant fisheye (r = focal * theta), head-mounted
- FrontalCamera: pinhole camera looking down +z from (0, 0, -distance)

Conventions
-----------
Camera frames are x right, y down, z forward (optical axis). Pixel i covers
[i, i+1), so pixel centres sit at i + 0.5 and the principal point of a
centred camera is (res/2, res/2).
"""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

import egofront.config as cfg
from egofront.errors import PointOutsideFov

FOV_TOL = 1e-12


@dataclasses.dataclass(frozen=True)
class RigidPose:
    rotation: tuple[float, float, float] = (0.0, 0.0, 0.0)  # yaw, pitch, roll
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if len(self.rotation) != 3 or len(self.translation) != 3:
            raise ValueError(f"RigidPose needs 3 angles and 3 translations, got {self.rotation}, {self.translation}")
        for name, angle in zip(("yaw", "pitch", "roll"), self.rotation):
            if not math.isfinite(angle) or abs(angle) > cfg.MAX_ANGLE + 1e-9:
                raise ValueError(f"RigidPose {name} must be within [-pi/2, pi/2], got {angle}")
        object.__setattr__(self, "rotation", tuple(float(a) for a in self.rotation))
        object.__setattr__(self, "translation", tuple(float(t) for t in self.translation))

    @property
    def yaw(self) -> float:
        return self.rotation[0]

    @property
    def pitch(self) -> float:
        return self.rotation[1]

    @property
    def roll(self) -> float:
        return self.rotation[2]

    def rotation_matrix(self) -> np.ndarray:
        """R = Ry(yaw) @ Rx(pitch) @ Rz(roll)."""
        return euler_to_matrix(*self.rotation)

    def as_row(self) -> dict[str, float]:
        yaw, pitch, roll = self.rotation
        tx, ty, tz = self.translation
        return {"yaw": yaw, "pitch": pitch, "roll": roll, "tx": tx, "ty": ty, "tz": tz}

    @classmethod
    def from_row(cls, row) -> "RigidPose":
        return cls(
            rotation=(float(row["yaw"]), float(row["pitch"]), float(row["roll"])),
            translation=(float(row["tx"]), float(row["ty"]), float(row["tz"])),
        )


def euler_to_matrix(yaw: float, pitch: float, roll: float) -> np.ndarray:
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cr, sr = math.cos(roll), math.sin(roll)
    ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    rz = np.array([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]])
    return ry @ rx @ rz


def look_at_pose(eye: Sequence[float], target: Sequence[float]) -> RigidPose:
    """Pose whose +z axis points from `eye` to `target` (roll fixed at 0)."""
    d = np.asarray(target, dtype=float) - np.asarray(eye, dtype=float)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        raise ValueError("look_at_pose: eye and target coincide")
    d = d / norm
    pitch = math.asin(-d[1])
    yaw = math.atan2(d[0], d[2])
    return RigidPose(rotation=(yaw, pitch, 0.0), translation=tuple(float(v) for v in eye))


# Fisheye

@dataclasses.dataclass(frozen=True)
class FisheyeCamera:
    focal: float
    principal_point: tuple[float, float]
    fov_diagonal: float = cfg.FISHEYE_FOV_DIAGONAL
    mount_offset: RigidPose = RigidPose()

    def __post_init__(self):
        if not self.focal > 0.0:
            raise ValueError(f"FisheyeCamera focal must be > 0, got {self.focal}")
        if not (0.0 < self.fov_diagonal <= math.pi + 1e-12):
            raise ValueError(f"FisheyeCamera fov_diagonal must be in (0, pi], got {self.fov_diagonal}")
        if len(self.principal_point) != 2:
            raise ValueError(f"FisheyeCamera principal_point must be a 2-vector, got {self.principal_point}")

    @property
    def max_theta(self) -> float:
        return 0.5 * self.fov_diagonal

    def to_camera_frame(self, points: np.ndarray) -> np.ndarray:
        """Express mount-frame points (..., 3) in camera coordinates."""
        rot = self.mount_offset.rotation_matrix()
        t = np.asarray(self.mount_offset.translation, dtype=float)
        return (np.asarray(points, dtype=float) - t) @ rot

    def to_mount_frame(self, vectors: np.ndarray, *, points: bool = True) -> np.ndarray:
        rot = self.mount_offset.rotation_matrix()
        out = np.asarray(vectors, dtype=float) @ rot.T
        if points:
            out = out + np.asarray(self.mount_offset.translation, dtype=float)
        return out

    def as_dict(self) -> dict:
        return {
            "focal": self.focal,
            "principal_point": list(self.principal_point),
            "fov_diagonal": self.fov_diagonal,
            "mount_offset": self.mount_offset.as_row(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FisheyeCamera":
        return cls(
            focal=float(d["focal"]),
            principal_point=tuple(float(v) for v in d["principal_point"]),
            fov_diagonal=float(d["fov_diagonal"]),
            mount_offset=RigidPose.from_row(d["mount_offset"]),
        )


def fisheye_angles(points_cam: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Angle from the optical axis (theta) and azimuth (phi) of camera-frame points."""
    p = np.asarray(points_cam, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    theta = np.arctan2(np.hypot(x, y), z)
    phi = np.arctan2(y, x)
    return theta, phi


def fisheye_project(point3d, cam: FisheyeCamera) -> np.ndarray:
    """Equidistant projection r = focal * theta of mount-frame point(s).

    Accepts a single 3-vector or an (..., 3) array. Points exactly on the FOV
    boundary are accepted; anything beyond raises PointOutsideFov.
    """
    p_cam = cam.to_camera_frame(point3d)
    theta, phi = fisheye_angles(p_cam)
    outside = theta > cam.max_theta + FOV_TOL
    if np.any(outside):
        worst = float(np.max(theta))
        raise PointOutsideFov(
            f"Point at {worst:.6f} rad from the optical axis is outside the {cam.fov_diagonal:.6f} rad field of view"
        )
    r = cam.focal * theta
    pp = np.asarray(cam.principal_point, dtype=float)
    return pp + np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)


def fisheye_unproject(pixels, cam: FisheyeCamera) -> np.ndarray:
    """Unit viewing rays (camera frame) for pixel coordinates (..., 2)."""
    uv = np.asarray(pixels, dtype=float) - np.asarray(cam.principal_point, dtype=float)
    r = np.hypot(uv[..., 0], uv[..., 1])
    theta = r / cam.focal
    phi = np.arctan2(uv[..., 1], uv[..., 0])
    s = np.sin(theta)
    return np.stack([s * np.cos(phi), s * np.sin(phi), np.cos(theta)], axis=-1)


def fisheye_rays(cam: FisheyeCamera, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel rays (H, W, 3) and the boolean in-FOV mask for a square image."""
    centres = pixel_centres(resolution)
    rays = fisheye_unproject(centres, cam)
    uv = centres - np.asarray(cam.principal_point, dtype=float)
    valid = np.hypot(uv[..., 0], uv[..., 1]) / cam.focal <= cam.max_theta
    return rays, valid


def pixel_centres(resolution: int) -> np.ndarray:
    coords = np.arange(resolution, dtype=float) + 0.5
    u, v = np.meshgrid(coords, coords)
    return np.stack([u, v], axis=-1)


# Frontal pinhole

@dataclasses.dataclass(frozen=True)
class FrontalCamera:
    focal: float
    principal_point: tuple[float, float]
    distance: float = cfg.FRONT_CAMERA_DISTANCE

    def __post_init__(self):
        if not self.focal > 0.0:
            raise ValueError(f"FrontalCamera focal must be > 0, got {self.focal}")
        if not self.distance > 0.0:
            raise ValueError(f"FrontalCamera distance must be > 0, got {self.distance}")

    @classmethod
    def for_resolution(cls, resolution: int) -> "FrontalCamera":
        return cls(
            focal=cfg.FRONT_FOCAL_FACTOR * resolution,
            principal_point=(0.5 * resolution, 0.5 * resolution),
        )

    @property
    def centre(self) -> np.ndarray:
        return np.array([0.0, 0.0, -self.distance])

    def project(self, points_world) -> np.ndarray:
        p = np.asarray(points_world, dtype=float) - self.centre
        z = p[..., 2]
        if np.any(z <= 0.0):
            raise ValueError("FrontalCamera.project: point behind the camera")
        pp = np.asarray(self.principal_point, dtype=float)
        return pp + self.focal * p[..., :2] / z[..., None]

    def rays(self, resolution: int) -> np.ndarray:
        uv = pixel_centres(resolution) - np.asarray(self.principal_point, dtype=float)
        d = np.concatenate([uv / self.focal, np.ones(uv.shape[:-1] + (1,))], axis=-1)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def cropped(self, crop_box: Sequence[int], out_res: int) -> "FrontalCamera":
        """Camera matching an image that went through crop -> centre pad -> resize."""
        left, top, right, bottom = crop_box
        w, h = right - left, bottom - top
        side = max(w, h)
        pad_x = (side - w) // 2
        pad_y = (side - h) // 2
        scale = out_res / side
        cx, cy = self.principal_point
        return FrontalCamera(
            focal=self.focal * scale,
            principal_point=((cx - left + pad_x) * scale, (cy - top + pad_y) * scale),
            distance=self.distance,
        )

    def as_dict(self) -> dict:
        return {"focal": self.focal, "principal_point": list(self.principal_point), "distance": self.distance}

    @classmethod
    def from_dict(cls, d: dict) -> "FrontalCamera":
        return cls(
            focal=float(d["focal"]),
            principal_point=tuple(float(v) for v in d["principal_point"]),
            distance=float(d["distance"]),
        )
