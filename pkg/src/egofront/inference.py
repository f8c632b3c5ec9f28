"""Sliding-window synthesis of frontal video from egocentric frames.

Each output frame t is read from one window of N consecutive inputs. With
`select="last"` that is the last frame of window [t-N+1, t], so output t never
sees input t+1 (N-frame latency). Frames before the first full window are
taken from the first window.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from pathlib import Path

import numpy as np
import torch

import egofront.config as cfg
from egofront.camera import FrontalCamera
from egofront.conditioning import ConditioningSpec, render_conditioning_track, resample_pose_track
from egofront.data.frames import write_frame_dir
from egofront.dataset import denormalize, normalize
from egofront.errors import ConfigMismatch, LengthMismatch, SequenceTooShort, ShapeMismatch, UnknownMode
from egofront.model import ModelCheckpoint, VideoUNet, generator_forward

logger = logging.getLogger(__name__)

SELECT_MODES = (cfg.SELECT_LAST, cfg.SELECT_MIDDLE)


def output_plan(length: int, window_size: int, select: str = cfg.SELECT_LAST) -> list[tuple[int, int]]:
    """(window start, frame within window) that produces each output frame."""
    if select not in SELECT_MODES:
        raise UnknownMode(f"Unknown frame selection '{select}'. Available: {SELECT_MODES}")
    if length < window_size:
        raise SequenceTooShort(f"Sequence of {length} frames is shorter than the window N={window_size}")
    offset = window_size - 1 if select == cfg.SELECT_LAST else window_size // 2
    last_start = length - window_size
    plan = []
    for t in range(length):
        start = t - offset
        if start < 0:
            plan.append((0, t))
        elif start > last_start:
            plan.append((last_start, t - last_start))
        else:
            plan.append((start, offset))
    return plan


def _resolve_generator(model: ModelCheckpoint | VideoUNet, device) -> VideoUNet:
    if isinstance(model, ModelCheckpoint):
        return model.generator(device)
    return model.to(device).eval()


def synthesize(
    ego_frames: np.ndarray,
    cond_track: np.ndarray | None,
    model: ModelCheckpoint | VideoUNet,
    *,
    window_size: int | None = None,
    select: str = cfg.SELECT_LAST,
    device: str | torch.device = "cpu",
) -> np.ndarray:
    """Frontal frames (L, H, W, 3) uint8 for egocentric frames (L, H, W, 3).

    `cond_track` is the (L, H, W, 3) conditioning track, None for all-zero
    conditioning. `window_size` is the runtime N and must match the model's.
    Every window is run on its own (batch of one).
    """
    G = _resolve_generator(model, device)
    n = G.config.window_size
    if window_size is not None and window_size != n:
        raise ConfigMismatch(f"Runtime window N={window_size} but the checkpoint was trained with N={n}")
    ego_frames = np.asarray(ego_frames)
    if ego_frames.ndim != 4 or ego_frames.shape[-1] != 3:
        raise ShapeMismatch(f"synthesize expects (L, H, W, 3) frames, got {ego_frames.shape}")
    if ego_frames.shape[1:3] != (G.config.resolution, G.config.resolution):
        raise ShapeMismatch(f"Frames are {ego_frames.shape[1:3]} but the generator expects {G.config.resolution}px")
    if cond_track is not None and cond_track.shape != ego_frames.shape:
        raise LengthMismatch(f"Conditioning track {cond_track.shape} does not match ego frames {ego_frames.shape}")

    plan = output_plan(len(ego_frames), n, select)
    by_window: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for t, (start, k) in enumerate(plan):
        by_window[start].append((t, k))

    out = np.empty_like(ego_frames, dtype=np.uint8)
    with torch.no_grad():
        for start in sorted(by_window):
            frames = slice(start, start + n)
            ego = normalize(ego_frames[frames]).to(device)
            cond = normalize(cond_track[frames]).to(device) if cond_track is not None else torch.zeros_like(ego)
            pred = denormalize(generator_forward(ego, cond, G))
            for t, k in by_window[start]:
                out[t] = pred[k]
    logger.info("Synthesised %d frames from %d windows (N=%d, select=%s)", len(out), len(by_window), n, select)
    return out


def conditioning_mode(model: ModelCheckpoint | VideoUNet, mode: str | None = None) -> str:
    """`mode` when given, else the checkpoint's training mode, else neutral_head."""
    if mode is not None:
        return mode
    if isinstance(model, ModelCheckpoint):
        return model.train_config.get("conditioning", cfg.NEUTRAL_HEAD)
    return cfg.NEUTRAL_HEAD


def render_track(poses, mode: str, resolution: int, camera: FrontalCamera | None = None) -> np.ndarray | None:
    """Conditioning frames for a pose track; None for mode 'none'."""
    spec = ConditioningSpec(mode=mode, pose_track=poses, camera=camera or FrontalCamera.for_resolution(resolution))
    if spec.mode == cfg.NO_CONDITIONING:
        return None
    return render_conditioning_track(spec, resolution)


def synthesize_with_resampled_pose(
    ego_frames: np.ndarray,
    training_poses,
    start_frame: int,
    model: ModelCheckpoint | VideoUNet,
    *,
    mode: str | None = None,
    camera: FrontalCamera | None = None,
    select: str = cfg.SELECT_LAST,
    device: str | torch.device = "cpu",
) -> np.ndarray:
    """Synthesise with the pose track replaced by training poses from `start_frame` on.

    Expression follows the egocentric input; head pose follows the resampled track.
    """
    poses = resample_pose_track(training_poses, start_frame, len(ego_frames))
    resolution = int(np.asarray(ego_frames).shape[1])
    cond = render_track(poses, conditioning_mode(model, mode), resolution, camera)
    return synthesize(ego_frames, cond, model, select=select, device=device)


def reenact(
    ego_frames: np.ndarray,
    training_poses,
    model: ModelCheckpoint | VideoUNet,
    seed: int = 0,
    **kwargs,
) -> tuple[np.ndarray, int]:
    """Avatar mode: drive the head with a training pose run from a seeded random start.

    Returns (frames, start frame).
    """
    n_poses = len(training_poses)
    if n_poses == 0:
        # resample_pose_track raises the proper error
        return synthesize_with_resampled_pose(ego_frames, training_poses, 0, model, **kwargs), 0
    start = int(np.random.default_rng(seed).integers(n_poses))
    logger.info("Reenactment from training pose %d (seed %d)", start, seed)
    return synthesize_with_resampled_pose(ego_frames, training_poses, start, model, **kwargs), start


def write_outputs(frames: np.ndarray, out_dir: Path) -> Path:
    """Write frames as <out_dir>/frames/%06d.png and return the frame directory."""
    frame_dir = Path(out_dir) / "frames"
    write_frame_dir(frame_dir, frames)
    return frame_dir
