"""Paired sequences, split bookkeeping, background masks and N-frame windows.

Frames stay 8-bit RGB (H, W, 3) everywhere outside the model; `normalize`
maps them to [-1, 1] float tensors (N, 3, H, W) at the model boundary.
"""

from __future__ import annotations

import dataclasses
from typing import Any, Iterator, Sequence

import numpy as np
import pandas as pd
import torch
from PIL import Image
from torch.utils.data import Dataset

import egofront.config as cfg
from egofront.camera import FrontalCamera, RigidPose
from egofront.errors import (
    CropOutOfBounds,
    LengthMismatch,
    MaskMissing,
    ShapeMismatch,
    SplitTooShort,
)

SPLITS = ("train", "val", "test")
POSE_COLUMNS = ["yaw", "pitch", "roll", "tx", "ty", "tz"]


def default_splits(length: int, window_size: int = cfg.WINDOW_SIZE) -> tuple[int, int]:
    """(7500, 10000) for full-length recordings, 70/15/15 otherwise.

    The training split of a short sequence always holds at least one window.
    """
    if length > cfg.TRAIN_FRAMES + cfg.VAL_FRAMES:
        return cfg.TRAIN_FRAMES, cfg.TRAIN_FRAMES + cfg.VAL_FRAMES
    train_end = max(min(window_size, length), int(round(cfg.SHORT_TRAIN_FRACTION * length)))
    val_end = max(train_end, int(round(cfg.SHORT_VAL_FRACTION * length)))
    return train_end, val_end


@dataclasses.dataclass
class PairedSequence:
    ego_frames: np.ndarray  # (L, H, W, 3) uint8
    front_frames: np.ndarray  # (L, H, W, 3) uint8
    ego_mask: np.ndarray | None  # (H, W), shared by all frames
    front_masks: np.ndarray | None  # (L, H, W)
    poses: pd.DataFrame  # yaw, pitch, roll, tx, ty, tz per frame
    splits: tuple[int, int]  # (train_end, val_end)
    states: pd.DataFrame | None = None
    meta: dict[str, Any] = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        length = len(self.ego_frames)
        if self.ego_frames.ndim != 4 or self.ego_frames.shape[-1] != 3:
            raise ShapeMismatch(f"PairedSequence ego_frames must be (L, H, W, 3), got {self.ego_frames.shape}")
        if self.front_frames.shape[0] != length:
            raise LengthMismatch(f"PairedSequence: {length} ego frames but {len(self.front_frames)} front frames")
        if self.front_frames.shape[1:] != self.ego_frames.shape[1:]:
            raise ShapeMismatch(
                f"PairedSequence ego/front frame shapes differ: {self.ego_frames.shape[1:]} vs {self.front_frames.shape[1:]}"
            )
        hw = self.ego_frames.shape[1:3]
        if self.ego_mask is not None and self.ego_mask.shape != hw:
            raise ShapeMismatch(f"PairedSequence ego_mask shape {self.ego_mask.shape} != frame size {hw}")
        if self.front_masks is not None and self.front_masks.shape != (length, *hw):
            raise ShapeMismatch(f"PairedSequence front_masks shape {self.front_masks.shape} != {(length, *hw)}")
        missing = [c for c in POSE_COLUMNS if c not in self.poses.columns]
        if missing:
            raise KeyError(f"PairedSequence poses missing columns: {missing}")
        if len(self.poses) != length:
            raise LengthMismatch(f"PairedSequence: {length} frames but {len(self.poses)} poses")
        if self.states is not None and len(self.states) != length:
            raise LengthMismatch(f"PairedSequence: {length} frames but {len(self.states)} states")

        train_end, val_end = (int(s) for s in self.splits)
        if not (0 <= train_end <= val_end <= length):
            raise ValueError(f"PairedSequence splits {self.splits} must satisfy 0 <= train_end <= val_end <= {length}")
        self.splits = (train_end, val_end)

        box = self.meta.get("ego_mouth_box")
        if box is not None and self.ego_mask is not None:
            left, top, right, bottom = box
            if not np.any(self.ego_mask[top:bottom, left:right]):
                raise ValueError(f"PairedSequence ego_mask masks out the whole mouth box {tuple(box)}")

    def __len__(self) -> int:
        return len(self.ego_frames)

    @property
    def resolution(self) -> int:
        return int(self.ego_frames.shape[1])

    def pose_at(self, index: int) -> RigidPose:
        return RigidPose.from_row(self.poses.iloc[index])

    def pose_list(self) -> list[RigidPose]:
        return [RigidPose.from_row(row) for _, row in self.poses.iterrows()]


def split_range(seq: PairedSequence, split: str) -> tuple[int, int]:
    train_end, val_end = seq.splits
    bounds = {"train": (0, train_end), "val": (train_end, val_end), "test": (val_end, len(seq))}
    try:
        return bounds[split]
    except KeyError:
        raise ValueError(f"Unknown split '{split}'. Available: {SPLITS}")


def count_windows(length: int, window_size: int, stride: int = 1) -> int:
    if window_size < 1 or stride < 1:
        raise ValueError(f"window_size and stride must be >= 1, got {window_size}, {stride}")
    if length < window_size:
        raise SplitTooShort(f"Split of {length} frames is shorter than the window size {window_size}")
    return (length - window_size) // stride + 1


def apply_masks(seq: PairedSequence, remove_ego_bg: bool = True) -> PairedSequence:
    """Zero frontal background per frame and, optionally, egocentric background with the shared mask."""
    if seq.front_masks is None:
        raise MaskMissing("apply_masks: sequence has no frontal masks")
    if remove_ego_bg and seq.ego_mask is None:
        raise MaskMissing("apply_masks: sequence has no egocentric mask")

    front = seq.front_frames * (seq.front_masks[..., None] > 0)
    ego = seq.ego_frames * (seq.ego_mask[None, ..., None] > 0) if remove_ego_bg else seq.ego_frames.copy()
    return dataclasses.replace(
        seq,
        ego_frames=ego.astype(np.uint8),
        front_frames=front.astype(np.uint8),
        meta={**seq.meta, "masked": True, "ego_background_removed": bool(remove_ego_bg)},
    )


def normalize(frames: np.ndarray) -> torch.Tensor:
    """uint8 (..., H, W, 3) -> float32 (..., 3, H, W) in [-1, 1]."""
    t = torch.from_numpy(np.ascontiguousarray(frames)).float()
    return (t / 127.5 - 1.0).movedim(-1, -3).contiguous()


def denormalize(tensor: torch.Tensor) -> np.ndarray:
    """float (..., 3, H, W) in [-1, 1] -> uint8 (..., H, W, 3)."""
    t = ((tensor.detach().float().cpu() + 1.0) * 127.5).round().clamp(0, 255)
    return t.movedim(-3, -1).to(torch.uint8).numpy()


def stack_channels(window: torch.Tensor) -> torch.Tensor:
    """(..., N, 3, H, W) -> (..., 3N, H, W)."""
    return window.flatten(-4, -3)


def unstack_channels(stacked: torch.Tensor, window_size: int) -> torch.Tensor:
    """(..., 3N, H, W) -> (..., N, 3, H, W)."""
    *lead, channels, h, w = stacked.shape
    if channels != 3 * window_size:
        raise ShapeMismatch(f"Expected {3 * window_size} channels for N={window_size}, got {channels}")
    return stacked.reshape(*lead, window_size, 3, h, w)


@dataclasses.dataclass
class FrameWindow:
    ego_stack: torch.Tensor  # (N, 3, H, W)
    cond_stack: torch.Tensor
    target_stack: torch.Tensor
    start_index: int

    def __post_init__(self):
        shapes = {self.ego_stack.shape, self.cond_stack.shape, self.target_stack.shape}
        if len(shapes) != 1:
            raise ShapeMismatch(f"FrameWindow stacks disagree in shape: {sorted(map(tuple, shapes))}")
        if self.ego_stack.ndim != 4 or self.ego_stack.shape[1] != 3:
            raise ShapeMismatch(f"FrameWindow stacks must be (N, 3, H, W), got {tuple(self.ego_stack.shape)}")

    @property
    def window_size(self) -> int:
        return int(self.ego_stack.shape[0])

    @property
    def frame_indices(self) -> range:
        return range(self.start_index, self.start_index + self.window_size)


def _conditioning_track(seq: PairedSequence, conditioning: np.ndarray | None) -> np.ndarray | None:
    if conditioning is None:
        return None
    if conditioning.shape != seq.ego_frames.shape:
        raise ShapeMismatch(f"Conditioning track {conditioning.shape} does not match frames {seq.ego_frames.shape}")
    return conditioning


def windows(
    seq: PairedSequence,
    split: str,
    N: int = cfg.WINDOW_SIZE,
    stride: int = 1,
    conditioning: np.ndarray | None = None,
) -> Iterator[FrameWindow]:
    """Yield the (L_split - N + 1) windows of a split in order; window i covers frames [i, i+N).

    `conditioning` is a full-length (L, H, W, 3) uint8 track; None gives all-zero conditioning.
    """
    start, stop = split_range(seq, split)
    count = count_windows(stop - start, N, stride)
    cond = _conditioning_track(seq, conditioning)
    for k in range(count):
        i = start + k * stride
        frames = slice(i, i + N)
        ego = normalize(seq.ego_frames[frames])
        target = normalize(seq.front_frames[frames])
        cond_stack = normalize(cond[frames]) if cond is not None else torch.zeros_like(ego)
        yield FrameWindow(ego_stack=ego, cond_stack=cond_stack, target_stack=target, start_index=i)


class WindowDataset(Dataset):
    """Windows of one split as channel-stacked tensors (ego, cond, target), each (3N, H, W).

    Frames are held as uint8 and normalised per item so full-length sequences fit in memory.
    """

    def __init__(
        self,
        seq: PairedSequence,
        split: str,
        N: int = cfg.WINDOW_SIZE,
        conditioning: np.ndarray | None = None,
        limit_frames: int | None = None,
    ):
        start, stop = split_range(seq, split)
        if limit_frames is not None:
            stop = min(stop, start + limit_frames)
        self.start = start
        self.window_size = N
        self.length = count_windows(stop - start, N)
        cond = _conditioning_track(seq, conditioning)
        self._ego = torch.from_numpy(np.ascontiguousarray(seq.ego_frames[start:stop]))
        self._target = torch.from_numpy(np.ascontiguousarray(seq.front_frames[start:stop]))
        self._cond = torch.from_numpy(np.ascontiguousarray(cond[start:stop])) if cond is not None else None

    def __len__(self) -> int:
        return self.length

    def _stack(self, frames: torch.Tensor) -> torch.Tensor:
        t = frames.float() / 127.5 - 1.0
        return stack_channels(t.movedim(-1, -3))

    def __getitem__(self, index: int):
        if not (0 <= index < self.length):
            raise IndexError(f"Window {index} out of range for {self.length} windows")
        frames = slice(index, index + self.window_size)
        ego = self._stack(self._ego[frames])
        target = self._stack(self._target[frames])
        cond = self._stack(self._cond[frames]) if self._cond is not None else torch.zeros_like(ego)
        return ego, cond, target


# Cropping

def pad_to_square(frame: np.ndarray) -> np.ndarray:
    """Centre-pad with zeros to a square; the shorter side gets (long - short) // 2 on the leading edge."""
    h, w = frame.shape[:2]
    side = max(h, w)
    pad_y, pad_x = (side - h) // 2, (side - w) // 2
    out = np.zeros((side, side) + frame.shape[2:], dtype=frame.dtype)
    out[pad_y : pad_y + h, pad_x : pad_x + w] = frame
    return out


def crop_resize(
    frame: np.ndarray,
    crop_box: Sequence[int],
    out_res: int,
    resample: int = Image.BICUBIC,
) -> np.ndarray:
    """Crop (left, top, right, bottom), centre-pad to square, resize to out_res x out_res."""
    h, w = frame.shape[:2]
    left, top, right, bottom = (int(v) for v in crop_box)
    if not (0 <= left < right <= w and 0 <= top < bottom <= h):
        raise CropOutOfBounds(f"Crop box {tuple(crop_box)} is not inside a {w}x{h} frame")
    if out_res < 1:
        raise ValueError(f"out_res must be positive, got {out_res}")

    square = pad_to_square(frame[top:bottom, left:right])
    if square.shape[0] == out_res:
        return square.copy()
    img = Image.fromarray(square)
    return np.asarray(img.resize((out_res, out_res), resample=resample), dtype=frame.dtype)


def crop_sequence(seq: PairedSequence, ego_box: Sequence[int], front_box: Sequence[int], out_res: int) -> PairedSequence:
    """Apply one fixed crop per stream to every frame and mask of a sequence."""

    def _frames(frames, box):
        return np.stack([crop_resize(f, box, out_res) for f in frames])

    def _masks(masks, box):
        return np.stack([(crop_resize(m * 255, box, out_res, Image.NEAREST) > 0).astype(np.uint8) for m in masks])

    ego_mask = None if seq.ego_mask is None else _masks(seq.ego_mask[None], ego_box)[0]
    front_masks = None if seq.front_masks is None else _masks(seq.front_masks, front_box)
    meta = {k: v for k, v in seq.meta.items() if k != "ego_mouth_box"}
    meta.update({"ego_crop": list(ego_box), "front_crop": list(front_box), "resolution": out_res})
    cameras = dict(meta.get("cameras") or {})
    if "front" in cameras:
        cameras["front"] = FrontalCamera.from_dict(cameras["front"]).cropped(front_box, out_res).as_dict()
    cameras.pop("ego", None)
    meta["cameras"] = cameras
    return dataclasses.replace(
        seq,
        ego_frames=_frames(seq.ego_frames, ego_box),
        front_frames=_frames(seq.front_frames, front_box),
        ego_mask=ego_mask,
        front_masks=front_masks,
        meta=meta,
    )
