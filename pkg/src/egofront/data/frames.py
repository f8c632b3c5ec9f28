"""8-bit PNG frame and mask I/O, frame-directory stacks and content hashes."""

import hashlib
from pathlib import Path
from typing import Iterable

import numpy as np
from PIL import Image

import egofront.config as cfg
from egofront.errors import MaskMissing, ShapeMismatch

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def frame_path(directory: Path, index: int) -> Path:
    return Path(directory) / cfg.FRAME_PATTERN.format(index)


def frame_paths(directory: Path) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"Frame directory not found: {directory}")
    return sorted(directory.glob("*.png"))


def read_frame(path: Path) -> np.ndarray:
    """8-bit RGB frame (H, W, 3)."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def read_mask(path: Path) -> np.ndarray:
    """Binary mask (H, W) from an 8-bit gray PNG; any nonzero pixel is foreground."""
    with Image.open(path) as img:
        return (np.asarray(img.convert("L")) > 0).astype(np.uint8)


def write_frame(path: Path, frame: np.ndarray) -> Path:
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[-1] != 3:
        raise ShapeMismatch(f"write_frame expects (H, W, 3), got {frame.shape}")
    Image.fromarray(frame.astype(np.uint8)).save(path)
    return Path(path)


def write_mask(path: Path, mask: np.ndarray) -> Path:
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ShapeMismatch(f"write_mask expects (H, W), got {mask.shape}")
    Image.fromarray(((mask > 0) * 255).astype(np.uint8)).save(path)
    return Path(path)


def read_frame_dir(directory: Path) -> np.ndarray:
    """Stack every PNG in `directory` (sorted by name) into (L, H, W, 3)."""
    paths = frame_paths(directory)
    if not paths:
        raise FileNotFoundError(f"No PNG frames in {directory}")
    return np.stack([read_frame(p) for p in paths])


def read_mask_dir(directory: Path) -> np.ndarray:
    directory = Path(directory)
    if not directory.is_dir():
        raise MaskMissing(f"Mask directory not found: {directory}")
    paths = frame_paths(directory)
    if not paths:
        raise MaskMissing(f"No mask PNGs in {directory}")
    return np.stack([read_mask(p) for p in paths])


def write_frame_dir(directory: Path, frames: Iterable[np.ndarray]) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return [write_frame(frame_path(directory, i), f) for i, f in enumerate(frames)]


def write_mask_dir(directory: Path, masks: Iterable[np.ndarray]) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return [write_mask(frame_path(directory, i), m) for i, m in enumerate(masks)]


def luminance(frames: np.ndarray) -> np.ndarray:
    """Mean Rec.601 luminance per frame.

    Accepts (L, H, W, 3) colour frames, (L, H, W) gray frames, or an already
    reduced (L,) luminance track (returned as float).
    """
    arr = np.asarray(frames, dtype=float)
    if arr.ndim == 1:
        return arr
    if arr.ndim == 4 and arr.shape[-1] == 3:
        arr = arr @ LUMA_WEIGHTS
    if arr.ndim != 3:
        raise ShapeMismatch(f"luminance expects (L,), (L, H, W) or (L, H, W, 3), got {arr.shape}")
    return arr.reshape(len(arr), -1).mean(axis=1)


def hash_directory(directory: Path) -> str:
    """SHA-256 over the names and bytes of every file below `directory`."""
    directory = Path(directory)
    digest = hashlib.sha256()
    for path in sorted(p for p in directory.rglob("*") if p.is_file()):
        digest.update(str(path.relative_to(directory)).encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()


def hash_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
