"""On-disk sequence layout.

<root>/<seq>/
    ego/%06d.png, front/%06d.png        8-bit RGB frames
    masks/ego/%06d.png, masks/front/%06d.png   8-bit gray masks
    masks/ego_override.png              optional hand-adjusted egocentric mask
    poses.csv                           frame,yaw,pitch,roll,tx,ty,tz
    states.csv                          frame + FaceState scalars (synthetic data only)
    cond/%06d.png                       optional cached conditioning frames
    manifest.json                       length, splits, seed, cameras, ...
"""

import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

import egofront.config as cfg
from egofront.data.frames import (
    frame_path,
    read_frame_dir,
    read_mask,
    read_mask_dir,
    write_frame_dir,
    write_mask_dir,
)
from egofront.dataset import POSE_COLUMNS, PairedSequence, default_splits
from egofront.errors import ConfigMismatch, LengthMismatch, MaskMissing

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
POSES = "poses.csv"
STATES = "states.csv"
EGO_OVERRIDE = Path("masks") / "ego_override.png"


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serialisable")


def write_json(path: Path, payload: dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable))
    return path


def read_json(path: Path) -> dict[str, Any]:
    return json.loads(Path(path).read_text())


def _frame_table(df: pd.DataFrame) -> pd.DataFrame:
    out = df.reset_index(drop=True)
    out.insert(0, "frame", np.arange(len(out)))
    return out


def save_sequence(seq: PairedSequence, directory: Path, ego_masks: np.ndarray | None = None) -> Path:
    """Write `seq` in the dataset layout; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    write_frame_dir(directory / "ego", seq.ego_frames)
    write_frame_dir(directory / "front", seq.front_frames)
    if ego_masks is None and seq.ego_mask is not None:
        ego_masks = np.repeat(seq.ego_mask[None], len(seq), axis=0)
    if ego_masks is not None:
        write_mask_dir(directory / "masks" / "ego", ego_masks)
    if seq.front_masks is not None:
        write_mask_dir(directory / "masks" / "front", seq.front_masks)

    _frame_table(seq.poses[POSE_COLUMNS]).to_csv(directory / POSES, index=False)
    if seq.states is not None:
        _frame_table(seq.states).to_csv(directory / STATES, index=False)

    manifest = dict(seq.meta)
    manifest.update(
        {
            "version": cfg.MANIFEST_VERSION,
            "length": len(seq),
            "resolution": seq.resolution,
            "splits": {"train_end": seq.splits[0], "val_end": seq.splits[1]},
        }
    )
    path = write_json(directory / MANIFEST, manifest)
    logger.info("Wrote sequence layout to %s (%d frames)", directory, len(seq))
    return path


def read_poses(path: Path) -> pd.DataFrame:
    df = pd.read_csv(path)
    missing = [c for c in POSE_COLUMNS if c not in df.columns]
    if missing:
        raise KeyError(f"{path}: missing pose columns {missing}")
    df = df.sort_values("frame") if "frame" in df.columns else df
    out = df[POSE_COLUMNS].reset_index(drop=True).astype(float)
    out.index.name = "frame"
    return out


def load_ego_mask(directory: Path, frame: int = 0) -> np.ndarray:
    """The single egocentric mask: the override file when present, else the mask of `frame`."""
    directory = Path(directory)
    override = directory / EGO_OVERRIDE
    if override.exists():
        logger.info("Using egocentric mask override %s", override)
        return read_mask(override)
    path = frame_path(directory / "masks" / "ego", frame)
    if not path.exists():
        raise MaskMissing(f"No egocentric mask at {path} and no override at {override}")
    return read_mask(path)


def load_sequence(directory: Path, *, require_masks: bool = False, ego_mask_frame: int = 0) -> PairedSequence:
    directory = Path(directory)
    manifest_path = directory / MANIFEST
    meta = read_json(manifest_path) if manifest_path.exists() else {}
    version = meta.get("version", cfg.MANIFEST_VERSION)
    if version != cfg.MANIFEST_VERSION:
        raise ConfigMismatch(f"{manifest_path}: manifest version {version}, expected {cfg.MANIFEST_VERSION}")

    ego = read_frame_dir(directory / "ego")
    front = read_frame_dir(directory / "front")
    if len(ego) != len(front):
        raise LengthMismatch(f"{directory}: {len(ego)} ego frames but {len(front)} front frames")

    front_masks = None
    ego_mask = None
    if (directory / "masks" / "front").is_dir():
        front_masks = read_mask_dir(directory / "masks" / "front")
    if (directory / "masks" / "ego").is_dir() or (directory / EGO_OVERRIDE).exists():
        ego_mask = load_ego_mask(directory, ego_mask_frame)
    if require_masks and (front_masks is None or ego_mask is None):
        raise MaskMissing(f"{directory}: masks/ego and masks/front are required")

    poses = read_poses(directory / POSES)
    states = None
    if (directory / STATES).exists():
        states = pd.read_csv(directory / STATES).drop(columns="frame", errors="ignore")
        states.index.name = "frame"

    splits_meta = meta.get("splits")
    if splits_meta:
        splits = (int(splits_meta["train_end"]), int(splits_meta["val_end"]))
    else:
        splits = default_splits(len(ego), meta.get("window_size", cfg.WINDOW_SIZE))
    meta.pop("splits", None)

    return PairedSequence(
        ego_frames=ego,
        front_frames=front,
        ego_mask=ego_mask,
        front_masks=front_masks,
        poses=poses,
        splits=splits,
        states=states,
        meta=meta,
    )


def save_conditioning_cache(directory: Path, track: np.ndarray) -> Path:
    """Cache a rendered conditioning track as <seq>/cond/%06d.png."""
    cond_dir = Path(directory) / "cond"
    write_frame_dir(cond_dir, track)
    return cond_dir


def load_conditioning_cache(directory: Path) -> np.ndarray | None:
    cond_dir = Path(directory) / "cond"
    if not cond_dir.is_dir():
        return None
    return read_frame_dir(cond_dir)
