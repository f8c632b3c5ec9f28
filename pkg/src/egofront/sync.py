"""Transient-event synchronisation of two recordings.

Both cameras see the same single white frame; its index in each stream gives
the frame offset between them. Only the first qualifying event is used.
"""

from __future__ import annotations

import dataclasses
import logging

import numpy as np

import egofront.config as cfg
from egofront.data.frames import luminance
from egofront.dataset import PairedSequence, default_splits
from egofront.errors import LengthTooShort, NoTransientFound

logger = logging.getLogger(__name__)

LOW_CONFIDENCE = 0.2


@dataclasses.dataclass(frozen=True)
class SyncOffset:
    offset_frames: int
    confidence: float

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"SyncOffset confidence must be in [0, 1], got {self.confidence}")


def _prior_median(lum: np.ndarray, index: int) -> float | None:
    if index == 0:
        return None
    return float(np.median(lum[:index]))


def detect_transient(
    frames,
    threshold: float = cfg.SYNC_THRESHOLD,
    median_ratio: float = cfg.SYNC_MEDIAN_RATIO,
) -> int:
    """Index of the first frame brighter than threshold*255 and median_ratio x the median of earlier frames.

    `frames` may be colour frames, gray frames or a per-frame luminance track.
    """
    if not (0.0 < threshold < 1.0):
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    lum = luminance(frames)
    if lum.size == 0:
        raise NoTransientFound("Cannot detect a transient in an empty sequence")

    for index in np.flatnonzero(lum > threshold * cfg.MAX_PIXEL_VALUE):
        prior = _prior_median(lum, int(index))
        if prior is None or lum[index] > median_ratio * prior:
            return int(index)
    raise NoTransientFound(
        f"No frame exceeds {threshold:.2f}*255 and {median_ratio:g}x the running median "
        f"(brightest frame {int(np.argmax(lum))} at {float(lum.max()):.1f})"
    )


def transient_contrast(frames, index: int) -> float:
    lum = luminance(frames)
    prior = _prior_median(lum, index) or 0.0
    return float(np.clip((lum[index] - prior) / cfg.MAX_PIXEL_VALUE, 0.0, 1.0))


def align(seq_a, seq_b, threshold: float = cfg.SYNC_THRESHOLD) -> SyncOffset:
    """Offset = transient index in a minus transient index in b."""
    lum_a, lum_b = luminance(seq_a), luminance(seq_b)
    index_a = detect_transient(lum_a, threshold)
    index_b = detect_transient(lum_b, threshold)
    confidence = min(transient_contrast(lum_a, index_a), transient_contrast(lum_b, index_b))
    if confidence < LOW_CONFIDENCE:
        logger.warning("Low sync confidence %.3f (transients at %d and %d)", confidence, index_a, index_b)
    return SyncOffset(offset_frames=index_a - index_b, confidence=confidence)


def trim_pair(a, b, offset: int):
    """Trim two streams to their common aligned range (equal-index frames coincide)."""
    start_a, start_b = max(offset, 0), max(-offset, 0)
    length = min(len(a) - start_a, len(b) - start_b)
    if length <= 0:
        raise LengthTooShort(f"Streams of length {len(a)} and {len(b)} do not overlap at offset {offset}")
    return a[start_a : start_a + length], b[start_b : start_b + length]


def insert_flash(frames: np.ndarray, index: int, value: int = cfg.MAX_PIXEL_VALUE) -> np.ndarray:
    out = np.array(frames, copy=True)
    if not (0 <= index < len(out)):
        raise IndexError(f"flash index {index} outside a {len(out)}-frame stream")
    out[index] = value
    return out


def make_flash_pair(frames: np.ndarray, flash_index: int, lag: int) -> tuple[np.ndarray, np.ndarray]:
    """Stream a with a white frame at `flash_index`, and b = a delayed by `lag` frames (edge-padded)."""
    length = len(frames)
    if not (1 <= flash_index <= length - 2):
        raise ValueError(f"flash_index must be in [1, {length - 2}], got {flash_index}")
    if not (0 <= flash_index + lag < length):
        raise ValueError(f"lag {lag} moves the flash outside the {length}-frame stream")
    a = insert_flash(frames, flash_index)
    b = a[np.clip(np.arange(length) - lag, 0, length - 1)]
    return a, b


def synchronize_sequence(seq: PairedSequence, threshold: float = cfg.SYNC_THRESHOLD) -> tuple[PairedSequence, SyncOffset]:
    """Align a raw recording on its shared white frame and drop everything up to and including it."""
    offset = align(seq.ego_frames, seq.front_frames, threshold)
    index_ego = detect_transient(seq.ego_frames, threshold)
    index_front = index_ego - offset.offset_frames
    start_ego, start_front = index_ego + 1, index_front + 1
    length = min(len(seq) - start_ego, len(seq) - start_front)
    if length <= 0:
        raise LengthTooShort(f"No frames remain after the transient (ego {index_ego}, front {index_front})")

    front = slice(start_front, start_front + length)
    poses = seq.poses.iloc[front].reset_index(drop=True)
    poses.index.name = "frame"
    states = None
    if seq.states is not None:
        states = seq.states.iloc[front].reset_index(drop=True)
        states.index.name = "frame"

    meta = dict(seq.meta)
    meta.update(
        {
            "synchronized": True,
            "length": length,
            "sync": {"offset_frames": offset.offset_frames, "confidence": offset.confidence, "transient_ego": index_ego},
        }
    )
    aligned = PairedSequence(
        ego_frames=seq.ego_frames[start_ego : start_ego + length],
        front_frames=seq.front_frames[front],
        ego_mask=seq.ego_mask,
        front_masks=seq.front_masks[front] if seq.front_masks is not None else None,
        poses=poses,
        splits=default_splits(length, seq.meta.get("window_size", cfg.WINDOW_SIZE)),
        states=states,
        meta=meta,
    )
    logger.info("Synchronised %s: offset %d, %d aligned frames", meta.get("name", "sequence"), offset.offset_frames, length)
    return aligned, offset
