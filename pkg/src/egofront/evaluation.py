"""Photometric error reports and the per-frame latency benchmark.

Photometric error is the per-pixel Euclidean distance in RGB (0-255 per
channel), averaged over pixels; a sequence is summarised by the mean and the
population standard deviation of its per-frame errors. The standard deviation
over frames is read as temporal shakiness.

Latency is wall time per frame for a streamed sequence, frame reading and
writing included, with torch pinned to one thread.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import tempfile
import time
from collections import deque
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import pandas as pd
import statsmodels.api as sm
import torch

import egofront.config as cfg
from egofront.conditioning import conditioning_track, sequence_camera
from egofront.data.frames import frame_path, frame_paths, read_frame, write_frame, write_frame_dir
from egofront.dataset import PairedSequence, apply_masks, denormalize, normalize, split_range
from egofront.errors import LengthMismatch, SequenceTooShort, ShapeMismatch
from egofront.inference import conditioning_mode, render_track, synthesize
from egofront.model import GeneratorConfig, ModelCheckpoint, VideoUNet, build_generator, generator_forward
from egofront.reporting import (
    plot_error_curve,
    write_frame_errors_csv,
    write_heatmap_png,
    write_summary_json,
)
from egofront.synthgen import generate_sequence

logger = logging.getLogger(__name__)


def per_pixel_error(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """RGB Euclidean distance per pixel; (..., H, W, 3) -> (..., H, W)."""
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"Prediction {pred.shape} and ground truth {gt.shape} differ in shape")
    if pred.shape[-1] != 3:
        raise ShapeMismatch(f"Expected RGB frames (..., 3), got {pred.shape}")
    diff = pred.astype(np.float64) - gt.astype(np.float64)
    return np.sqrt(np.sum(diff * diff, axis=-1))


def photometric_error(pred_frame: np.ndarray, gt_frame: np.ndarray) -> float:
    return float(per_pixel_error(pred_frame, gt_frame).mean())


@dataclasses.dataclass
class PhotometricReport:
    per_frame_error: np.ndarray
    mean: float
    std: float  # population std over frames
    heatmap: np.ndarray  # (H, W) mean per-pixel error
    meta: dict[str, Any] = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        self.per_frame_error = np.asarray(self.per_frame_error, dtype=float)
        if self.per_frame_error.ndim != 1 or len(self.per_frame_error) == 0:
            raise ValueError(f"PhotometricReport needs a non-empty 1-D error track, got {self.per_frame_error.shape}")

    @classmethod
    def from_errors(cls, per_frame_error: np.ndarray, heatmap: np.ndarray, meta: dict | None = None) -> "PhotometricReport":
        errors = np.asarray(per_frame_error, dtype=float)
        return cls(per_frame_error=errors, mean=float(errors.mean()), std=float(errors.std()), heatmap=heatmap, meta=meta or {})

    def summary(self) -> dict[str, Any]:
        return {
            "frames": int(len(self.per_frame_error)),
            "mean": self.mean,
            "std": self.std,
            "min": float(self.per_frame_error.min()),
            "max": float(self.per_frame_error.max()),
            "heatmap_colour_map": "linear grayscale, 0 -> black, 441.673 -> white",
            **self.meta,
        }


def sequence_report(
    pred_seq: np.ndarray,
    gt_seq: np.ndarray,
    *,
    out_dir: Path | None = None,
    per_frame_heatmaps: bool = False,
    plot_figures: bool = False,
    meta: dict[str, Any] | None = None,
) -> PhotometricReport:
    """Per-frame errors, their mean/std and the mean heat-map of a predicted sequence.

    With `out_dir`: writes frame_errors.csv, summary.json, heatmap.png, and
    optionally heatmaps/%06d.png and error_curve.png.
    """
    if len(pred_seq) != len(gt_seq):
        raise LengthMismatch(f"Predicted sequence has {len(pred_seq)} frames, ground truth {len(gt_seq)}")
    if len(pred_seq) == 0:
        raise SequenceTooShort("Cannot report on an empty sequence")

    errors = np.empty(len(pred_seq))
    heat_sum = None
    for i, (pred, gt) in enumerate(zip(pred_seq, gt_seq)):
        pixel = per_pixel_error(pred, gt)
        errors[i] = pixel.mean()
        heat_sum = pixel if heat_sum is None else heat_sum + pixel
        if out_dir is not None and per_frame_heatmaps:
            write_heatmap_png(pixel, frame_path(Path(out_dir) / "heatmaps", i))
    report = PhotometricReport.from_errors(errors, heat_sum / len(pred_seq), meta)
    logger.info("Photometric error over %d frames: mean %.4f, std %.4f", len(errors), report.mean, report.std)

    if out_dir is not None:
        out_dir = Path(out_dir)
        write_frame_errors_csv(report.per_frame_error, out_dir)
        write_summary_json(report.summary(), out_dir)
        write_heatmap_png(report.heatmap, out_dir / "heatmap.png")
        if plot_figures:
            plot_error_curve(report.per_frame_error, out_dir)
    return report


def split_report(
    seq: PairedSequence,
    model: ModelCheckpoint | VideoUNet,
    split: str = "test",
    *,
    mode: str | None = None,
    out_dir: Path | None = None,
    plot_figures: bool = False,
    device: str | torch.device = "cpu",
) -> PhotometricReport:
    """Synthesise one split of a sequence and report against its masked frontal frames.

    Masking and conditioning mode follow the checkpoint's training config.
    """
    train_config = model.train_config if isinstance(model, ModelCheckpoint) else {}
    data = apply_masks(seq, remove_ego_bg=train_config.get("remove_ego_bg", True))
    start, stop = split_range(data, split)
    mode = mode or train_config.get("conditioning", cfg.NEUTRAL_HEAD)
    cond = render_track(data.poses.iloc[start:stop], mode, data.resolution, sequence_camera(data))
    pred = synthesize(data.ego_frames[start:stop], cond, model, device=device)
    meta = {"split": split, "conditioning": mode}
    if isinstance(model, ModelCheckpoint):
        meta.update({"config_hash": model.config_hash, "generator_hash": model.generator_hash, "epoch": model.epoch})
    return sequence_report(pred, data.front_frames[start:stop], out_dir=out_dir, plot_figures=plot_figures, meta=meta)


def mean_frame_predictor(train_frames: np.ndarray, length: int) -> np.ndarray:
    """Constant baseline: the mean training frame repeated `length` times."""
    mean = np.rint(np.asarray(train_frames).mean(axis=0, dtype=np.float64)).astype(np.uint8)
    return np.broadcast_to(mean, (length,) + mean.shape).copy()


# Latency

def _prepare_inputs(
    work_dir: Path, resolution: int, frames: int, window_size: int, seed: int, mode: str
) -> tuple[Path, Path]:
    seq = generate_sequence(frames, "talking", seed, resolution=resolution, window_size=window_size)
    cond = conditioning_track(seq, mode)
    if cond is None:
        cond = np.zeros_like(seq.ego_frames)
    ego_dir, cond_dir = work_dir / "ego", work_dir / "cond"
    write_frame_dir(ego_dir, seq.ego_frames)
    write_frame_dir(cond_dir, cond)
    return ego_dir, cond_dir


def _stream(G: VideoUNet, ego_dir: Path, cond_dir: Path, out_dir: Path, device) -> int:
    """Read, translate and write one sequence frame by frame; returns frames written."""
    n = G.config.window_size
    ego_buf: deque[torch.Tensor] = deque(maxlen=n)
    cond_buf: deque[torch.Tensor] = deque(maxlen=n)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = 0
    with torch.no_grad():
        for t, (ego_path, cond_path) in enumerate(zip(frame_paths(ego_dir), frame_paths(cond_dir))):
            ego_buf.append(normalize(read_frame(ego_path)))
            cond_buf.append(normalize(read_frame(cond_path)))
            if len(ego_buf) < n:
                continue
            pred = denormalize(generator_forward(torch.stack(tuple(ego_buf)).to(device), torch.stack(tuple(cond_buf)).to(device), G))
            # first full window also fills the prefix
            emit = range(n) if t == n - 1 else (n - 1,)
            for k in emit:
                write_frame(frame_path(out_dir, t - (n - 1) + k), pred[k])
                written += 1
    return written


def benchmark_latency(
    model: ModelCheckpoint | VideoUNet,
    *,
    frames: int = cfg.BENCH_MIN_FRAMES,
    repeats: int = cfg.BENCH_REPEATS,
    sequences: int = cfg.BENCH_SEQUENCES,
    seed: int = 0,
    mode: str | None = None,
    device: str | torch.device = "cpu",
    work_dir: Path | None = None,
    budget_ms: float = cfg.REALTIME_BUDGET_MS,
) -> dict[str, Any]:
    """Per-frame wall time at the model's resolution, averaged over sequences x repeats.

    Input frames are synthesised to PNG first; the timed loop reads them,
    keeps the last N in a buffer, runs one window per frame and writes PNGs.
    Conditioning is rendered in `mode`, by default the checkpoint's training mode.
    """
    mode = conditioning_mode(model, mode)
    if frames < cfg.BENCH_MIN_FRAMES:
        raise SequenceTooShort(f"Latency needs at least {cfg.BENCH_MIN_FRAMES} frames per sequence, got {frames}")
    G = model.generator(device) if isinstance(model, ModelCheckpoint) else model.to(device).eval()
    resolution, n = G.config.resolution, G.config.window_size

    threads = torch.get_num_threads()
    torch.set_num_threads(1)
    runs = []
    try:
        with tempfile.TemporaryDirectory(dir=work_dir) as tmp:
            tmp = Path(tmp)
            for s in range(sequences):
                ego_dir, cond_dir = _prepare_inputs(tmp / f"seq{s}", resolution, frames, n, seed + s, mode)
                for r in range(repeats):
                    begin = time.perf_counter()
                    written = _stream(G, ego_dir, cond_dir, tmp / f"seq{s}" / f"out{r}", device)
                    elapsed = time.perf_counter() - begin
                    runs.append({"resolution": resolution, "sequence": s, "repeat": r, "ms_per_frame": 1000.0 * elapsed / written})
    finally:
        torch.set_num_threads(threads)

    ms = np.array([run["ms_per_frame"] for run in runs])
    result = {
        "resolution": resolution,
        "frames": frames,
        "conditioning": mode,
        "mean_ms": float(ms.mean()),
        "median_ms": float(np.median(ms)),
        "std_ms": float(ms.std()),
        "realtime": bool(ms.mean() <= budget_ms),
        "runs": runs,
    }
    logger.info(
        "Latency at %dpx: mean %.2f ms, median %.2f ms per frame (real time: %s)",
        resolution,
        result["mean_ms"],
        result["median_ms"],
        result["realtime"],
    )
    return result


def latency_table(
    checkpoint: ModelCheckpoint | None = None,
    *,
    resolutions: Sequence[int] = cfg.BENCH_RESOLUTIONS,
    window_size: int = cfg.WINDOW_SIZE,
    width_divisor: int = 1,
    **kwargs,
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """(one row per resolution, one row per timed run).

    A checkpoint is used at its own resolution; other resolutions time a
    freshly initialised generator of the same shape family.
    """
    if checkpoint is not None:
        window_size = checkpoint.window_size
        kwargs["mode"] = conditioning_mode(checkpoint, kwargs.get("mode"))
    rows, runs = [], []
    for res in resolutions:
        if checkpoint is not None and checkpoint.generator_config.resolution == res:
            model: ModelCheckpoint | VideoUNet = checkpoint
        else:
            model = build_generator(GeneratorConfig.for_resolution(res, window_size, width_divisor), kwargs.get("seed", 0))
        result = benchmark_latency(model, **kwargs)
        runs.extend(result.pop("runs"))
        rows.append(result)
    return pd.DataFrame(rows), pd.DataFrame(runs)


def fit_latency_model(runs: pd.DataFrame) -> "sm.regression.linear_model.RegressionResultsWrapper":
    """OLS of ms per frame on image megapixels, with intercept."""
    required_cols = {"resolution", "ms_per_frame"}
    missing = required_cols - set(runs.columns)
    if missing:
        raise ValueError(f"runs missing required columns: {missing}")
    X = pd.DataFrame({"megapixels": runs["resolution"].astype(float) ** 2 / 1e6})
    X = sm.add_constant(X, has_constant="add")
    return sm.OLS(runs["ms_per_frame"].astype(float), X).fit()


def realtime_resolution_limit(
    model: "sm.regression.linear_model.RegressionResultsWrapper",
    budget_ms: float = cfg.REALTIME_BUDGET_MS,
) -> int | None:
    """Largest square side predicted to run within `budget_ms`; None if unbounded."""
    intercept, slope = float(model.params["const"]), float(model.params["megapixels"])
    if intercept > budget_ms:
        return 0
    if slope <= 0.0:
        return None
    return int(math.floor(math.sqrt((budget_ms - intercept) / slope * 1e6)))
