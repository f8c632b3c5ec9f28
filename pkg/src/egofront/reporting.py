"""Outputs to answer:
- How did training and validation losses evolve, and which epoch was kept?
- How large is the photometric error per frame, and how shaky is it over time?
- Where in the frame does the error concentrate (heat-map)?
- How long does one frame take at each resolution, and is that real time?
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd
from matplotlib import pyplot as plt
from PIL import Image

import egofront.config as cfg


def write_train_log(train_log: pd.DataFrame, out_dir: Path) -> Path:
    """Write the per-epoch training log (epoch 0 = untrained initialisation)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    required_cols = {"epoch", "loss_D", "loss_G", "val_score", "val_content"}
    missing = required_cols - set(train_log.columns)
    if missing:
        raise ValueError(f"train_log missing required columns: {missing}")
    out_path = out_dir / "train_log.csv"
    train_log[["epoch", "loss_D", "loss_G", "val_score", "val_content"]].to_csv(out_path, index=False)
    return out_path


def write_frame_errors_csv(per_frame_error: np.ndarray, out_dir: Path) -> Path:
    """Write frame,error."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame({"frame": np.arange(len(per_frame_error)), "error": np.asarray(per_frame_error, dtype=float)})
    out_path = out_dir / "frame_errors.csv"
    df.to_csv(out_path, index=False)
    return out_path


def write_summary_json(summary: dict, out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "summary.json"
    out_path.write_text(json.dumps(summary, indent=2, sort_keys=True))
    return out_path


def heatmap_image(heatmap: np.ndarray, scale: float = cfg.MAX_PHOTOMETRIC_ERROR) -> np.ndarray:
    """Linear grayscale: 0 -> black, `scale` (the largest possible RGB distance) -> white."""
    return np.clip(np.rint(np.asarray(heatmap, dtype=float) / scale * 255.0), 0, 255).astype(np.uint8)


def write_heatmap_png(heatmap: np.ndarray, out_path: Path) -> Path:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(heatmap_image(heatmap)).save(out_path)
    return out_path


def write_latency_csv(latency_table: pd.DataFrame, out_dir: Path) -> Path:
    """Write one row per resolution: mean/median/std ms per frame and real-time status."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "latency.csv"
    latency_table.to_csv(out_path, index=False)
    return out_path


def write_ablation_csv(ablation_table: pd.DataFrame, out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "ablations.csv"
    ablation_table.to_csv(out_path, index=False)
    return out_path


# Error over time
def plot_error_curve(per_frame_error: np.ndarray, out_dir: Path) -> Path:
    """Plot per-frame photometric error with the sequence mean"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "error_curve.png"
    errors = np.asarray(per_frame_error, dtype=float)
    fig, ax = plt.subplots()
    ax.plot(np.arange(len(errors)), errors, linewidth=1, label="per-frame error")
    ax.axhline(y=errors.mean(), color="black", alpha=0.5, linestyle="--", label=f"mean ({errors.mean():.2f})")
    ax.set_title("Photometric error per frame")
    ax.set_xlabel("frame")
    ax.set_ylabel("RGB distance (0-255)")
    ax.legend(loc="best", fontsize="small")

    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


# Training progress
def plot_train_log(train_log: pd.DataFrame, out_dir: Path) -> Path:
    """Plot losses and validation score per epoch"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "train_curves.png"
    df = train_log.sort_values("epoch")
    fig, ax = plt.subplots()
    for col, style in (("loss_D", "-"), ("loss_G", "-"), ("val_score", "--")):
        sub = df[["epoch", col]].dropna()
        ax.plot(sub["epoch"], sub[col], linestyle=style, linewidth=1, label=col)
    ax.set_title("Training losses and validation objective")
    ax.set_xlabel("epoch")
    ax.legend(loc="best", fontsize="small")

    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


# Resolution vs latency
def plot_latency(latency_table: pd.DataFrame, out_dir: Path, budget_ms: float = cfg.REALTIME_BUDGET_MS) -> Path:
    """Plot mean ms per frame by resolution against the real-time budget"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "latency.png"
    required_cols = {"resolution", "mean_ms", "std_ms"}
    missing = required_cols - set(latency_table.columns)
    if missing:
        raise ValueError(f"latency_table missing required columns: {missing}")
    df = latency_table.sort_values("resolution")
    fig, ax = plt.subplots()
    ax.bar(df["resolution"].astype(str), df["mean_ms"], yerr=df["std_ms"])
    plt.axhline(y=budget_ms, color="black", linestyle="--", label=f"real-time budget ({budget_ms:g} ms)")
    ax.set_title("Per-frame latency incl. frame read/write")
    ax.set_xlabel("resolution (px)")
    ax.set_ylabel("ms per frame")
    ax.legend(loc="best", fontsize="small")

    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def write_latency_tables(
    latency: pd.DataFrame,
    runs: pd.DataFrame,
    out_dir: Path,
    write_results: bool = True,
) -> list[Path]:
    """
    Write the latency summary and the per-run timings.

    Parameters
    ----------
    latency : pd.DataFrame
        One row per resolution (mean_ms, median_ms, std_ms, realtime).
    runs : pd.DataFrame
        One row per timed run (resolution, sequence, repeat, ms_per_frame).
    out_dir : Path
        Output directory.
    write_results : bool, default True
        If False, do nothing and return [].

    Returns
    -------
    list[Path]
        Paths written.
    """
    if not write_results:
        return []
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [write_latency_csv(latency, out_dir)]
    runs_path = out_dir / "latency_runs.csv"
    runs.to_csv(runs_path, index=False)
    paths.append(runs_path)
    return paths


def plot_run_figures(
    out_dir: Path,
    *,
    train_log: pd.DataFrame | None = None,
    per_frame_error: np.ndarray | None = None,
    latency: pd.DataFrame | None = None,
    plot_figures: bool = True,
) -> list[Path]:
    """
    Save whichever figures the given results support.

    Parameters
    ----------
    out_dir : Path
        Output directory.
    train_log : pd.DataFrame, optional
        Per-epoch log; gives train_curves.png.
    per_frame_error : np.ndarray, optional
        Per-frame photometric errors; gives error_curve.png.
    latency : pd.DataFrame, optional
        Latency summary; gives latency.png.
    plot_figures : bool, default True
        If False, do nothing and return [].

    Returns
    -------
    list[Path]
        Paths written.
    """
    if not plot_figures:
        return []
    paths: list[Path] = []
    if train_log is not None:
        paths.append(plot_train_log(train_log, out_dir))
    if per_frame_error is not None:
        paths.append(plot_error_curve(per_frame_error, out_dir))
    if latency is not None:
        paths.append(plot_latency(latency, out_dir))
    return paths
