"""Command-line entry point: one subcommand per pipeline stage.

Examples:
  # Synthetic 64px dataset with a 1500/300/300 split
  egofront synth-data --out data --length 2100 --splits 1500,1800

  # Raw (unsynchronised) capture, then align and crop it
  egofront synth-data --out raw --length 600 --lag 7 --flash-frame 5
  egofront prepare --seq raw/seq000 --sync --out data/seq000

  # Train, synthesise the test split, score it
  egofront train --data data/seq000 --config configs/smoke.ini --out runs/train
  egofront infer --ckpt runs/train --ego data/seq000 --cond gt --out runs/infer
  egofront eval --pred runs/infer/frames --gt data/seq000/front --gt-masks data/seq000/masks/front

Exit codes: 0 success, 2 usage error, 3 data error, 4 runtime failure.
Every command writes run_manifest.json into its output directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

import egofront.config as cfg
import egofront.reporting as rpt
from egofront.camera import FrontalCamera
from egofront.conditioning import conditioning_track, sequence_camera, static_pose_track
from egofront.data.frames import read_frame_dir, read_mask, read_mask_dir
from egofront.data.layout import (
    MANIFEST,
    load_conditioning_cache,
    load_sequence,
    read_poses,
    save_conditioning_cache,
    save_sequence,
    write_json,
)
from egofront.dataset import crop_sequence, split_range
from egofront.errors import DataError, RuntimeFailure, UsageError
from egofront.evaluation import (
    fit_latency_model,
    latency_table,
    realtime_resolution_limit,
    sequence_report,
    split_report,
)
from egofront.inference import reenact, render_track, synthesize, synthesize_with_resampled_pose, write_outputs
from egofront.model import ModelCheckpoint
from egofront.run_config import data_root, default_device, write_run_manifest
from egofront.sync import align, synchronize_sequence
from egofront.synthgen import SCRIPTS, SynthConfig, generate_sequence, simulate_capture
from egofront.trainer import TrainConfig, ablate, load_checkpoint, train

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4

RUNS_DIR = Path("runs")


# Argument helpers

def _ints(text: str, count: int, what: str) -> tuple[int, ...]:
    parts = [p.strip() for p in text.split(",")]
    try:
        values = tuple(int(p) for p in parts)
    except ValueError:
        raise UsageError(f"{what} must be {count} comma-separated integers, got '{text}'")
    if len(values) != count:
        raise UsageError(f"{what} must be {count} comma-separated integers, got '{text}'")
    return values


def _out_dir(args: argparse.Namespace) -> Path:
    return Path(args.out) if args.out else RUNS_DIR / args.command


def _train_config(args: argparse.Namespace) -> TrainConfig:
    config = TrainConfig.from_ini(args.config, args.set)
    return dataclasses.replace(config, device=default_device(args.device, config.device))


def _load_checkpoint(args: argparse.Namespace) -> ModelCheckpoint:
    """Checkpoint of --ckpt, hash-checked against --config when given, else against its stored configuration."""
    config = TrainConfig.from_ini(args.config, args.set) if args.config else None
    return load_checkpoint(args.ckpt, config)


def _print_written(paths: Sequence[Path]) -> None:
    for p in paths:
        print(f"Wrote: {p}")


def parse_cond(text: str) -> tuple[str, int | None]:
    """'gt' | 'none' | 'reenact' | 'resample:<start>' | 'static:<frame>' -> (kind, argument)."""
    kind, sep, value = text.partition(":")
    if kind in ("gt", "none", "reenact") and not sep:
        return kind, None
    if kind in ("resample", "static") and sep:
        try:
            return kind, int(value)
        except ValueError:
            pass
    raise UsageError(f"--cond must be gt, none, reenact, resample:<start> or static:<frame>, got '{text}'")


# Commands

def cmd_synth_data(args: argparse.Namespace) -> list[Path]:
    root = Path(args.out) if args.out else data_root(RUNS_DIR / args.command)
    synth = SynthConfig(occlusion=args.occlusion, background=args.background, mount_jitter=args.mount_jitter)
    splits = _ints(args.splits, 2, "--splits") if args.splits else None
    raw = args.lag is not None
    seq = generate_sequence(
        args.length,
        args.script,
        args.seed,
        resolution=args.resolution,
        window_size=args.window_size,
        synth=synth,
        splits=splits,
        root=None if raw else root,
        name=args.name,
        workers=args.workers,
    )
    seq_dir = root / args.name
    if raw:
        seq = simulate_capture(seq, args.lag, args.flash_frame)
        save_sequence(seq, seq_dir)
    outputs = [seq_dir / MANIFEST]
    manifest = write_run_manifest(root, args.command, vars(args), seed=args.seed, outputs=outputs)
    return outputs + [manifest]


def cmd_sync(args: argparse.Namespace) -> list[Path]:
    out = _out_dir(args)
    offset = align(read_frame_dir(args.a), read_frame_dir(args.b), args.threshold)
    print(f"offset_frames={offset.offset_frames} confidence={offset.confidence:.3f}")
    path = write_json(out / "sync.json", dataclasses.asdict(offset))
    manifest = write_run_manifest(out, args.command, vars(args), inputs=[Path(args.a), Path(args.b)], outputs=[path])
    return [path, manifest]


def cmd_prepare(args: argparse.Namespace) -> list[Path]:
    out = _out_dir(args)
    seq = load_sequence(args.seq)
    if args.sync:
        seq, offset = synchronize_sequence(seq, args.threshold)
        print(f"offset_frames={offset.offset_frames} confidence={offset.confidence:.3f}")
    if args.crop_ego or args.crop_front:
        if not (args.crop_ego and args.crop_front):
            raise UsageError("--crop-ego and --crop-front must be given together")
        seq = crop_sequence(
            seq, _ints(args.crop_ego, 4, "--crop-ego"), _ints(args.crop_front, 4, "--crop-front"), args.crop_res
        )
    track = None
    if args.cache_cond:
        track = conditioning_track(seq, args.cache_cond)
        seq.meta["conditioning_cache"] = args.cache_cond
    outputs = [save_sequence(seq, out)]
    if track is not None:
        outputs.append(save_conditioning_cache(out, track))
    manifest = write_run_manifest(out, args.command, vars(args), inputs=[Path(args.seq)], outputs=outputs)
    return outputs + [manifest]


def cmd_train(args: argparse.Namespace) -> list[Path]:
    out = _out_dir(args)
    config = _train_config(args)
    seq = load_sequence(args.data, require_masks=True)
    cached = None
    if seq.meta.get("conditioning_cache") == config.conditioning:
        cached = load_conditioning_cache(args.data)
    ckpt = train(seq, config, out_dir=out, conditioning=cached, progress=not args.no_progress)
    print(f"Selected epoch {ckpt.epoch} (validation objective {ckpt.val_score:.6f})")
    outputs = [out / "checkpoint.json", out / "train_log.csv"]
    outputs += rpt.plot_run_figures(out, train_log=pd.DataFrame(ckpt.history), plot_figures=args.plot_figures)
    manifest = write_run_manifest(
        out, args.command, vars(args), config_hash=config.config_hash(), seed=config.seed, inputs=[Path(args.data)], outputs=outputs
    )
    return outputs + [manifest]


def cmd_ablate(args: argparse.Namespace) -> list[Path]:
    out = _out_dir(args)
    config = _train_config(args)
    seq = load_sequence(args.data, require_masks=True)
    modes = list(cfg.ABLATION_MODES) if args.mode == "all" else [args.mode]

    runs = []
    if args.baseline:
        tag = f"full-{config.config_hash()[:8]}"
        runs.append(("full", tag, train(seq, config, out_dir=out / tag, progress=not args.no_progress)))
    for mode in modes:
        ckpt, tag = ablate(seq, config, mode, out_dir=out, progress=not args.no_progress)
        runs.append((mode, tag, ckpt))

    rows = []
    for mode, tag, ckpt in runs:
        report = split_report(seq, ckpt, "test", out_dir=out / tag / "test", device=config.device)
        rows.append(
            {
                "mode": mode,
                "tag": tag,
                "epoch": ckpt.epoch,
                "val_score": ckpt.val_score,
                "test_mean": report.mean,
                "test_std": report.std,
            }
        )
    table = pd.DataFrame(rows)
    print(table.to_string(index=False))
    outputs = [rpt.write_ablation_csv(table, out)]
    manifest = write_run_manifest(
        out, args.command, vars(args), config_hash=config.config_hash(), seed=config.seed, inputs=[Path(args.data)], outputs=outputs
    )
    return outputs + [manifest]


def _inference_inputs(args: argparse.Namespace, ckpt: ModelCheckpoint):
    """(ego frames, ground-truth poses, training poses, frontal camera) from a sequence or a frame directory."""
    ego_path = Path(args.ego)
    remove_bg = ckpt.train_config.get("remove_ego_bg", True)
    if (ego_path / MANIFEST).exists() or (ego_path / "ego").is_dir():
        seq = load_sequence(ego_path)
        ego = seq.ego_frames
        if remove_bg and seq.ego_mask is not None:
            ego = ego * (seq.ego_mask[None, ..., None] > 0)
        start, stop = split_range(seq, "train")
        train_poses = seq.poses.iloc[start:stop] if stop > start else seq.poses
        return ego.astype(np.uint8), seq.poses, train_poses, sequence_camera(seq)

    ego = read_frame_dir(ego_path)
    if args.ego_mask:
        ego = (ego * (read_mask(args.ego_mask)[None, ..., None] > 0)).astype(np.uint8)
    poses = read_poses(args.poses) if args.poses else None
    train_poses = read_poses(args.train_poses) if args.train_poses else poses
    return ego, poses, train_poses, FrontalCamera.for_resolution(ego.shape[1])


def cmd_infer(args: argparse.Namespace) -> list[Path]:
    out = _out_dir(args)
    kind, value = parse_cond(args.cond)
    ckpt = _load_checkpoint(args)
    ego, poses, train_poses, camera = _inference_inputs(args, ckpt)
    mode = ckpt.train_config.get("conditioning", cfg.NEUTRAL_HEAD)
    device = default_device(args.device)
    if kind in ("resample", "static", "reenact") and train_poses is None:
        raise UsageError(f"--cond {args.cond} needs training poses (--train-poses or a sequence directory)")

    common = {"select": args.select, "device": device}
    if kind == "gt":
        if poses is None:
            raise UsageError("--cond gt needs ground-truth poses (--poses or a sequence directory)")
        frames = synthesize(ego, render_track(poses, mode, ego.shape[1], camera), ckpt, window_size=args.window_size, **common)
    elif kind == "none":
        frames = synthesize(ego, None, ckpt, window_size=args.window_size, **common)
    elif kind == "static":
        track = static_pose_track(train_poses, value, len(ego))
        frames = synthesize(ego, render_track(track, mode, ego.shape[1], camera), ckpt, window_size=args.window_size, **common)
    elif kind == "resample":
        frames = synthesize_with_resampled_pose(ego, train_poses, value, ckpt, camera=camera, **common)
    else:
        frames, start = reenact(ego, train_poses, ckpt, seed=args.seed, camera=camera, **common)
        print(f"Reenactment from training pose {start}")

    frame_dir = write_outputs(frames, out)
    manifest = write_run_manifest(
        out,
        args.command,
        vars(args),
        config_hash=ckpt.config_hash,
        seed=args.seed,
        inputs=[Path(args.ckpt), Path(args.ego)],
        outputs=[frame_dir],
    )
    return [frame_dir, manifest]


def cmd_eval(args: argparse.Namespace) -> list[Path]:
    out = _out_dir(args)
    pred = read_frame_dir(args.pred)
    gt = read_frame_dir(args.gt)
    if args.gt_masks:
        masks = read_mask_dir(args.gt_masks)
        gt = (gt * (masks[..., None] > 0)).astype(np.uint8)
    if args.skip:
        pred, gt = pred[args.skip :], gt[args.skip :]
    report = sequence_report(
        pred, gt, out_dir=out, per_frame_heatmaps=args.per_frame_heatmaps, plot_figures=args.plot_figures
    )
    print(f"mean={report.mean:.4f} std={report.std:.4f} frames={len(report.per_frame_error)}")
    outputs = [out / "frame_errors.csv", out / "summary.json", out / "heatmap.png"]
    inputs = [Path(args.pred), Path(args.gt)] + ([Path(args.gt_masks)] if args.gt_masks else [])
    manifest = write_run_manifest(out, args.command, vars(args), inputs=inputs, outputs=outputs)
    return outputs + [manifest]


def cmd_bench(args: argparse.Namespace) -> list[Path]:
    out = _out_dir(args)
    ckpt = _load_checkpoint(args) if args.ckpt else None
    latency, runs = latency_table(
        ckpt,
        resolutions=args.resolutions,
        window_size=args.window_size,
        width_divisor=args.width_divisor,
        frames=args.frames,
        repeats=args.repeats,
        sequences=args.sequences,
        seed=args.seed,
        device=default_device(args.device),
        work_dir=args.work_dir,
    )
    print(latency.to_string(index=False))
    outputs = rpt.write_latency_tables(latency, runs, out)
    summary = {"budget_ms": cfg.REALTIME_BUDGET_MS, "rows": latency.to_dict(orient="records")}
    if runs["resolution"].nunique() > 1:
        model = fit_latency_model(runs)
        summary.update(
            {
                "ms_intercept": float(model.params["const"]),
                "ms_per_megapixel": float(model.params["megapixels"]),
                "realtime_resolution_limit": realtime_resolution_limit(model),
            }
        )
    outputs.append(rpt.write_summary_json(summary, out))
    outputs += rpt.plot_run_figures(out, latency=latency, plot_figures=args.plot_figures)
    inputs = [Path(args.ckpt)] if args.ckpt else []
    manifest = write_run_manifest(out, args.command, vars(args), seed=args.seed, inputs=inputs, outputs=outputs)
    return outputs + [manifest]


COMMANDS = {
    "synth-data": cmd_synth_data,
    "sync": cmd_sync,
    "prepare": cmd_prepare,
    "train": cmd_train,
    "ablate": cmd_ablate,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


# Command Line Interface

def _add_train_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="Sequence directory (ego/, front/, masks/, poses.csv).")
    p.add_argument("--config", type=Path, default=None, help="INI run configuration (see configs/).")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Override one config key; repeatable.")
    p.add_argument("--device", default=None, help=f"Torch device (default: ${cfg.ENV_DEVICE} or the config value).")
    p.add_argument("--no-progress", action="store_true", help="Disable the per-epoch progress bar.")


def _add_checkpoint_config(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="INI configuration the checkpoint must have been trained with.")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Override one config key; repeatable.")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="egofront", description="Egocentric-to-frontal face video translation.")
    p.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth-data", help="Render a synthetic paired sequence.")
    s.add_argument("--out", default=None, help=f"Dataset root (default: ${cfg.ENV_DATA_ROOT} or runs/synth-data).")
    s.add_argument("--name", default="seq000", help="Sequence directory name under the root.")
    s.add_argument("--length", type=int, default=600, help="Number of frames.")
    s.add_argument("--resolution", type=int, default=64, choices=cfg.SUPPORTED_RESOLUTIONS)
    s.add_argument("--window-size", type=int, default=cfg.WINDOW_SIZE, help="Minimum length check (N).")
    s.add_argument("--script", default="talking", choices=sorted(SCRIPTS), help="Expression/pose script.")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--splits", default=None, help="train_end,val_end (default: 7500,10000 or 70/15/15).")
    s.add_argument("--occlusion", type=float, default=cfg.EGO_OCCLUSION, help="Face-width share cut off the ego view.")
    s.add_argument("--background", default="black", choices=cfg.BACKGROUNDS)
    s.add_argument("--mount-jitter", type=float, default=0.0, help="Per-frame camera mount jitter (radians).")
    s.add_argument("--lag", type=int, default=None, help="Write an unsynchronised capture with the frontal stream delayed.")
    s.add_argument("--flash-frame", type=int, default=5, help="Ego frame index of the white sync frame (with --lag).")
    s.add_argument("--workers", type=int, default=1, help="Render threads.")

    s = sub.add_parser("sync", help="Estimate the frame offset between two recordings.")
    s.add_argument("--a", required=True, help="Frame directory of the first stream.")
    s.add_argument("--b", required=True, help="Frame directory of the second stream.")
    s.add_argument("--threshold", type=float, default=cfg.SYNC_THRESHOLD)
    s.add_argument("--out", default=None)

    s = sub.add_parser("prepare", help="Synchronise, crop and cache conditioning for a sequence.")
    s.add_argument("--seq", required=True, help="Input sequence directory.")
    s.add_argument("--out", default=None, help="Output sequence directory.")
    s.add_argument("--sync", action="store_true", help="Align on the shared white frame and drop frames up to it.")
    s.add_argument("--threshold", type=float, default=cfg.SYNC_THRESHOLD)
    s.add_argument("--crop-ego", default=None, help="left,top,right,bottom")
    s.add_argument("--crop-front", default=None, help="left,top,right,bottom")
    s.add_argument("--crop-res", type=int, default=256)
    s.add_argument("--cache-cond", default=None, choices=[m for m in cfg.CONDITIONING_MODES if m != cfg.NO_CONDITIONING])

    s = sub.add_parser("train", help="Train generator and discriminator; keep the best-validating epoch.")
    _add_train_options(s)
    s.add_argument("--out", default=None, help="Checkpoint directory.")
    s.add_argument("--plot-figures", action="store_true", help="Save train_curves.png.")

    s = sub.add_parser("ablate", help="Train ablated variants and score them on the test split.")
    _add_train_options(s)
    s.add_argument("--mode", required=True, choices=list(cfg.ABLATION_MODES) + ["all"])
    s.add_argument("--baseline", action="store_true", help="Also train the unablated configuration.")
    s.add_argument("--out", default=None)

    s = sub.add_parser("infer", help="Synthesise frontal frames from egocentric frames.")
    s.add_argument("--ckpt", required=True, help="Checkpoint directory.")
    _add_checkpoint_config(s)
    s.add_argument("--ego", required=True, help="Sequence directory or egocentric frame directory.")
    s.add_argument("--cond", default="gt", help="gt | none | reenact | resample:<start> | static:<frame>")
    s.add_argument("--select", default=cfg.SELECT_LAST, choices=[cfg.SELECT_LAST, cfg.SELECT_MIDDLE])
    s.add_argument("--window-size", type=int, default=None, help="Runtime N; must match the checkpoint.")
    s.add_argument("--poses", default=None, help="poses.csv for --cond gt with a frame directory.")
    s.add_argument("--train-poses", default=None, help="poses.csv of the training frames.")
    s.add_argument("--ego-mask", default=None, help="Egocentric mask PNG for a frame directory.")
    s.add_argument("--seed", type=int, default=0, help="Seed for --cond reenact.")
    s.add_argument("--device", default=None)
    s.add_argument("--out", default=None)

    s = sub.add_parser("eval", help="Photometric error of predicted against ground-truth frames.")
    s.add_argument("--pred", required=True, help="Predicted frame directory.")
    s.add_argument("--gt", required=True, help="Ground-truth frame directory.")
    s.add_argument("--gt-masks", default=None, help="Mask directory applied to the ground truth.")
    s.add_argument("--skip", type=int, default=0, help="Ignore the first frames of both sequences.")
    s.add_argument("--per-frame-heatmaps", action="store_true")
    s.add_argument("--plot-figures", action="store_true", help="Save error_curve.png.")
    s.add_argument("--out", default=None)

    s = sub.add_parser("bench", help="Per-frame latency including frame read/write.")
    s.add_argument("--ckpt", default=None, help="Checkpoint to time at its own resolution.")
    _add_checkpoint_config(s)
    s.add_argument("--resolutions", type=int, nargs="+", default=list(cfg.BENCH_RESOLUTIONS))
    s.add_argument("--window-size", type=int, default=cfg.WINDOW_SIZE)
    s.add_argument("--width-divisor", type=int, default=1)
    s.add_argument("--frames", type=int, default=cfg.BENCH_MIN_FRAMES)
    s.add_argument("--repeats", type=int, default=cfg.BENCH_REPEATS)
    s.add_argument("--sequences", type=int, default=cfg.BENCH_SEQUENCES)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--device", default=None)
    s.add_argument("--work-dir", default=None, help="Parent of the temporary frame directory.")
    s.add_argument("--plot-figures", action="store_true", help="Save latency.png.")
    s.add_argument("--out", default=None)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    logging.basicConfig(level=getattr(logging, args.log_level), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        _print_written(COMMANDS[args.command](args))
    except UsageError as exc:
        print(f"error[usage]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, KeyError) as exc:
        print(f"error[data]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error[usage]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RuntimeFailure as exc:
        print(f"error[runtime]: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except RuntimeError as exc:
        logger.exception("Unhandled runtime error in %s", args.command)
        print(f"error[runtime]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
