"""Long-running desk-scale checks that do not fit in unit-test time.

- learning: 64px, N=5, 1500/300/300 frames, 20 epochs. The trained model's
  test error must be below half the untrained model's and below the
  mean-training-frame predictor.
- ablation: multi-pose sequences, three seeds. Without pose conditioning the
  test-error std over frames should exceed the full model's for the majority.
- latency: per-frame time at 128 and 256 with frame read/write included;
  t(128) <= t(256) is asserted, the 40 ms budget is only reported.

Examples:
  python3 scripts/run_acceptance.py --check learning
  python3 scripts/run_acceptance.py --check all --out outputs/acceptance --device cuda
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
from pathlib import Path

import egofront.config as cfg
import egofront.reporting as rpt
from egofront.dataset import apply_masks, split_range
from egofront.evaluation import latency_table, mean_frame_predictor, sequence_report, split_report
from egofront.model import build_generator
from egofront.synthgen import generate_sequence
from egofront.trainer import TrainConfig, ablation_config, train

REPO_ROOT = Path(__file__).resolve().parents[1]
OUTPUT_DIR = REPO_ROOT / "outputs" / "acceptance"

DESK_CONFIG = TrainConfig(resolution=64, window_size=5, epochs=20, batch_size=12, width_divisor=4, disc_depth=3)
DESK_SPLITS = (1500, 1800)
DESK_LENGTH = 2100


def check_learning(config: TrainConfig, out_dir: Path, seed: int = 0) -> dict:
    seq = generate_sequence(DESK_LENGTH, "talking", seed, resolution=config.resolution, window_size=config.window_size, splits=DESK_SPLITS)
    ckpt = train(seq, config, out_dir=out_dir / "learning")
    trained = split_report(seq, ckpt, device=config.device)
    untrained = split_report(
        seq, build_generator(ckpt.generator_config, config.seed), mode=config.conditioning, device=config.device
    )

    data = apply_masks(seq, remove_ego_bg=config.remove_ego_bg)
    start, stop = split_range(data, "test")
    train_start, train_stop = split_range(data, "train")
    baseline = sequence_report(mean_frame_predictor(data.front_frames[train_start:train_stop], stop - start), data.front_frames[start:stop])

    return {
        "trained_mean": trained.mean,
        "untrained_mean": untrained.mean,
        "mean_frame_mean": baseline.mean,
        "below_half_untrained": trained.mean < 0.5 * untrained.mean,
        "below_mean_frame": trained.mean < baseline.mean,
        "passed": trained.mean < 0.5 * untrained.mean and trained.mean < baseline.mean,
    }


def check_ablation(config: TrainConfig, out_dir: Path, seeds: tuple[int, ...] = (0, 1, 2)) -> dict:
    votes = []
    for seed in seeds:
        seq = generate_sequence(
            DESK_LENGTH, "multi_pose", seed, resolution=config.resolution, window_size=config.window_size, splits=DESK_SPLITS
        )
        full_config = dataclasses.replace(config, seed=seed)
        full = split_report(seq, train(seq, full_config, out_dir=out_dir / f"full-{seed}"), device=config.device)
        ablated_config = ablation_config(full_config, "no_pose_cond", DESK_SPLITS[0])
        ablated = split_report(seq, train(seq, ablated_config, out_dir=out_dir / f"no_pose_cond-{seed}"), device=config.device)
        votes.append({"seed": seed, "full_std": full.std, "no_pose_cond_std": ablated.std, "agrees": ablated.std > full.std})
    agree = sum(v["agrees"] for v in votes)
    return {"runs": votes, "agreeing": agree, "passed": agree > len(seeds) // 2}


def check_latency(config: TrainConfig, out_dir: Path) -> dict:
    latency, runs = latency_table(
        resolutions=cfg.BENCH_RESOLUTIONS, window_size=cfg.WINDOW_SIZE, device=config.device, seed=config.seed
    )
    rpt.write_latency_tables(latency, runs, out_dir / "latency")
    by_res = latency.set_index("resolution")["mean_ms"]
    low, high = min(cfg.BENCH_RESOLUTIONS), max(cfg.BENCH_RESOLUTIONS)
    return {
        "mean_ms": {int(r): float(v) for r, v in by_res.items()},
        "realtime": {int(r): bool(v) for r, v in latency.set_index("resolution")["realtime"].items()},
        "passed": bool(by_res[low] <= by_res[high]),
    }


CHECKS = {"learning": check_learning, "ablation": check_ablation, "latency": check_latency}


def parse_args() -> argparse.Namespace:
    p = argparse.ArgumentParser(description="Run the desk-scale acceptance checks.")
    p.add_argument("--check", default="all", choices=sorted(CHECKS) + ["all"])
    p.add_argument("--out", type=Path, default=OUTPUT_DIR)
    p.add_argument("--epochs", type=int, default=DESK_CONFIG.epochs)
    p.add_argument("--device", default="cpu")
    return p.parse_args()


def main() -> None:
    args = parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    config = dataclasses.replace(DESK_CONFIG, epochs=args.epochs, device=args.device)
    names = sorted(CHECKS) if args.check == "all" else [args.check]

    results = {}
    for name in names:
        results[name] = CHECKS[name](config, args.out)
        print(f"{name}: {'PASS' if results[name]['passed'] else 'FAIL'} {results[name]}")
    out_path = rpt.write_summary_json(results, args.out)
    print(f"Wrote: {out_path}")
    if not all(r["passed"] for r in results.values()):
        raise SystemExit(1)


if __name__ == "__main__":
    main()
