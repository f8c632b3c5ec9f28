"""Command-line entry point for the egofront pipeline.

This script is intentionally a thin orchestrator around `egofront.cli`:
- Renders a synthetic paired sequence
- Trains a generator/discriminator pair on it
- Synthesises the test split and scores it
- Optionally times the sliding-window loop

Examples:
  # Desk-scale smoke run (64px, 2 epochs)
  python3 scripts/run_pipeline.py --config configs/smoke.ini

  # Same run plus figures and the latency table
  python3 scripts/run_pipeline.py --config configs/smoke.ini --plot-figures --bench
"""

from __future__ import annotations

import argparse
from pathlib import Path

from egofront.cli import main as cli_main
from egofront.trainer import TrainConfig

REPO_ROOT = Path(__file__).resolve().parents[1]
OUTPUT_DIR = REPO_ROOT / "outputs"


def parse_args() -> argparse.Namespace:
    p = argparse.ArgumentParser(description="Run synth-data -> train -> infer -> eval (and optionally bench).")
    p.add_argument("--config", type=Path, default=REPO_ROOT / "configs" / "smoke.ini", help="INI run configuration.")
    p.add_argument("--length", type=int, default=300, help="Frames in the synthetic sequence.")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=OUTPUT_DIR, help="Root for data/ and runs/.")
    p.add_argument("--plot-figures", action="store_true", help="Save training and error figures.")
    p.add_argument("--bench", action="store_true", help="Also run the latency benchmark.")
    return p.parse_args()


def main() -> None:
    args = parse_args()
    config = TrainConfig.from_ini(args.config)
    data, runs = args.out / "data", args.out / "runs"
    seq_dir = data / "seq000"
    figures = ["--plot-figures"] if args.plot_figures else []

    steps = [
        ["synth-data", "--out", str(data), "--length", str(args.length), "--resolution", str(config.resolution),
         "--window-size", str(config.window_size), "--seed", str(args.seed)],
        ["train", "--data", str(seq_dir), "--config", str(args.config), "--out", str(runs / "train"), *figures],
        ["infer", "--ckpt", str(runs / "train"), "--ego", str(seq_dir), "--cond", "gt", "--out", str(runs / "infer")],
        ["eval", "--pred", str(runs / "infer" / "frames"), "--gt", str(seq_dir / "front"),
         "--gt-masks", str(seq_dir / "masks" / "front"), "--out", str(runs / "eval"), *figures],
    ]
    if args.bench:
        steps.append(["bench", "--window-size", str(config.window_size), "--width-divisor", str(config.width_divisor),
                      "--out", str(runs / "bench"), *figures])

    for step in steps:
        code = cli_main(step)
        if code:
            raise SystemExit(f"'{step[0]}' failed with exit code {code}")


if __name__ == "__main__":
    main()
