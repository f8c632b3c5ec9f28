"""Alternating adversarial training with validation-based checkpoint selection.

One discriminator step then one generator step per batch (Adam, beta1 = 0.5).
After every epoch the generator objective (adversarial term against the
current, frozen discriminator + weighted content + perceptual) is measured on
the validation split without gradients; the lowest-scoring epoch is kept.
Epoch 0 in the log is the untrained initialisation and is reference only.
"""

from __future__ import annotations

import copy
import dataclasses
import json
import logging
from pathlib import Path
from typing import Iterable

import numpy as np
import pandas as pd
import torch
from torch.utils.data import DataLoader
from tqdm import tqdm

import egofront.config as cfg
from egofront.conditioning import conditioning_track
from egofront.dataset import PairedSequence, WindowDataset, apply_masks, split_range
from egofront.errors import (
    ConfigMismatch,
    DatasetTooSmall,
    NonFiniteInput,
    NonFiniteLoss,
    ShapeMismatch,
    SplitTooShort,
    UnknownMode,
)
from egofront.losses import (
    FeatureExtractor,
    LossWeights,
    content_loss,
    discriminator_loss,
    generator_adversarial_loss,
    make_extractor,
    perceptual_loss,
    total_generator_objective,
)
from egofront.model import (
    CHECKPOINT_FILE,
    DiscriminatorConfig,
    GeneratorConfig,
    ModelCheckpoint,
    PatchDiscriminator,
    VideoUNet,
    build_discriminator,
    build_generator,
)
from egofront.reporting import write_train_log
from egofront.run_config import canonical_hash, load_config

logger = logging.getLogger(__name__)

# Fields that change where or how fast training runs, not what it computes.
_RUNTIME_FIELDS = ("device", "num_workers")


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    lr: float = cfg.LEARNING_RATE
    first_moment_decay: float = cfg.BETA1
    second_moment_decay: float = cfg.BETA2
    batch_size: int = cfg.BATCH_SIZE
    epochs: int = cfg.EPOCHS
    window_size: int = cfg.WINDOW_SIZE
    resolution: int = 256
    conditioning: str = cfg.NEUTRAL_HEAD
    remove_ego_bg: bool = True
    use_perceptual: bool = True
    extractor: str = cfg.FACE_FEATURES
    lambda1: float = cfg.LAMBDA_CONTENT
    lambda2: float = cfg.LAMBDA_PERCEPTUAL
    seed: int = 0
    train_frames: int | None = None
    width_divisor: int = 1
    disc_depth: int = cfg.DISC_DEPTH
    disc_norm: str = "none"
    device: str = "cpu"
    num_workers: int = 0

    def __post_init__(self):
        if self.lr <= 0.0:
            raise ValueError(f"TrainConfig lr must be positive, got {self.lr}")
        for name in ("first_moment_decay", "second_moment_decay"):
            if not (0.0 <= getattr(self, name) < 1.0):
                raise ValueError(f"TrainConfig {name} must be in [0, 1), got {getattr(self, name)}")
        for name in ("batch_size", "epochs", "window_size", "width_divisor", "disc_depth"):
            if getattr(self, name) < 1:
                raise ValueError(f"TrainConfig {name} must be >= 1, got {getattr(self, name)}")
        if self.train_frames is not None and self.train_frames < 1:
            raise ValueError(f"TrainConfig train_frames must be positive or None, got {self.train_frames}")
        if self.num_workers < 0:
            raise ValueError(f"TrainConfig num_workers must be >= 0, got {self.num_workers}")
        if self.conditioning not in cfg.CONDITIONING_MODES:
            raise UnknownMode(f"Unknown conditioning mode '{self.conditioning}'. Available: {cfg.CONDITIONING_MODES}")
        if self.extractor not in cfg.EXTRACTOR_WIDTHS:
            raise UnknownMode(f"Unknown feature extractor '{self.extractor}'. Available: {sorted(cfg.EXTRACTOR_WIDTHS)}")
        LossWeights(self.lambda1, self.lambda2)

    @classmethod
    def from_ini(cls, path: Path | None = None, overrides: Iterable[str] = ()) -> "TrainConfig":
        return load_config(cls, path, overrides)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        payload = {k: v for k, v in self.as_dict().items() if k not in _RUNTIME_FIELDS}
        return canonical_hash(payload)

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.lambda1, self.lambda2 if self.use_perceptual else 0.0)

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig.for_resolution(self.resolution, self.window_size, self.width_divisor)

    def discriminator_config(self) -> DiscriminatorConfig:
        return DiscriminatorConfig(
            window_size=self.window_size,
            depth=self.disc_depth,
            base_channels=max(1, cfg.DISC_BASE_CHANNELS // self.width_divisor),
            max_channels=max(1, cfg.DISC_MAX_CHANNELS // self.width_divisor),
            norm=self.disc_norm,
        )


def _set_determinism(seed: int) -> None:
    torch.manual_seed(seed)
    np.random.seed(seed % 2**32)
    if torch.cuda.is_available():
        torch.backends.cudnn.deterministic = True
        torch.backends.cudnn.benchmark = False


def _window_datasets(seq: PairedSequence, config: TrainConfig, cond: np.ndarray | None):
    start, stop = split_range(seq, "train")
    available = stop - start
    if config.train_frames is not None and config.train_frames > available:
        raise DatasetTooSmall(f"train_frames={config.train_frames} but the training split has {available} frames")
    try:
        train_ds = WindowDataset(seq, "train", config.window_size, cond, limit_frames=config.train_frames)
        val_ds = WindowDataset(seq, "val", config.window_size, cond)
    except SplitTooShort as exc:
        raise DatasetTooSmall(f"Dataset too small for N={config.window_size}: {exc}") from exc
    return train_ds, val_ds


def _generator_terms(G, D, ego, cond, target, extractor, weights):
    inputs = torch.cat([ego, cond], dim=1)
    fake = G(ego, cond)
    adv = generator_adversarial_loss(D(inputs, fake))
    content = content_loss(fake, target)
    perc = perceptual_loss(fake, target, extractor) if extractor is not None else fake.new_zeros(())
    return fake, adv, content, perc, total_generator_objective(adv, content, perc, weights)


def validate(
    G: VideoUNet,
    D: PatchDiscriminator,
    loader: DataLoader,
    extractor: FeatureExtractor | None,
    weights: LossWeights,
    device: str | torch.device = "cpu",
) -> tuple[float, float]:
    """(generator objective, content loss) averaged over windows; no gradients flow."""
    total, content_total, count = 0.0, 0.0, 0
    with torch.no_grad():
        for ego, cond, target in loader:
            ego, cond, target = ego.to(device), cond.to(device), target.to(device)
            _, _, content, _, objective = _generator_terms(G, D, ego, cond, target, extractor, weights)
            total += objective.item() * len(ego)
            content_total += content.item() * len(ego)
            count += len(ego)
    return total / count, content_total / count


def _state_copy(module: torch.nn.Module) -> dict[str, torch.Tensor]:
    return {k: v.detach().cpu().clone() for k, v in module.state_dict().items()}


def train(
    seq: PairedSequence,
    config: TrainConfig,
    *,
    out_dir: Path | None = None,
    conditioning: np.ndarray | None = None,
    progress: bool = True,
) -> ModelCheckpoint:
    """Train G and D on `seq` and return the best-validating checkpoint.

    `conditioning` is an optional pre-rendered (L, H, W, 3) track; by default it is
    rendered from the sequence poses in the configured mode.
    """
    if seq.resolution != config.resolution:
        raise ShapeMismatch(f"Sequence is {seq.resolution}px but the config expects {config.resolution}px")
    _set_determinism(config.seed)
    device = torch.device(config.device)

    data = apply_masks(seq, remove_ego_bg=config.remove_ego_bg)
    if conditioning is None and config.conditioning != cfg.NO_CONDITIONING:
        conditioning = conditioning_track(data, config.conditioning)
    if config.conditioning == cfg.NO_CONDITIONING:
        conditioning = None
    train_ds, val_ds = _window_datasets(data, config, conditioning)

    shuffle_gen = torch.Generator().manual_seed(config.seed)
    train_loader = DataLoader(
        train_ds, batch_size=config.batch_size, shuffle=True, generator=shuffle_gen, num_workers=config.num_workers
    )
    val_loader = DataLoader(val_ds, batch_size=config.batch_size, shuffle=False, num_workers=config.num_workers)

    g_config, d_config = config.generator_config(), config.discriminator_config()
    G = build_generator(g_config, config.seed).to(device)
    D = build_discriminator(d_config, config.seed).to(device)
    extractor = make_extractor(config.extractor, device) if config.use_perceptual else None
    weights = config.weights
    betas = (config.first_moment_decay, config.second_moment_decay)
    opt_G = torch.optim.Adam(G.parameters(), lr=config.lr, betas=betas)
    opt_D = torch.optim.Adam(D.parameters(), lr=config.lr, betas=betas)

    initial_score, initial_content = validate(G, D, val_loader, extractor, weights, device)
    history = [{"epoch": 0, "loss_D": np.nan, "loss_G": np.nan, "val_score": initial_score, "val_content": initial_content}]
    logger.info("Epoch 0 (untrained): val %.6f, content %.6f", initial_score, initial_content)

    best: dict | None = None
    for epoch in range(1, config.epochs + 1):
        G.train()
        D.train()
        sum_D, sum_G, seen = 0.0, 0.0, 0
        bar = tqdm(train_loader, desc=f"epoch {epoch}/{config.epochs}", disable=not progress, leave=False)
        for batch, (ego, cond, target) in enumerate(bar):
            ego, cond, target = ego.to(device), cond.to(device), target.to(device)
            inputs = torch.cat([ego, cond], dim=1)
            try:
                fake = G(ego, cond)

                D.requires_grad_(True)
                opt_D.zero_grad(set_to_none=True)
                loss_D = discriminator_loss(D(inputs, target), D(inputs, fake.detach()))
                if not torch.isfinite(loss_D):
                    raise NonFiniteLoss(
                        f"Non-finite discriminator loss at epoch {epoch}",
                        {"epoch": epoch, "batch": batch, "loss_D": loss_D.item()},
                    )
                loss_D.backward()
                opt_D.step()

                D.requires_grad_(False)
                opt_G.zero_grad(set_to_none=True)
                adv = generator_adversarial_loss(D(inputs, fake))
                content = content_loss(fake, target)
                perc = perceptual_loss(fake, target, extractor) if extractor is not None else fake.new_zeros(())
                loss_G = total_generator_objective(adv, content, perc, weights)
            except NonFiniteInput as exc:
                raise NonFiniteLoss(f"Non-finite discriminator output at epoch {epoch}", {"epoch": epoch, "batch": batch}) from exc

            if not torch.isfinite(loss_G):
                raise NonFiniteLoss(
                    f"Non-finite loss at epoch {epoch}",
                    {
                        "epoch": epoch,
                        "batch": batch,
                        "loss_D": loss_D.item(),
                        "adv_G": adv.item(),
                        "content": content.item(),
                        "perceptual": perc.item(),
                    },
                )
            loss_G.backward()
            opt_G.step()
            D.requires_grad_(True)

            sum_D += loss_D.item() * len(ego)
            sum_G += loss_G.item() * len(ego)
            seen += len(ego)
            bar.set_postfix(loss_D=f"{loss_D.item():.4f}", loss_G=f"{loss_G.item():.4f}")
            logger.debug("epoch %d batch %d: loss_D %.6f loss_G %.6f", epoch, batch, loss_D.item(), loss_G.item())

        G.eval()
        D.eval()
        val_score, val_content = validate(G, D, val_loader, extractor, weights, device)
        history.append(
            {"epoch": epoch, "loss_D": sum_D / seen, "loss_G": sum_G / seen, "val_score": val_score, "val_content": val_content}
        )
        logger.info(
            "Epoch %d: loss_D %.6f loss_G %.6f val %.6f content %.6f", epoch, sum_D / seen, sum_G / seen, val_score, val_content
        )
        if best is None or val_score < best["val_score"]:
            best = {
                "epoch": epoch,
                "val_score": val_score,
                "generator": _state_copy(G),
                "discriminator": _state_copy(D),
                "optimizers": {"generator": copy.deepcopy(opt_G.state_dict()), "discriminator": copy.deepcopy(opt_D.state_dict())},
            }

    logger.info("Selected epoch %d (val %.6f)", best["epoch"], best["val_score"])
    checkpoint = ModelCheckpoint(
        generator_state=best["generator"],
        discriminator_state=best["discriminator"],
        generator_config=g_config,
        discriminator_config=d_config,
        config_hash=config.config_hash(),
        epoch=best["epoch"],
        val_score=best["val_score"],
        train_config=config.as_dict(),
        optimizer_state=best["optimizers"],
        history=history,
    )
    if out_dir is not None:
        checkpoint.save(out_dir)
        write_train_log(pd.DataFrame(history), out_dir)
    return checkpoint


def load_checkpoint(directory: Path, config: TrainConfig | None = None) -> ModelCheckpoint:
    """Load a trained checkpoint after checking its config hash.

    The hash is recomputed from `config` when given, else from the training
    configuration stored in the checkpoint; a stale or edited checkpoint is refused.
    """
    meta_path = Path(directory) / CHECKPOINT_FILE
    if config is None:
        if not meta_path.exists():
            raise FileNotFoundError(f"No {CHECKPOINT_FILE} in {directory}")
        stored = json.loads(meta_path.read_text()).get("train_config") or {}
        try:
            config = TrainConfig(**stored)
        except (TypeError, ValueError) as exc:
            raise ConfigMismatch(f"{meta_path}: stored training configuration is invalid: {exc}") from exc
    return ModelCheckpoint.load(directory, expected_hash=config.config_hash())


# Ablations

def _swap_extractor(extractor: str) -> str:
    return cfg.GENERIC_FEATURES if extractor == cfg.FACE_FEATURES else cfg.FACE_FEATURES


def ablation_config(base: TrainConfig, mode: str, train_split_frames: int | None = None) -> TrainConfig:
    """`base` with the single toggle of `mode` flipped.

    Training-size modes keep 5000/7500 or 2500/7500 of the available training
    frames (`train_split_frames`, default 7500).
    """
    available = base.train_frames or train_split_frames or cfg.TRAIN_FRAMES
    changes = {
        "no_pose_cond": {"conditioning": cfg.NO_CONDITIONING},
        "pose_cond_no_ego_bg_removal": {"remove_ego_bg": False},
        "no_perceptual": {"use_perceptual": False},
        "extractor_swap": {"extractor": _swap_extractor(base.extractor)},
        "landmarks_cond": {"conditioning": cfg.LANDMARKS},
        "contours_cond": {"conditioning": cfg.CONTOURS},
        "train_size_5000": {"train_frames": max(1, round(available * 5000 / cfg.TRAIN_FRAMES))},
        "train_size_2500": {"train_frames": max(1, round(available * 2500 / cfg.TRAIN_FRAMES))},
        "single_frame_no_cond": {"window_size": 1, "conditioning": cfg.NO_CONDITIONING},
    }
    if mode not in changes:
        raise UnknownMode(f"Unknown ablation mode '{mode}'. Available: {cfg.ABLATION_MODES}")
    return dataclasses.replace(base, **changes[mode])


def ablation_tag(mode: str, config: TrainConfig) -> str:
    return f"{mode}-{config.config_hash()[:8]}"


def ablate(
    seq: PairedSequence,
    base_config: TrainConfig,
    mode: str,
    *,
    out_dir: Path | None = None,
    progress: bool = True,
) -> tuple[ModelCheckpoint, str]:
    """Train the ablated variant; returns (checkpoint, report tag)."""
    start, stop = split_range(seq, "train")
    config = ablation_config(base_config, mode, stop - start)
    tag = ablation_tag(mode, config)
    logger.info("Ablation %s: %s", tag, {k: v for k, v in config.as_dict().items() if getattr(base_config, k) != v})
    checkpoint = train(seq, config, out_dir=Path(out_dir) / tag if out_dir is not None else None, progress=progress)
    return checkpoint, tag
