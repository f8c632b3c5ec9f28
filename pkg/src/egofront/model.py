"""Video U-Net generator, temporal patch discriminator and checkpoints.

Generator input is the channel stack [ego (3N) | conditioning (3N)], output the
3N-channel stack of predicted frontal frames. The discriminator sees the same
6N input stack plus a real-or-fake 3N stack and returns patch logits.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np
import torch
from torch import nn

import egofront.config as cfg
from egofront.errors import ConfigMismatch, ShapeMismatch

logger = logging.getLogger(__name__)

GENERATOR_FILE = "generator.pt"
DISCRIMINATOR_FILE = "discriminator.pt"
OPTIMIZERS_FILE = "optimizers.pt"
CHECKPOINT_FILE = "checkpoint.json"


@dataclasses.dataclass(frozen=True)
class GeneratorConfig:
    window_size: int = cfg.WINDOW_SIZE
    level_channels: tuple[int, ...] = cfg.LEVEL_CHANNELS
    resolution: int = 256
    kernel: int = cfg.KERNEL_SIZE
    stride: int = cfg.STRIDE

    def __post_init__(self):
        object.__setattr__(self, "level_channels", tuple(int(c) for c in self.level_channels))
        if self.window_size < 1:
            raise ValueError(f"GeneratorConfig window_size must be >= 1, got {self.window_size}")
        if not self.level_channels or min(self.level_channels) < 1:
            raise ValueError(f"GeneratorConfig level_channels must be positive, got {self.level_channels}")
        expected = self.stride ** self.levels * cfg.INNERMOST_RESOLUTION
        if self.resolution != expected:
            raise ValueError(
                f"GeneratorConfig: {self.levels} levels need a {expected}px input "
                f"(innermost {cfg.INNERMOST_RESOLUTION}px), got {self.resolution}"
            )

    @property
    def in_channels(self) -> int:
        return 6 * self.window_size

    @property
    def out_channels(self) -> int:
        return 3 * self.window_size

    @property
    def levels(self) -> int:
        return len(self.level_channels)

    @property
    def level_resolutions(self) -> tuple[int, ...]:
        return tuple(self.resolution // self.stride ** (i + 1) for i in range(self.levels))

    @classmethod
    def for_resolution(cls, resolution: int, window_size: int = cfg.WINDOW_SIZE, width_divisor: int = 1) -> "GeneratorConfig":
        """Truncate the deepest levels so the innermost map stays 2x2 (64 -> 5 levels, 128 -> 6, 256 -> 7)."""
        levels = int(round(np.log2(resolution / cfg.INNERMOST_RESOLUTION)))
        if not (1 <= levels <= len(cfg.LEVEL_CHANNELS)):
            raise ValueError(f"Resolution {resolution} needs {levels} levels; at most {len(cfg.LEVEL_CHANNELS)} are defined")
        channels = tuple(max(1, c // width_divisor) for c in cfg.LEVEL_CHANNELS[:levels])
        return cls(window_size=window_size, level_channels=channels, resolution=resolution)

    def as_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GeneratorConfig":
        return cls(**{**d, "level_channels": tuple(d["level_channels"])})


@dataclasses.dataclass(frozen=True)
class DiscriminatorConfig:
    window_size: int = cfg.WINDOW_SIZE
    depth: int = cfg.DISC_DEPTH
    base_channels: int = cfg.DISC_BASE_CHANNELS
    max_channels: int = cfg.DISC_MAX_CHANNELS
    norm: str = "none"

    def __post_init__(self):
        if self.window_size < 1 or self.depth < 1:
            raise ValueError(f"DiscriminatorConfig window_size and depth must be >= 1, got {self.window_size}, {self.depth}")
        if self.norm not in ("none", "instance"):
            raise ValueError(f"DiscriminatorConfig norm must be 'none' or 'instance', got '{self.norm}'")

    @property
    def in_channels(self) -> int:
        return 9 * self.window_size

    def channels(self) -> tuple[int, ...]:
        return tuple(min(self.base_channels * 2 ** i, self.max_channels) for i in range(self.depth))

    def as_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DiscriminatorConfig":
        return cls(**d)


def _down_block(in_ch: int, out_ch: int, outermost: bool, config: GeneratorConfig) -> nn.Sequential:
    layers: list[nn.Module] = []
    if not outermost:
        layers.append(nn.LeakyReLU(cfg.LEAKY_SLOPE))
    layers.append(nn.Conv2d(in_ch, out_ch, config.kernel, config.stride, padding=1))
    if not outermost:
        layers.append(nn.InstanceNorm2d(out_ch, affine=False))
    return nn.Sequential(*layers)


def _up_block(in_ch: int, out_ch: int, outermost: bool, config: GeneratorConfig) -> nn.Sequential:
    layers: list[nn.Module] = [
        nn.ReLU(),
        nn.ConvTranspose2d(in_ch, out_ch, config.kernel, config.stride, padding=1),
    ]
    layers.append(nn.Tanh() if outermost else nn.InstanceNorm2d(out_ch, affine=False))
    return nn.Sequential(*layers)


class VideoUNet(nn.Module):
    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        ch = config.level_channels
        levels = config.levels

        self.down = nn.ModuleList(
            _down_block(config.in_channels if i == 0 else ch[i - 1], ch[i], i == 0, config) for i in range(levels)
        )
        up = []
        for j in range(levels):
            level = levels - 1 - j
            in_ch = ch[level] if j == 0 else 2 * ch[level]
            out_ch = config.out_channels if level == 0 else ch[level - 1]
            up.append(_up_block(in_ch, out_ch, level == 0, config))
        self.up = nn.ModuleList(up)

    def forward(self, ego: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        """ego, cond: (B, 3N, H, W) in [-1, 1] -> (B, 3N, H, W) in (-1, 1)."""
        c = self.config
        expected = (c.out_channels, c.resolution, c.resolution)
        for name, t in (("ego", ego), ("cond", cond)):
            if t.ndim != 4 or tuple(t.shape[1:]) != expected:
                raise ShapeMismatch(f"VideoUNet {name} stack must be (B, {expected[0]}, {expected[1]}, {expected[2]}), got {tuple(t.shape)}")
        if ego.shape[0] != cond.shape[0]:
            raise ShapeMismatch(f"VideoUNet batch sizes differ: {ego.shape[0]} vs {cond.shape[0]}")

        skips = []
        h = torch.cat([ego, cond], dim=1)
        for block in self.down:
            h = block(h)
            skips.append(h)
        for j, block in enumerate(self.up):
            if j > 0:
                h = torch.cat([h, skips[-1 - j]], dim=1)
            h = block(h)
        return h


class PatchDiscriminator(nn.Module):
    """Stride-2 conv pyramid of `depth` blocks, then a 3x3 conv to one logit per patch."""

    def __init__(self, config: DiscriminatorConfig):
        super().__init__()
        self.config = config
        layers: list[nn.Module] = []
        in_ch = config.in_channels
        for i, out_ch in enumerate(config.channels()):
            layers.append(nn.Conv2d(in_ch, out_ch, cfg.KERNEL_SIZE, cfg.STRIDE, padding=1))
            if config.norm == "instance" and i > 0:
                layers.append(nn.InstanceNorm2d(out_ch, affine=False))
            layers.append(nn.LeakyReLU(cfg.LEAKY_SLOPE))
            in_ch = out_ch
        layers.append(nn.Conv2d(in_ch, 1, 3, 1, padding=1))
        self.net = nn.Sequential(*layers)

    def forward(self, inputs: torch.Tensor, candidate: torch.Tensor) -> torch.Tensor:
        """inputs (B, 6N, H, W), candidate (B, 3N, H, W) -> logits (B, 1, H/2^depth, W/2^depth)."""
        n = self.config.window_size
        if inputs.ndim != 4 or inputs.shape[1] != 6 * n:
            raise ShapeMismatch(f"PatchDiscriminator input stack must have {6 * n} channels, got {tuple(inputs.shape)}")
        if candidate.ndim != 4 or candidate.shape[1] != 3 * n:
            raise ShapeMismatch(f"PatchDiscriminator candidate must have {3 * n} channels, got {tuple(candidate.shape)}")
        if inputs.shape[0] != candidate.shape[0] or inputs.shape[2:] != candidate.shape[2:]:
            raise ShapeMismatch(f"PatchDiscriminator shapes disagree: {tuple(inputs.shape)} vs {tuple(candidate.shape)}")
        side = 2 ** self.config.depth
        if inputs.shape[2] % side or inputs.shape[3] % side:
            raise ShapeMismatch(f"PatchDiscriminator input {tuple(inputs.shape[2:])} is not divisible by {side}")
        return self.net(torch.cat([inputs, candidate], dim=1))


def init_weights(module: nn.Module, seed: int, std: float = cfg.INIT_STD) -> nn.Module:
    """N(0, std) convolution weights, zero biases, drawn from a seeded generator."""
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
                m.weight.copy_(torch.randn(m.weight.shape, generator=gen, dtype=m.weight.dtype) * std)
                if m.bias is not None:
                    m.bias.zero_()
    return module


def build_generator(config: GeneratorConfig, seed: int = 0) -> VideoUNet:
    return init_weights(VideoUNet(config), seed)


def build_discriminator(config: DiscriminatorConfig, seed: int = 0) -> PatchDiscriminator:
    return init_weights(PatchDiscriminator(config), seed + 1)


def generator_forward(ego_stack: torch.Tensor, cond_stack: torch.Tensor, model: VideoUNet) -> torch.Tensor:
    """One window: (N, 3, H, W) stacks -> (N, 3, H, W) prediction."""
    n = model.config.window_size
    if ego_stack.shape != cond_stack.shape or ego_stack.ndim != 4 or ego_stack.shape[:2] != (n, 3):
        raise ShapeMismatch(f"generator_forward expects two ({n}, 3, H, W) stacks, got {tuple(ego_stack.shape)} and {tuple(cond_stack.shape)}")
    h, w = ego_stack.shape[2:]
    out = model(ego_stack.reshape(1, 3 * n, h, w), cond_stack.reshape(1, 3 * n, h, w))
    return out.reshape(n, 3, h, w)


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def parameter_hash(module_or_state: nn.Module | dict[str, torch.Tensor]) -> str:
    """SHA-256 over a state dict (names, dtypes and raw values)."""
    state = module_or_state.state_dict() if isinstance(module_or_state, nn.Module) else module_or_state
    digest = hashlib.sha256()
    for name in sorted(state):
        tensor = state[name].detach().cpu().contiguous()
        digest.update(name.encode())
        digest.update(str(tensor.dtype).encode())
        digest.update(tensor.numpy().tobytes())
    return digest.hexdigest()


@dataclasses.dataclass
class GradientCheck:
    max_relative_error: float
    checked: int
    failures: int


def finite_difference_check(
    loss_fn: Callable[[], torch.Tensor],
    params: Iterable[torch.Tensor],
    eps: float = 1e-5,
    samples: int | None = None,
    tol: float = 1e-3,
    seed: int = 0,
    floor: float = 1e-8,
) -> GradientCheck:
    """Compare autodiff gradients of `loss_fn()` with central differences.

    `samples` limits the number of entries checked per tensor (None checks all).
    Relative error is |g_auto - g_num| / max(|g_auto|, |g_num|, floor).
    """
    params = [p for p in params if p.requires_grad]
    for p in params:
        p.grad = None
    loss_fn().backward()
    auto = [p.grad.detach().clone() for p in params]

    rng = np.random.default_rng(seed)
    worst, checked, failures = 0.0, 0, 0
    with torch.no_grad():
        for p, g in zip(params, auto):
            flat = p.view(-1)
            idx = np.arange(flat.numel())
            if samples is not None and samples < flat.numel():
                idx = rng.choice(flat.numel(), size=samples, replace=False)
            for i in idx:
                original = flat[i].item()
                flat[i] = original + eps
                plus = loss_fn().item()
                flat[i] = original - eps
                minus = loss_fn().item()
                flat[i] = original
                numeric = (plus - minus) / (2.0 * eps)
                analytic = g.view(-1)[i].item()
                rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
                worst = max(worst, rel)
                checked += 1
                failures += int(rel >= tol)
    return GradientCheck(max_relative_error=worst, checked=checked, failures=failures)


# Checkpoints

@dataclasses.dataclass
class ModelCheckpoint:
    generator_state: dict[str, torch.Tensor]
    discriminator_state: dict[str, torch.Tensor]
    generator_config: GeneratorConfig
    discriminator_config: DiscriminatorConfig
    config_hash: str
    epoch: int
    val_score: float
    train_config: dict[str, Any] = dataclasses.field(default_factory=dict)
    optimizer_state: dict[str, Any] | None = None
    version: int = cfg.CHECKPOINT_VERSION
    history: list[dict[str, Any]] = dataclasses.field(default_factory=list)  # per-epoch log, not persisted here

    @property
    def window_size(self) -> int:
        return self.generator_config.window_size

    @property
    def generator_hash(self) -> str:
        return parameter_hash(self.generator_state)

    @property
    def discriminator_hash(self) -> str:
        return parameter_hash(self.discriminator_state)

    def generator(self, device: str | torch.device = "cpu") -> VideoUNet:
        model = VideoUNet(self.generator_config)
        model.load_state_dict(self.generator_state)
        return model.to(device).eval()

    def discriminator(self, device: str | torch.device = "cpu") -> PatchDiscriminator:
        model = PatchDiscriminator(self.discriminator_config)
        model.load_state_dict(self.discriminator_state)
        return model.to(device).eval()

    def metadata(self) -> dict[str, Any]:
        return {
            "version": self.version,
            "generator_config": self.generator_config.as_dict(),
            "discriminator_config": self.discriminator_config.as_dict(),
            "config_hash": self.config_hash,
            "epoch": self.epoch,
            "val_score": self.val_score,
            "train_config": self.train_config,
            "generator_hash": self.generator_hash,
            "discriminator_hash": self.discriminator_hash,
        }

    def save(self, directory: Path) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        torch.save(self.generator_state, directory / GENERATOR_FILE)
        torch.save(self.discriminator_state, directory / DISCRIMINATOR_FILE)
        if self.optimizer_state is not None:
            torch.save(self.optimizer_state, directory / OPTIMIZERS_FILE)
        path = directory / CHECKPOINT_FILE
        path.write_text(json.dumps(self.metadata(), indent=2, sort_keys=True))
        logger.info("Saved checkpoint (epoch %d, val %.6f) to %s", self.epoch, self.val_score, directory)
        return path

    @classmethod
    def load(cls, directory: Path, expected_hash: str | None = None) -> "ModelCheckpoint":
        """Load a checkpoint directory; refuses a config-hash or format-version mismatch."""
        directory = Path(directory)
        meta_path = directory / CHECKPOINT_FILE
        if not meta_path.exists():
            raise FileNotFoundError(f"No {CHECKPOINT_FILE} in {directory}")
        meta = json.loads(meta_path.read_text())
        if meta.get("version") != cfg.CHECKPOINT_VERSION:
            raise ConfigMismatch(f"{meta_path}: checkpoint version {meta.get('version')}, expected {cfg.CHECKPOINT_VERSION}")
        if expected_hash is not None and meta["config_hash"] != expected_hash:
            raise ConfigMismatch(
                f"{meta_path}: config hash {meta['config_hash'][:12]} does not match the requested {expected_hash[:12]}"
            )
        optimizers = directory / OPTIMIZERS_FILE
        ckpt = cls(
            generator_state=torch.load(directory / GENERATOR_FILE, map_location="cpu", weights_only=True),
            discriminator_state=torch.load(directory / DISCRIMINATOR_FILE, map_location="cpu", weights_only=True),
            generator_config=GeneratorConfig.from_dict(meta["generator_config"]),
            discriminator_config=DiscriminatorConfig.from_dict(meta["discriminator_config"]),
            config_hash=meta["config_hash"],
            epoch=int(meta["epoch"]),
            val_score=float(meta["val_score"]),
            train_config=meta.get("train_config", {}),
            optimizer_state=torch.load(optimizers, map_location="cpu", weights_only=True) if optimizers.exists() else None,
            version=meta["version"],
        )
        if meta.get("generator_hash") not in (None, ckpt.generator_hash):
            raise ConfigMismatch(f"{directory / GENERATOR_FILE}: parameters do not match the recorded hash")
        return ckpt
