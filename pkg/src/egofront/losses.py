"""Generator objective: non-saturating adversarial + l1 content + layer-tapped perceptual.

All reductions are means, so weights stay resolution independent.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import nn

import egofront.config as cfg
from egofront.errors import NonFiniteInput, ShapeMismatch, UnknownMode

VGG16_STAGES = (2, 2, 3, 3, 3)  # convolutions per stage


@dataclasses.dataclass(frozen=True)
class LossWeights:
    lambda1: float = cfg.LAMBDA_CONTENT
    lambda2: float = cfg.LAMBDA_PERCEPTUAL

    def __post_init__(self):
        if self.lambda1 < 0.0 or self.lambda2 < 0.0:
            raise ValueError(f"LossWeights must be non-negative, got ({self.lambda1}, {self.lambda2})")


def _same_shape(name: str, a: torch.Tensor, b: torch.Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"{name}: shapes differ, {tuple(a.shape)} vs {tuple(b.shape)}")


def content_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference over every element (all frames of the window)."""
    _same_shape("content_loss", pred, target)
    return F.l1_loss(pred, target)


def _finite(name: str, logits: torch.Tensor) -> None:
    if not torch.isfinite(logits).all():
        raise NonFiniteInput(f"{name} contains NaN or infinite logits")


def discriminator_loss(d_real_logits: torch.Tensor, d_fake_logits: torch.Tensor) -> torch.Tensor:
    """-mean log sigmoid(real) - mean log(1 - sigmoid(fake)), from logits."""
    _finite("d_real_logits", d_real_logits)
    _finite("d_fake_logits", d_fake_logits)
    return F.softplus(-d_real_logits).mean() + F.softplus(d_fake_logits).mean()


def generator_adversarial_loss(d_fake_logits: torch.Tensor) -> torch.Tensor:
    """Non-saturating form: -mean log sigmoid(fake)."""
    _finite("d_fake_logits", d_fake_logits)
    return F.softplus(-d_fake_logits).mean()


def adversarial_losses(d_real_logits: torch.Tensor, d_fake_logits: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """(loss_D, loss_G), averaged over every patch logit of the window."""
    return discriminator_loss(d_real_logits, d_fake_logits), generator_adversarial_loss(d_fake_logits)


class FeatureExtractor(nn.Module):
    """Frozen VGG16-topology feature pyramid tapped at the first conv of each stage.

    Layer indices are 1-based positions in the conv/relu/pool sequence, as in
    torchvision's VGG `features` (1, 6, 11, 18, 25 = conv1_1 .. conv5_1).
    Weights are a fixed-seed random init unless `load_weights` supplies trained ones.
    """

    def __init__(
        self,
        extractor_id: str = cfg.FACE_FEATURES,
        widths: tuple[int, ...] | None = None,
        seed: int | None = None,
        tap_layers: tuple[int, ...] = cfg.TAP_LAYERS,
    ):
        super().__init__()
        if extractor_id not in cfg.EXTRACTOR_WIDTHS and (widths is None or seed is None):
            raise UnknownMode(f"Unknown feature extractor '{extractor_id}'. Available: {sorted(cfg.EXTRACTOR_WIDTHS)}")
        self.extractor_id = extractor_id
        self.widths = tuple(widths or cfg.EXTRACTOR_WIDTHS[extractor_id])
        self.seed = cfg.EXTRACTOR_SEEDS[extractor_id] if seed is None else seed
        self.tap_layers = tuple(tap_layers)
        if len(self.widths) != len(VGG16_STAGES):
            raise ValueError(f"FeatureExtractor needs {len(VGG16_STAGES)} stage widths, got {self.widths}")

        layers: list[nn.Module] = []
        in_ch = 3
        for width, convs in zip(self.widths, VGG16_STAGES):
            for _ in range(convs):
                layers += [nn.Conv2d(in_ch, width, 3, padding=1), nn.ReLU()]
                in_ch = width
            layers.append(nn.MaxPool2d(2))
        if max(self.tap_layers) > len(layers):
            raise ValueError(f"Tap layer {max(self.tap_layers)} beyond the {len(layers)}-layer stack")
        self.layers = nn.Sequential(*layers[: max(self.tap_layers)])
        self._init(self.seed)
        self.freeze()

    @property
    def min_resolution(self) -> int:
        pools = sum(isinstance(m, nn.MaxPool2d) for m in self.layers)
        return 2 ** pools

    def _init(self, seed: int) -> None:
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for m in self.layers:
                if isinstance(m, nn.Conv2d):
                    fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
                    m.weight.copy_(torch.randn(m.weight.shape, generator=gen) * (2.0 / fan_in) ** 0.5)
                    m.bias.zero_()

    def freeze(self) -> "FeatureExtractor":
        for p in self.parameters():
            p.requires_grad_(False)
        return self.eval()

    def train(self, mode: bool = True) -> "FeatureExtractor":
        return super().train(False)

    def load_weights(self, path: Path) -> "FeatureExtractor":
        """Plug in pretrained weights (a state dict for this topology)."""
        state = torch.load(Path(path), map_location="cpu", weights_only=True)
        self.load_state_dict(state)
        return self.freeze()

    def forward(self, frames: torch.Tensor) -> list[torch.Tensor]:
        """frames (B, 3, H, W) -> tap activations in layer order."""
        if frames.ndim != 4 or frames.shape[1] != 3:
            raise ShapeMismatch(f"FeatureExtractor expects (B, 3, H, W), got {tuple(frames.shape)}")
        if min(frames.shape[2:]) < self.min_resolution:
            raise ShapeMismatch(f"FeatureExtractor needs frames of at least {self.min_resolution}px, got {tuple(frames.shape[2:])}")
        taps = []
        h = frames
        for index, layer in enumerate(self.layers, start=1):
            h = layer(h)
            if index in self.tap_layers:
                taps.append(h)
        return taps


def make_extractor(extractor_id: str, device: str | torch.device = "cpu") -> FeatureExtractor:
    return FeatureExtractor(extractor_id).to(device)


def _as_frames(stack: torch.Tensor) -> torch.Tensor:
    """(..., 3k, H, W) or (..., k, 3, H, W) -> (M, 3, H, W)."""
    h, w = stack.shape[-2:]
    if stack.shape[-3] % 3:
        raise ShapeMismatch(f"Cannot split {stack.shape[-3]} channels into RGB frames")
    return stack.reshape(-1, 3, h, w)


def perceptual_loss(pred: torch.Tensor, target: torch.Tensor, extractor: FeatureExtractor) -> torch.Tensor:
    """Sum over tap layers of the mean absolute feature difference, every frame of the stack."""
    _same_shape("perceptual_loss", pred, target)
    pred_feats = extractor(_as_frames(pred))
    target_feats = extractor(_as_frames(target))
    return sum(F.l1_loss(p, t) for p, t in zip(pred_feats, target_feats))


def total_generator_objective(adv_G, content, perceptual, weights: LossWeights | None = None):
    weights = weights or LossWeights()
    return adv_G + weights.lambda1 * content + weights.lambda2 * perceptual
