import math

import pytest
import torch
import torch.nn.functional as F

from egofront.errors import NonFiniteInput, ShapeMismatch, UnknownMode
from egofront.losses import (
    FeatureExtractor,
    LossWeights,
    adversarial_losses,
    content_loss,
    make_extractor,
    perceptual_loss,
    total_generator_objective,
)
from egofront.model import parameter_hash

TOL = 1e-6


def _tiny_extractor(seed=0):
    return FeatureExtractor("tiny", widths=(2, 3, 4, 4, 4), seed=seed)


def _frames(seed, shape=(2, 6, 16, 16)):
    gen = torch.Generator().manual_seed(seed)
    return torch.rand(shape, generator=gen) * 2 - 1


def test_adversarial_losses_at_zero_logits():
    loss_D, loss_G = adversarial_losses(torch.zeros(1, 1, 4, 4), torch.zeros(1, 1, 4, 4))
    assert float(loss_D) == pytest.approx(2 * math.log(2), abs=TOL)
    assert float(loss_G) == pytest.approx(math.log(2), abs=TOL)


def test_perfect_discriminator_limit():
    loss_D, loss_G = adversarial_losses(torch.full((4,), 100.0), torch.full((4,), -100.0))
    assert float(loss_D) == pytest.approx(0.0, abs=TOL)
    assert float(loss_G) == pytest.approx(100.0, rel=1e-6)


def test_extreme_logits_stay_finite():
    for sign in (1.0, -1.0):
        loss_D, loss_G = adversarial_losses(torch.full((3,), sign * 1000.0), torch.full((3,), -sign * 1000.0))
        assert torch.isfinite(loss_D) and torch.isfinite(loss_G)


def test_non_finite_logits_raise():
    with pytest.raises(NonFiniteInput):
        adversarial_losses(torch.tensor([float("nan")]), torch.zeros(1))
    with pytest.raises(NonFiniteInput):
        adversarial_losses(torch.zeros(1), torch.tensor([float("inf")]))


def test_adversarial_losses_are_nonnegative():
    gen = torch.Generator().manual_seed(0)
    loss_D, loss_G = adversarial_losses(torch.randn(64, generator=gen) * 5, torch.randn(64, generator=gen) * 5)
    assert float(loss_D) >= 0.0 and float(loss_G) >= 0.0


def test_content_loss_closed_form():
    assert float(content_loss(torch.full((3, 4, 4), 0.25), torch.ones(3, 4, 4))) == pytest.approx(0.75)
    x = _frames(1)
    assert float(content_loss(x, x)) == 0.0


def test_content_loss_is_homogeneous_and_per_frame_mean():
    pred, target = _frames(2), _frames(3)
    base = content_loss(pred, target)
    assert float(content_loss(target + 3.0 * (pred - target), target)) == pytest.approx(3.0 * float(base), rel=1e-5)
    frames = [content_loss(pred[:, 3 * k : 3 * k + 3], target[:, 3 * k : 3 * k + 3]) for k in range(2)]
    assert float(base) == pytest.approx(float(sum(frames) / 2), rel=1e-6)


def test_content_loss_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        content_loss(torch.zeros(2, 3), torch.zeros(3, 2))


def test_perceptual_loss_zero_and_symmetric():
    extractor = _tiny_extractor()
    a, b = _frames(4), _frames(5)
    assert float(perceptual_loss(a, a, extractor)) == 0.0
    assert float(perceptual_loss(a, b, extractor)) == pytest.approx(float(perceptual_loss(b, a, extractor)), abs=TOL)
    assert float(perceptual_loss(a, b, extractor)) > 0.0


def test_perceptual_loss_matches_per_layer_recomputation():
    extractor = _tiny_extractor(seed=3)
    a, b = _frames(6), _frames(7)
    expected = 0.0
    fa, fb = a.reshape(-1, 3, 16, 16), b.reshape(-1, 3, 16, 16)
    taps = []
    for index, layer in enumerate(extractor.layers, start=1):
        fa, fb = layer(fa), layer(fb)
        if index in (1, 6, 11, 18, 25):
            taps.append(index)
            expected += float((fa - fb).abs().mean())
    assert taps == [1, 6, 11, 18, 25]
    assert float(perceptual_loss(a, b, extractor)) == pytest.approx(expected, abs=TOL)


def test_extractor_topology_and_minimum_size():
    extractor = make_extractor("face_features")
    convs = [m for m in extractor.layers if isinstance(m, torch.nn.Conv2d)]
    assert len(extractor.layers) == 25
    assert len(convs) == 11
    assert extractor.min_resolution == 16
    with pytest.raises(ShapeMismatch):
        extractor(torch.zeros(1, 3, 8, 8))
    with pytest.raises(UnknownMode):
        FeatureExtractor("imagenet")


def test_extractors_differ_and_are_frozen():
    face, generic = make_extractor("face_features"), make_extractor("generic_features")
    assert parameter_hash(face) != parameter_hash(generic)
    assert parameter_hash(face) == parameter_hash(make_extractor("face_features"))
    assert not any(p.requires_grad for p in face.parameters())
    face.train()
    assert not face.training

    before = parameter_hash(face)
    pred = _frames(8).requires_grad_(True)
    optimiser = torch.optim.Adam([pred], lr=0.1)
    for _ in range(3):
        optimiser.zero_grad()
        perceptual_loss(pred, _frames(9), face).backward()
        optimiser.step()
    assert pred.grad is not None
    assert parameter_hash(face) == before


def test_load_weights_hook(tmp_path):
    source = _tiny_extractor(seed=11)
    torch.save(source.state_dict(), tmp_path / "weights.pt")
    target = _tiny_extractor(seed=12).load_weights(tmp_path / "weights.pt")
    assert parameter_hash(target) == parameter_hash(source)
    assert not any(p.requires_grad for p in target.parameters())


def test_total_objective():
    assert total_generator_objective(0.0, 0.0, 0.0) == 0.0
    assert total_generator_objective(0.7, 0.5, 100.0) == pytest.approx(5.95)
    assert total_generator_objective(0.0, 1.0, 0.0, LossWeights(lambda1=2.0)) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        LossWeights(lambda1=-1.0)


def test_perceptual_loss_backpropagates_into_prediction():
    extractor = _tiny_extractor()
    pred = _frames(10).requires_grad_(True)
    loss = perceptual_loss(pred, _frames(11), extractor)
    loss.backward()
    assert pred.grad is not None and torch.isfinite(pred.grad).all()
    assert F.l1_loss(pred.grad, torch.zeros_like(pred.grad)) > 0
