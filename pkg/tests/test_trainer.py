import dataclasses

import numpy as np
import pandas as pd
import pytest
import torch
from torch.utils.data import DataLoader

import egofront.config as cfg
import egofront.trainer as trainer
from egofront.dataset import WindowDataset
from egofront.errors import DatasetTooSmall, NonFiniteLoss, ShapeMismatch, UnknownMode
from egofront.losses import make_extractor
from egofront.model import ModelCheckpoint, build_discriminator, build_generator, parameter_hash
from egofront.synthgen import generate_sequence
from egofront.trainer import TrainConfig, ablate, ablation_config, ablation_tag, train

SMOKE = TrainConfig(
    resolution=64,
    window_size=3,
    batch_size=4,
    epochs=2,
    width_divisor=16,
    disc_depth=3,
    seed=0,
)


def _sequence(length=30, seed=0):
    return generate_sequence(length, "talking", seed, resolution=64, window_size=3, splits=(18, 24))


def test_smoke_training_writes_checkpoint_and_log(tmp_path):
    ckpt = train(_sequence(), SMOKE, out_dir=tmp_path / "run", progress=False)
    assert (tmp_path / "run" / "checkpoint.json").exists()
    assert (tmp_path / "run" / "generator.pt").exists()
    log = pd.read_csv(tmp_path / "run" / "train_log.csv")
    assert list(log.columns) == ["epoch", "loss_D", "loss_G", "val_score", "val_content"]
    assert list(log["epoch"]) == [0, 1, 2]
    assert log.loc[1:, ["loss_D", "loss_G", "val_score"]].notna().all().all()

    trained = log[log["epoch"] >= 1]
    best = trained.loc[trained["val_score"].idxmin()]
    assert ckpt.epoch == int(best["epoch"])
    assert ckpt.val_score == pytest.approx(float(best["val_score"]))
    assert ckpt.config_hash == SMOKE.config_hash()

    loaded = ModelCheckpoint.load(tmp_path / "run", expected_hash=SMOKE.config_hash())
    assert loaded.generator_hash == ckpt.generator_hash
    assert loaded.optimizer_state is not None


def test_same_seed_gives_identical_parameters():
    seq = _sequence()
    config = dataclasses.replace(SMOKE, epochs=1, use_perceptual=False)
    a = train(seq, config, progress=False)
    b = train(seq, config, progress=False)
    assert a.generator_hash == b.generator_hash
    assert a.discriminator_hash == b.discriminator_hash


def test_zero_epochs_is_rejected():
    with pytest.raises(ValueError):
        dataclasses.replace(SMOKE, epochs=0)


def test_resolution_mismatch_is_rejected():
    with pytest.raises(ShapeMismatch):
        train(_sequence(), dataclasses.replace(SMOKE, resolution=128), progress=False)


def test_too_many_training_frames():
    with pytest.raises(DatasetTooSmall):
        train(_sequence(), dataclasses.replace(SMOKE, train_frames=100), progress=False)


def test_split_shorter_than_window():
    seq = generate_sequence(12, "talking", 0, resolution=64, window_size=3, splits=(8, 10))
    with pytest.raises(DatasetTooSmall):
        train(seq, dataclasses.replace(SMOKE, window_size=5), progress=False)


def test_non_finite_loss_aborts_with_diagnostics(monkeypatch):
    monkeypatch.setattr(trainer, "content_loss", lambda pred, target: torch.tensor(float("nan")))
    with pytest.raises(NonFiniteLoss) as info:
        train(_sequence(), dataclasses.replace(SMOKE, epochs=1, use_perceptual=False), progress=False)
    assert info.value.diagnostics["epoch"] == 1
    assert np.isnan(info.value.diagnostics["content"])


def test_config_hash_ignores_runtime_fields():
    assert SMOKE.config_hash() == dataclasses.replace(SMOKE, device="cuda", num_workers=4).config_hash()
    assert SMOKE.config_hash() != dataclasses.replace(SMOKE, lr=1e-3).config_hash()


def test_config_from_ini(tmp_path):
    path = tmp_path / "train.ini"
    path.write_text("[data]\nresolution = 64\ntrain_frames = none\n[train]\nepochs = 3\nuse_perceptual = no\n")
    config = TrainConfig.from_ini(path, ["epochs=5", "lambda1=2.5"])
    assert config.resolution == 64
    assert config.train_frames is None
    assert config.epochs == 5
    assert config.use_perceptual is False
    assert config.lambda1 == 2.5


def test_perceptual_switch_zeroes_lambda2():
    assert dataclasses.replace(SMOKE, use_perceptual=False).weights.lambda2 == 0.0
    assert SMOKE.weights.lambda2 == cfg.LAMBDA_PERCEPTUAL


@pytest.mark.parametrize(
    "mode, expected",
    [
        ("no_pose_cond", {"conditioning": "none"}),
        ("pose_cond_no_ego_bg_removal", {"remove_ego_bg": False}),
        ("no_perceptual", {"use_perceptual": False}),
        ("extractor_swap", {"extractor": "generic_features"}),
        ("landmarks_cond", {"conditioning": "landmarks"}),
        ("contours_cond", {"conditioning": "contours"}),
        ("train_size_5000", {"train_frames": 5000}),
        ("train_size_2500", {"train_frames": 2500}),
        ("single_frame_no_cond", {"window_size": 1, "conditioning": "none"}),
    ],
)
def test_ablation_flips_one_toggle(mode, expected):
    base = TrainConfig()
    changed = ablation_config(base, mode)
    diff = {k: v for k, v in changed.as_dict().items() if getattr(base, k) != v}
    assert diff == expected


def test_training_size_scales_available_split():
    assert ablation_config(SMOKE, "train_size_5000", 18).train_frames == 12
    assert ablation_config(SMOKE, "train_size_2500", 18).train_frames == 6


def test_ablation_tags_are_distinct():
    base = TrainConfig()
    tags = {ablation_tag(mode, ablation_config(base, mode)) for mode in cfg.ABLATION_MODES}
    assert len(tags) == len(cfg.ABLATION_MODES) == 9
    with pytest.raises(UnknownMode):
        ablation_config(base, "no_discriminator")


def test_ablate_single_frame_runs(tmp_path):
    ckpt, tag = ablate(_sequence(), dataclasses.replace(SMOKE, epochs=1), "single_frame_no_cond", out_dir=tmp_path, progress=False)
    assert tag.startswith("single_frame_no_cond-")
    assert ckpt.window_size == 1
    assert ckpt.train_config["conditioning"] == "none"
    assert (tmp_path / tag / "checkpoint.json").exists()


def _capture_discriminator(monkeypatch):
    built = {}
    build = trainer.build_discriminator

    def _build(config, seed=0):
        built["D"] = build(config, seed)
        built["initial"] = parameter_hash(built["D"])
        return built["D"]

    monkeypatch.setattr(trainer, "build_discriminator", _build)
    return built


def test_training_beats_untrained_validation_score():
    seq = generate_sequence(200, "talking", 0, resolution=64, window_size=3)
    ckpt = train(seq, SMOKE, progress=False)
    assert ckpt.val_score < ckpt.history[0]["val_score"]


def test_generator_step_leaves_discriminator_untouched(monkeypatch):
    built = _capture_discriminator(monkeypatch)
    events = []
    disc_loss, gen_adv = trainer.discriminator_loss, trainer.generator_adversarial_loss

    def _disc_loss(real, fake):
        events.append(("D", parameter_hash(built["D"])))
        return disc_loss(real, fake)

    def _gen_adv(fake):
        events.append(("G", parameter_hash(built["D"])))
        return gen_adv(fake)

    monkeypatch.setattr(trainer, "discriminator_loss", _disc_loss)
    monkeypatch.setattr(trainer, "generator_adversarial_loss", _gen_adv)
    train(_sequence(), dataclasses.replace(SMOKE, epochs=1, use_perceptual=False), progress=False)

    pairs = list(zip(events, events[1:]))
    # D only moves between its own loss and the following generator step
    assert all(b[1] == a[1] for a, b in pairs if a[0] == "G")
    assert any(a[0] == "D" and b[0] == "G" and a[1] != b[1] for a, b in pairs)


def test_validation_leaves_parameters_unchanged():
    seq = _sequence()
    G = build_generator(SMOKE.generator_config(), 0).eval()
    D = build_discriminator(SMOKE.discriminator_config(), 0).eval()
    loader = DataLoader(WindowDataset(seq, "val", SMOKE.window_size), batch_size=2)
    extractor = make_extractor(cfg.FACE_FEATURES)
    before = (parameter_hash(G), parameter_hash(D))

    first = trainer.validate(G, D, loader, extractor, SMOKE.weights)
    second = trainer.validate(G, D, loader, extractor, SMOKE.weights)
    assert (parameter_hash(G), parameter_hash(D)) == before
    assert first == second
    assert np.isfinite(first[0]) and first[1] > 0.0


def test_non_finite_discriminator_loss_aborts_before_its_step(monkeypatch):
    built = _capture_discriminator(monkeypatch)
    monkeypatch.setattr(trainer, "discriminator_loss", lambda real, fake: torch.tensor(float("nan")))
    with pytest.raises(NonFiniteLoss) as info:
        train(_sequence(), dataclasses.replace(SMOKE, epochs=1, use_perceptual=False), progress=False)
    assert info.value.diagnostics["epoch"] == 1
    assert np.isnan(info.value.diagnostics["loss_D"])
    assert parameter_hash(built["D"]) == built["initial"]
