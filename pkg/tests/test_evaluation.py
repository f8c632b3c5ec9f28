import json
import math

import numpy as np
import pandas as pd
import pytest

import egofront.config as cfg
from egofront.errors import LengthMismatch, SequenceTooShort, ShapeMismatch
from egofront.evaluation import (
    PhotometricReport,
    benchmark_latency,
    fit_latency_model,
    mean_frame_predictor,
    per_pixel_error,
    photometric_error,
    realtime_resolution_limit,
    sequence_report,
    split_report,
)
import egofront.evaluation as evaluation
from egofront.model import DiscriminatorConfig, GeneratorConfig, ModelCheckpoint, build_generator
from egofront.synthgen import generate_sequence

TOL = 1e-9


def _frames(length, res=8, seed=0):
    return np.random.default_rng(seed).integers(0, 256, size=(length, res, res, 3), dtype=np.uint8)


def _loop_error(pred, gt):
    total = 0.0
    h, w, _ = pred.shape
    for y in range(h):
        for x in range(w):
            total += math.sqrt(sum((float(pred[y, x, c]) - float(gt[y, x, c])) ** 2 for c in range(3)))
    return total / (h * w)


def test_black_versus_white_is_maximal():
    black = np.zeros((4, 4, 3), dtype=np.uint8)
    white = np.full((4, 4, 3), 255, dtype=np.uint8)
    assert photometric_error(black, white) == pytest.approx(441.673, abs=1e-3)
    assert photometric_error(black, white) == pytest.approx(cfg.MAX_PHOTOMETRIC_ERROR, abs=TOL)
    assert photometric_error(white, white) == 0.0


def test_matches_loop_oracle():
    pred, gt = _frames(2, seed=1)
    assert photometric_error(pred, gt) == pytest.approx(_loop_error(pred, gt), abs=TOL)


def test_per_pixel_error_rejects_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        per_pixel_error(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))
    with pytest.raises(ShapeMismatch):
        per_pixel_error(np.zeros((4, 4)), np.zeros((4, 4)))


def test_alternating_errors_mean_and_population_std():
    gt = np.full((6, 4, 4, 3), 100, dtype=np.uint8)
    pred = gt.copy()
    pred[::2] += np.array([30, 40, 0], dtype=np.uint8)
    report = sequence_report(pred, gt)
    assert np.allclose(report.per_frame_error, [50, 0, 50, 0, 50, 0])
    assert report.mean == pytest.approx(25.0)
    assert report.std == pytest.approx(25.0)


def test_triangle_inequality():
    a, b, c = _frames(5, seed=2), _frames(5, seed=3), _frames(5, seed=4)
    ab = sequence_report(a, b).per_frame_error
    bc = sequence_report(b, c).per_frame_error
    ac = sequence_report(a, c).per_frame_error
    assert np.all(ac <= ab + bc + TOL)


def test_heatmap_mean_equals_report_mean():
    report = sequence_report(_frames(7, seed=5), _frames(7, seed=6))
    assert report.heatmap.shape == (8, 8)
    assert report.heatmap.mean() == pytest.approx(report.mean, abs=1e-9)


def test_sequence_report_length_checks():
    with pytest.raises(LengthMismatch):
        sequence_report(_frames(3), _frames(4))
    with pytest.raises(SequenceTooShort):
        sequence_report(_frames(0), _frames(0))
    with pytest.raises(ValueError):
        PhotometricReport(np.array([]), 0.0, 0.0, np.zeros((2, 2)))


def test_sequence_report_writes_outputs(tmp_path):
    report = sequence_report(
        _frames(4, seed=7), _frames(4, seed=8), out_dir=tmp_path, per_frame_heatmaps=True, plot_figures=True, meta={"split": "test"}
    )
    errors = pd.read_csv(tmp_path / "frame_errors.csv")
    assert list(errors.columns) == ["frame", "error"]
    assert np.allclose(errors["error"], report.per_frame_error)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["mean"] == pytest.approx(report.mean)
    assert summary["frames"] == 4 and summary["split"] == "test"
    assert (tmp_path / "heatmap.png").exists()
    assert len(list((tmp_path / "heatmaps").glob("*.png"))) == 4
    assert (tmp_path / "error_curve.png").exists()


def test_mean_frame_predictor():
    frames = np.stack([np.zeros((2, 2, 3)), np.full((2, 2, 3), 10.0)]).astype(np.uint8)
    out = mean_frame_predictor(frames, 3)
    assert out.shape == (3, 2, 2, 3)
    assert np.all(out == 5)


def test_split_report_on_untrained_generator():
    seq = generate_sequence(20, "talking", 0, resolution=64, window_size=3, splits=(10, 14))
    G = build_generator(GeneratorConfig.for_resolution(64, window_size=3, width_divisor=16))
    report = split_report(seq, G)
    assert len(report.per_frame_error) == 6
    assert report.meta["split"] == "test"
    assert 0.0 < report.mean <= cfg.MAX_PHOTOMETRIC_ERROR


def test_benchmark_latency_schema(tmp_path):
    G = build_generator(GeneratorConfig.for_resolution(64, window_size=3, width_divisor=16))
    result = benchmark_latency(G, frames=50, repeats=2, sequences=1, work_dir=tmp_path)
    assert result["resolution"] == 64
    assert result["frames"] == 50
    assert len(result["runs"]) == 2
    assert result["mean_ms"] > 0.0
    assert isinstance(result["realtime"], bool)
    assert list(tmp_path.iterdir()) == []
    with pytest.raises(SequenceTooShort):
        benchmark_latency(G, frames=49)


def test_benchmark_latency_uses_checkpoint_conditioning(tmp_path, monkeypatch):
    gen_config = GeneratorConfig.for_resolution(64, window_size=1, width_divisor=16)
    ckpt = ModelCheckpoint(
        generator_state=build_generator(gen_config).state_dict(),
        discriminator_state={},
        generator_config=gen_config,
        discriminator_config=DiscriminatorConfig(window_size=1),
        config_hash="0" * 64,
        epoch=1,
        val_score=0.0,
        train_config={"conditioning": cfg.NO_CONDITIONING},
    )
    modes = []
    render = evaluation.conditioning_track

    def recording(seq, mode, pose_track=None):
        modes.append(mode)
        return render(seq, mode, pose_track)

    monkeypatch.setattr(evaluation, "conditioning_track", recording)
    result = benchmark_latency(ckpt, frames=50, repeats=1, sequences=1, work_dir=tmp_path)
    assert result["conditioning"] == cfg.NO_CONDITIONING
    assert modes == [cfg.NO_CONDITIONING]
    assert len(result["runs"]) == 1

    result = benchmark_latency(ckpt, frames=50, repeats=1, sequences=1, mode=cfg.NEUTRAL_HEAD, work_dir=tmp_path)
    assert result["conditioning"] == cfg.NEUTRAL_HEAD
    assert modes[-1] == cfg.NEUTRAL_HEAD


def _runs(intercept, slope):
    rows = []
    for res in (64, 128, 256):
        for r in range(3):
            rows.append({"resolution": res, "repeat": r, "ms_per_frame": intercept + slope * res**2 / 1e6})
    return pd.DataFrame(rows)


def test_latency_model_and_realtime_limit():
    model = fit_latency_model(_runs(5.0, 20.0))
    assert model.params["const"] == pytest.approx(5.0)
    assert model.params["megapixels"] == pytest.approx(20.0)
    assert realtime_resolution_limit(model) == math.floor(math.sqrt(35.0 / 20.0 * 1e6))
    assert realtime_resolution_limit(fit_latency_model(_runs(50.0, 1.0))) == 0
    assert realtime_resolution_limit(fit_latency_model(_runs(5.0, -1.0))) is None
    with pytest.raises(ValueError):
        fit_latency_model(pd.DataFrame({"resolution": [64]}))
