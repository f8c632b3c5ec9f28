import numpy as np
import pytest

from egofront.errors import LengthTooShort, NoTransientFound
from egofront.sync import (
    SyncOffset,
    align,
    detect_transient,
    make_flash_pair,
    synchronize_sequence,
    trim_pair,
)
from egofront.synthgen import generate_sequence, simulate_capture


def _dark_stream(length=100, seed=0, size=8):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 60, size=(length, size, size, 3), dtype=np.uint8)


def test_detects_single_white_frame():
    frames = np.zeros((100, 8, 8, 3), dtype=np.uint8)
    frames[42] = 255
    assert detect_transient(frames) == 42


def test_detects_first_event_only():
    frames = _dark_stream()
    frames[30] = 255
    frames[70] = 255
    assert detect_transient(frames) == 30


def test_bright_but_not_sudden_frames_are_ignored():
    lum = np.linspace(150.0, 230.0, 50)
    with pytest.raises(NoTransientFound):
        detect_transient(lum)


def test_all_black_stream_raises():
    with pytest.raises(NoTransientFound):
        detect_transient(np.zeros((30, 4, 4, 3), dtype=np.uint8))


def test_constructed_pair_offset():
    a, b = make_flash_pair(_dark_stream(), 20, 7)
    result = align(a, b)
    assert result.offset_frames == -7
    assert 0.0 < result.confidence <= 1.0


def test_offset_is_antisymmetric():
    a, b = make_flash_pair(_dark_stream(seed=3), 15, 11)
    assert align(a, b).offset_frames == -align(b, a).offset_frames


def test_recovers_random_offsets():
    rng = np.random.default_rng(0)
    hits = 0
    for trial in range(100):
        offset = int(rng.integers(-20, 21))
        flash = int(rng.integers(1, 78))
        a, b = make_flash_pair(_dark_stream(seed=trial), flash, abs(offset))
        if offset > 0:
            a, b = b, a
        hits += align(a, b).offset_frames == offset
    assert hits == 100


def test_make_flash_pair_rejects_edge_flash():
    with pytest.raises(ValueError):
        make_flash_pair(_dark_stream(length=10), 0, 1)
    with pytest.raises(ValueError):
        make_flash_pair(_dark_stream(length=10), 9, 0)


def test_trim_pair_aligns_equal_indices():
    stream = np.arange(20)
    ta, tb = trim_pair(stream, stream[3:], 3)
    assert np.array_equal(ta, tb)
    assert len(ta) == 17
    ta, tb = trim_pair(stream[5:], stream, -5)
    assert np.array_equal(ta, tb)
    with pytest.raises(LengthTooShort):
        trim_pair(stream[:3], stream[:3], 5)


def test_sync_offset_confidence_range():
    with pytest.raises(ValueError):
        SyncOffset(offset_frames=0, confidence=1.5)


def test_synchronize_simulated_capture():
    seq = generate_sequence(30, "talking", 1, window_size=3)
    raw = simulate_capture(seq, lag=4, flash_frame=2)
    aligned, offset = synchronize_sequence(raw)
    assert offset.offset_frames == -4
    assert len(aligned) == 30 - 7
    assert np.array_equal(aligned.front_frames, seq.front_frames[3 : 3 + len(aligned)])
    assert np.array_equal(aligned.ego_frames, seq.ego_frames[3 : 3 + len(aligned)])
    assert aligned.poses.equals(seq.poses.iloc[3 : 3 + len(aligned)].reset_index(drop=True).rename_axis("frame"))
