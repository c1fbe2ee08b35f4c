import numpy as np
import pytest

from feddiar.errors import DimensionMismatch, TooFewFrames
from feddiar.frontend import AudioSignal, FrameSequence, MfccConfig, frame_signal
from feddiar.silence import (
    NoiseProfile,
    SilenceConfig,
    detect_quasi_silences,
    estimate_noise_profile,
    silent_frame_mask,
    spectral_subtract,
    write_region_csv,
)


def repeated_frame_sequence(frame, n):
    frames = np.tile(frame, (n, 1))
    return FrameSequence(frames, frame.shape[0], frame.shape[0] // 2, 16000)


def test_noise_profile_needs_ten_frames() -> None:
    frame = np.random.default_rng(0).standard_normal(400)
    with pytest.raises(TooFewFrames):
        estimate_noise_profile(repeated_frame_sequence(frame, 9), SilenceConfig())
    estimate_noise_profile(repeated_frame_sequence(frame, 10), SilenceConfig())


def test_noise_profile_shape() -> None:
    frame = np.random.default_rng(1).standard_normal(400)
    prof = estimate_noise_profile(repeated_frame_sequence(frame, 20), SilenceConfig())
    assert prof.magnitude_spectrum_estimate.shape == (257,)
    assert np.all(prof.magnitude_spectrum_estimate >= 0)
    assert prof.frames_used == 2


def test_exact_cancellation_gives_zero_energy() -> None:
    # every frame equals the noise estimate, so the residual vanishes
    frame = 0.1 * np.random.default_rng(2).standard_normal(400)
    seq = repeated_frame_sequence(frame, 20)
    prof = estimate_noise_profile(seq, SilenceConfig())
    energy = spectral_subtract(seq, prof)
    assert energy.shape == (20,)
    assert np.max(energy) < 1e-18


def test_zero_profile_keeps_full_spectrum_energy() -> None:
    sig = AudioSignal(0.3 * np.sin(2 * np.pi * 440 * np.arange(8000) / 16000), 16000)
    seq = frame_signal(sig, MfccConfig())
    zero = NoiseProfile(np.zeros(257), 0)
    energy = spectral_subtract(seq, zero)
    assert np.all(energy > 0)


def test_profile_dimension_checked() -> None:
    frame = np.random.default_rng(3).standard_normal(400)
    seq = repeated_frame_sequence(frame, 12)
    with pytest.raises(DimensionMismatch):
        spectral_subtract(seq, NoiseProfile(np.zeros(100), 0))


def test_detects_single_quiet_stretch() -> None:
    track = np.concatenate([np.full(50, 1.0), np.full(30, 1e-9), np.full(50, 1.0)])
    regions = detect_quasi_silences(track, SilenceConfig())
    assert len(regions) == 1
    assert (regions[0].start_frame, regions[0].end_frame) == (50, 79)
    assert len(regions[0]) == 30
    assert regions[0].mean_energy_db < -60.0


def test_short_quiet_runs_dropped() -> None:
    track = np.concatenate([np.full(50, 1.0), np.full(5, 1e-9), np.full(50, 1.0)])
    assert detect_quasi_silences(track, SilenceConfig()) == []


def test_all_zero_track_is_one_region() -> None:
    regions = detect_quasi_silences(np.zeros(40), SilenceConfig())
    assert len(regions) == 1
    assert (regions[0].start_frame, regions[0].end_frame) == (0, 39)


def test_constant_loud_track_has_no_silence() -> None:
    assert detect_quasi_silences(np.ones(200), SilenceConfig()) == []


def test_regions_disjoint_sorted_and_long_enough() -> None:
    rng = np.random.default_rng(4)
    track = np.abs(rng.standard_normal(500)) + 0.5
    for start in (40, 160, 300, 420):
        track[start:start + rng.integers(8, 40)] = 1e-10
    cfg = SilenceConfig()
    regions = detect_quasi_silences(track, cfg)
    last_end = -1
    for r in regions:
        assert r.start_frame > last_end
        assert r.end_frame >= r.start_frame
        assert len(r) >= cfg.min_region_frames
        last_end = r.end_frame
    mask = silent_frame_mask(regions, 500)
    assert mask.sum() == sum(len(r) for r in regions)


def test_region_csv(tmp_path) -> None:
    track = np.concatenate([np.full(20, 1.0), np.full(15, 1e-9), np.full(20, 1.0)])
    regions = detect_quasi_silences(track, SilenceConfig())
    path = tmp_path / "r.csv"
    write_region_csv(path, regions, hop_sec=0.010)
    lines = path.read_text().splitlines()
    assert lines[0] == "start_sec,end_sec,mean_energy_db"
    start, end, _ = lines[1].split(",")
    assert float(start) == pytest.approx(0.20)
    assert float(end) == pytest.approx(0.35)
