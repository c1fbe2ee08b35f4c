"""Shared fixtures: one small synthesized conversation and its frontend
products, reused across test modules because synthesis plus MFCC is the
slowest part of the suite.
"""

import numpy as np
import pytest

from feddiar.frontend import MfccConfig, compute_mfcc, frame_signal
from feddiar.silence import SilenceConfig, detect_quasi_silences, estimate_noise_profile, spectral_subtract
from feddiar.synth import random_conversation_spec, synth_conversation


@pytest.fixture(scope="session")
def small_conv():
    spec = random_conversation_spec(num_speakers=2, seed=7,
                                    min_changes=3, max_changes=5)
    return synth_conversation(spec)


@pytest.fixture(scope="session")
def small_conv_frontend(small_conv):
    audio, _ = small_conv
    mfcc_cfg = MfccConfig()
    frames = frame_signal(audio, mfcc_cfg)
    features = compute_mfcc(frames, mfcc_cfg)
    silence_cfg = SilenceConfig()
    noise = estimate_noise_profile(frames, silence_cfg, mfcc_cfg)
    energy = spectral_subtract(frames, noise, mfcc_cfg)
    silences = detect_quasi_silences(energy, silence_cfg)
    return features, silences


@pytest.fixture
def rng():
    return np.random.default_rng(123)
