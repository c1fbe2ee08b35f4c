import numpy as np
import pytest

from feddiar.errors import InvalidSpec
from feddiar.synth import (
    SynthSpec,
    TurnInterval,
    make_profiles,
    random_conversation_spec,
    speaker_frame_corpus,
    synth_conversation,
    synth_corpus,
)


def spec_for(turns, num_speakers=2, seed=0, **kwargs):
    return SynthSpec(num_speakers=num_speakers, turns=tuple(turns),
                     speaker_profiles=make_profiles(num_speakers, seed),
                     seed=seed, **kwargs)


def test_single_speaker_no_change_points() -> None:
    spec = spec_for([(0, 2.0)], num_speakers=1)
    assert spec.num_change_points() == 0
    audio, truth = synth_conversation(spec)
    assert truth.change_points_sec == []
    assert audio.duration_sec > 2.0


def test_alternating_turns_three_change_points() -> None:
    spec = spec_for([(0, 1.5), (1, 1.5), (0, 1.5), (1, 1.5)])
    assert spec.num_change_points() == 3
    _, truth = synth_conversation(spec)
    assert len(truth.change_points_sec) == 3
    assert truth.change_points_sec == sorted(truth.change_points_sec)


def test_same_speaker_adjacency_not_a_change() -> None:
    spec = spec_for([(0, 1.0), (0, 1.0), (1, 1.0)])
    _, truth = synth_conversation(spec)
    assert len(truth.change_points_sec) == 1


def test_change_points_sit_in_quiet_gaps() -> None:
    spec = spec_for([(0, 1.5), (1, 1.5), (0, 1.5)])
    audio, truth = synth_conversation(spec)
    sr = audio.sample_rate_hz
    for cp in truth.change_points_sec:
        i = int(round(cp * sr))
        neighborhood = audio.samples[max(0, i - 50):i + 50]
        assert np.max(np.abs(neighborhood)) < 0.01


def test_turn_levels_and_gap_levels() -> None:
    spec = spec_for([(0, 2.0), (1, 2.0)])
    audio, truth = synth_conversation(spec)
    sr = audio.sample_rate_hz
    first = truth.turns[0]
    mid = audio.samples[int((first.start_sec + 0.3) * sr):int((first.end_sec - 0.3) * sr)]
    rms = float(np.sqrt(np.mean(mid ** 2)))
    assert 0.05 < rms < 0.2
    lead = audio.samples[:int(truth.turns[0].start_sec * sr) - 50]
    assert np.max(np.abs(lead)) < 1e-3


def test_truth_turns_cover_requested_durations() -> None:
    spec = spec_for([(0, 1.2), (1, 0.8)])
    _, truth = synth_conversation(spec)
    assert len(truth.turns) == 2
    assert isinstance(truth.turns[0], TurnInterval)
    for (speaker, dur), turn in zip(spec.turns, truth.turns):
        assert turn.speaker_id == speaker
        assert turn.end_sec - turn.start_sec == pytest.approx(dur, abs=0.01)


def test_synthesis_deterministic() -> None:
    spec = spec_for([(0, 1.0), (1, 1.0)], seed=9)
    a_audio, a_truth = synth_conversation(spec)
    b_audio, b_truth = synth_conversation(spec)
    assert np.array_equal(a_audio.samples, b_audio.samples)
    assert a_truth.change_points_sec == b_truth.change_points_sec


def test_invalid_specs_rejected() -> None:
    profiles = make_profiles(2, 0)
    bad = [
        SynthSpec(0, ((0, 1.0),), profiles),
        SynthSpec(2, (), profiles),
        SynthSpec(2, ((2, 1.0),), profiles),
        SynthSpec(2, ((0, -1.0),), profiles),
        SynthSpec(2, ((0, 1.0),), profiles, gap_sec=-0.1),
        SynthSpec(2, ((0, 1.0),), profiles, sample_rate_hz=500),
        SynthSpec(2, ((0, 1.0),), profiles[:1]),
    ]
    for spec in bad:
        with pytest.raises(InvalidSpec):
            synth_conversation(spec)


def test_profiles_distinct_and_seeded() -> None:
    a = make_profiles(4, seed=1)
    b = make_profiles(4, seed=1)
    assert a == b
    f0s = [p.f0_hz for p in a]
    assert len(set(f0s)) == 4
    assert all(80.0 < f0 < 200.0 for f0 in f0s)


def test_random_spec_change_count_in_range() -> None:
    for seed in range(6):
        spec = random_conversation_spec(num_speakers=3, seed=seed)
        assert 3 <= spec.num_change_points() <= 20
        assert all(t[0] in range(3) for t in spec.turns)
        _, truth = synth_conversation(spec)
        assert len(truth.change_points_sec) == spec.num_change_points()


def test_random_spec_validation() -> None:
    with pytest.raises(InvalidSpec):
        random_conversation_spec(num_speakers=1, seed=0)
    with pytest.raises(InvalidSpec):
        random_conversation_spec(num_speakers=2, seed=0, min_changes=5, max_changes=4)


def test_corpus_seeded_and_varied() -> None:
    corpus = synth_corpus(3, 2, seed=5)
    again = synth_corpus(3, 2, seed=5)
    assert len(corpus) == 3
    for (a_audio, a_truth), (b_audio, b_truth) in zip(corpus, again):
        assert np.array_equal(a_audio.samples, b_audio.samples)
        assert a_truth.change_points_sec == b_truth.change_points_sec
    assert not np.array_equal(corpus[0][0].samples[:1000], corpus[1][0].samples[:1000])


def test_speaker_frame_corpus_shapes() -> None:
    corpus = speaker_frame_corpus(3, seed=2, seconds_per_speaker=2.0)
    assert sorted(corpus) == [0, 1, 2]
    for rows in corpus.values():
        assert rows.ndim == 2
        assert rows.shape[1] == 12
        assert rows.shape[0] > 100
    again = speaker_frame_corpus(3, seed=2, seconds_per_speaker=2.0)
    assert all(np.array_equal(corpus[k], again[k]) for k in corpus)
    assert not np.allclose(corpus[0].mean(axis=0), corpus[1].mean(axis=0), atol=0.1)
