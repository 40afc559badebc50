from __future__ import annotations

import itertools
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from evalkit.acoustic import (
    EmbeddingSequence,
    WindowConfig,
    embed_windows,
    population_std,
    reverb_consistency,
    reverb_consistency_from_series,
    reverb_series,
    sound_fidelity,
    timbre_consistency_multi,
    timbre_consistency_single,
    timbre_label,
    timbre_similarity,
)
from evalkit.audio import AudioClip, VadMask, vad_mask
from evalkit.backends import ConstantQuality, MockEmbedder
from evalkit.errors import EmptyInput, InsufficientWindows, ZeroNormEmbedding
from evalkit.synth import reverberate, voice


def brute_force_timbre(vectors):
    u = [v / np.linalg.norm(v) for v in vectors]
    sims = [float(a @ b) for a, b in itertools.permutations(u, 2)]
    return sum(sims) / len(sims)


@given(hnp.arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 16)),
                  elements=st.floats(-10, 10).filter(lambda v: abs(v) > 1e-3)))
@settings(max_examples=200, deadline=None)
def test_timbre_closed_form_equals_pairwise_mean(vectors):
    assert timbre_consistency_single(vectors) == pytest.approx(brute_force_timbre(vectors), abs=1e-9)


def test_timbre_bounds_and_extremes():
    v = np.array([1.0, 2.0, 3.0])
    assert timbre_consistency_single(np.stack([v, 2 * v, 0.5 * v])) == pytest.approx(1.0)
    assert timbre_consistency_single(np.stack([v, -v])) == pytest.approx(-1.0)
    # n unit vectors summing to zero give the lower bound -1/(n-1)
    e = np.eye(3)
    simplex = e - e.mean(axis=0)
    assert timbre_consistency_single(simplex) == pytest.approx(-0.5)


def test_timbre_errors():
    with pytest.raises(InsufficientWindows):
        timbre_consistency_single(np.ones((1, 4)))
    with pytest.raises(ZeroNormEmbedding):
        timbre_consistency_single(np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(EmptyInput):
        timbre_consistency_multi([])


def test_timbre_multi_is_mean_over_speakers():
    assert timbre_consistency_multi([("a", 0.9), ("b", 0.7), ("c", 0.8)]) == pytest.approx(0.8)


def test_timbre_similarity_to_reference():
    ref = np.array([1.0, 0.0])
    emb = EmbeddingSequence(np.array([[1.0, 0.0], [0.0, 2.0]]))
    assert timbre_similarity(emb, ref) == pytest.approx(0.5)
    with pytest.raises(ZeroNormEmbedding):
        timbre_similarity(emb, np.zeros(2))


@pytest.mark.parametrize("score,label", [(0.84, "significant timbre drift"), (0.85, "acceptable"),
                                         (0.9299, "acceptable"), (0.93, "superior"), (0.99, "superior")])
def test_timbre_label(score, label):
    assert timbre_label(score) == label


def test_embed_windows_follows_plan():
    clip = AudioClip(voice(10.9, 150, rate=16000), 16000)
    emb = embed_windows(clip, MockEmbedder(), WindowConfig(3, 2))
    assert [w.start_s for w in emb.windows] == [0, 2, 4, 6, pytest.approx(7.9)]
    assert emb.vectors.shape == (5, 192)


def test_stable_voice_scores_higher_than_drifting_voice():
    rate = 16000
    steady = AudioClip(voice(12, 150, rate=rate, seed=1), rate)
    drift = AudioClip(np.concatenate([voice(6, 110, rate=rate, seed=2), voice(6, 230, rate=rate, seed=3)]), rate)
    emb = MockEmbedder()
    a = timbre_consistency_single(embed_windows(steady, emb))
    b = timbre_consistency_single(embed_windows(drift, emb))
    assert a > b


# --- reverb consistency ------------------------------------------------------


def test_population_std_hand_values():
    assert population_std([1, 2, 3]) == pytest.approx(np.sqrt(2 / 3))
    assert population_std([2.0, 2.0, 2.0]) == 0.0
    assert population_std([5.0]) == 0.0


def test_constant_series_is_exactly_zero():
    assert reverb_consistency_from_series([2.0, 2.0, 2.0]) == 0.0


def test_series_needs_two_windows():
    with pytest.raises(InsufficientWindows):
        reverb_consistency_from_series([1.0])


def test_vad_gating_drops_silent_windows():
    rate = 16000
    x = np.concatenate([voice(6, 150, rate=rate), np.zeros(6 * rate)])
    clip = AudioClip(x, rate)
    series = reverb_series(clip, vad_mask(clip), WindowConfig(3, 2, 0.4))
    assert all(w.end_s <= 7.5 for w in series.windows)
    assert len(series.scores) >= 2
    all_speech = VadMask(np.ones(len(vad_mask(clip).frame_flags), dtype=bool))
    assert len(reverb_series(clip, all_speech, WindowConfig(3, 2, 0.4)).scores) == 5


def test_mixed_reverb_is_less_consistent():
    rate = 16000
    x = voice(12, 150, rate=rate, seed=4)
    wet = reverberate(x, 1.0, rate, seed=4)
    wet *= np.max(np.abs(x)) / np.max(np.abs(wet))
    mask_all = VadMask(np.ones(2400, dtype=bool))
    half = 6 * rate
    mixed = AudioClip(np.concatenate([x[:half], wet[half:]]), rate)
    dry_only = reverb_consistency(AudioClip(x, rate), mask_all)
    mixed_std = reverb_consistency(mixed, mask_all)
    assert mixed_std > dry_only


# --- fidelity -------------------------------------------------------------------


def test_fidelity_clamps_and_warns(caplog):
    clip = AudioClip(np.ones(100), 16000)
    assert sound_fidelity(clip, ConstantQuality(3.2)) == 3.2
    with caplog.at_level(logging.WARNING):
        assert sound_fidelity(clip, ConstantQuality(7.0)) == 4.5
    assert "clamped" in caplog.text
    assert sound_fidelity(clip, ConstantQuality(-3.0)) == -0.5
