"""Synthetic audio for tests, demos and the bundled mini-benchmark.

Nothing here imitates real speech; the signals only need the properties the
metrics react to (a stable harmonic spectrum per voice, syllable-rate
amplitude modulation, optional exponential reverberation).
"""

from __future__ import annotations

import json
import shutil
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import signal

from .audio import AudioClip, Segment, SpeakerTurnManifest, write_wav

FIXTURE_RATE = 24000
MINI_MANIFEST = "mini_manifest.json"


def voice(duration_s: float, f0: float, rate: int = FIXTURE_RATE, seed: int = 0, syllable_hz: float = 4.0,
          n_harmonics: int = 12, noise: float = 0.01, level: float = 0.3) -> np.ndarray:
    """Harmonic tone with slight vibrato, 1/k harmonic roll-off and syllable-rate AM."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * rate))
    t = np.arange(n) / rate
    inst_f0 = f0 * (1.0 + 0.01 * np.sin(2 * np.pi * 5.0 * t + rng.uniform(0, 2 * np.pi)))
    phase = 2 * np.pi * np.cumsum(inst_f0) / rate
    x = np.zeros(n)
    for k in range(1, n_harmonics + 1):
        if k * f0 >= 0.45 * rate:
            break
        x += np.sin(k * phase + rng.uniform(0, 2 * np.pi)) / k
    envelope = 0.5 * (1.0 - np.cos(2 * np.pi * syllable_hz * t))
    x = x * envelope + noise * rng.standard_normal(n)
    return level * x / max(np.max(np.abs(x)), 1e-12)


def am_noise(duration_s: float, rate: int = 16000, seed: int = 0, mod_hz: float = 4.0) -> np.ndarray:
    """White noise with 4 Hz sinusoidal amplitude modulation."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * rate))
    t = np.arange(n) / rate
    return rng.standard_normal(n) * (1.0 + np.sin(2 * np.pi * mod_hz * t)) * 0.1


def exponential_rir(rt60_s: float, rate: int, seed: int = 0) -> np.ndarray:
    """Direct path plus exponentially decaying noise tail (-60 dB at ``rt60_s``)."""
    rng = np.random.default_rng(seed)
    n = int(round(1.2 * rt60_s * rate)) + 1
    t = np.arange(n) / rate
    h = rng.standard_normal(n) * np.exp(-6.907755 * t / rt60_s)
    h[0] = 1.0
    return h / np.sqrt(np.sum(h**2))


def reverberate(x: np.ndarray, rt60_s: float, rate: int, seed: int = 0) -> np.ndarray:
    return signal.fftconvolve(x, exponential_rir(rt60_s, rate, seed))[: len(x)]


# ---------------------------------------------------------------------------
# mini-benchmark fixture

# case id -> (f0 per speaker, rt60 or None, seconds per utterance)
_VOICES = {
    "audiobook_en_01": ([110.0], None, 22.0),
    "podcast_zh_01": ([120.0, 220.0], None, 5.5),
    "news_en_01": ([140.0], None, 21.0),
    "lesson_zh_01": ([200.0], 0.3, 23.0),
    "drama_en_01": ([180.0], None, 20.5),
    "sportscast_zh_01": ([160.0], None, 24.0),
}
# ASR mock output differs from the reference for these cases
_ASR_PERTURB = {
    "news_en_01": ("markets", "market"),
    "lesson_zh_01": ("光合作用", "光和作用"),
}
_TIMINGS = {"audiobook_en_01": 6.6, "news_en_01": 4.2, "drama_en_01": 10.25}


def bundled_manifest() -> Path:
    return Path(str(resources.files("evalkit.data").joinpath(MINI_MANIFEST)))


def make_mini_fixture(out_dir: str | Path, seed: int = 0) -> Path:
    """Write the six mini-benchmark clips plus their side files into ``out_dir``.

    Produces ``<id>.wav``, ``<id>.align.json`` for the two-speaker case,
    ``transcripts.json`` (mock ASR output), ``timings.json``, a copy of the
    manifest as ``cases.json`` and a ready-to-use ``eval.toml``.
    """
    from .runner.manifest import load_manifest

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cases = load_manifest(bundled_manifest())
    transcripts = {}
    for i, case in enumerate(cases):
        f0s, rt60, per_utt = _VOICES[case.id]
        speakers = case.speakers
        parts, segments, t = [], [], 0.0
        for j, utt in enumerate(case.content):
            f0 = f0s[speakers.index(utt.speaker)]
            x = voice(per_utt, f0, seed=seed * 1000 + i * 50 + j)
            segments.append(Segment(utt.speaker, round(t, 3), round(t + per_utt, 3)))
            parts.append(x)
            t += per_utt
        x = np.concatenate(parts)
        if rt60 is not None:
            x = reverberate(x, rt60, FIXTURE_RATE, seed=seed + i)
            x = 0.3 * x / np.max(np.abs(x))
        write_wav(out / f"{case.id}.wav", AudioClip(x, FIXTURE_RATE))
        if case.num_speakers > 1:
            align = SpeakerTurnManifest(segments).to_dict()
            (out / f"{case.id}.align.json").write_text(json.dumps(align, indent=2) + "\n", encoding="utf-8")
        text = case.text
        if case.id in _ASR_PERTURB:
            text = text.replace(*_ASR_PERTURB[case.id])
        transcripts[f"{case.id}.wav"] = text
    (out / "transcripts.json").write_text(json.dumps(transcripts, indent=2, ensure_ascii=False) + "\n",
                                         encoding="utf-8")
    (out / "timings.json").write_text(json.dumps(_TIMINGS, indent=2) + "\n", encoding="utf-8")
    shutil.copyfile(bundled_manifest(), out / "cases.json")
    (out / "eval.toml").write_text(MINI_CONFIG, encoding="utf-8")
    return out


MINI_CONFIG = """\
[windows]
window_s = 3.0
stride_s = 2.0
vad_nonspeech_discard = 0.6

[judge_metrics]
chunk_s = 10.0
prosody_trials = 10
prosody_min_valid = 8

[backends.embedder]
type = "mock"

[backends.asr]
type = "mock"
fixtures = "transcripts.json"

[backends.judge]
type = "mock"

[backends.quality]
type = "mock"

[backends.vad]
type = "none"
"""
