"""Deterministic in-process backends.

All mocks are pure functions of their input and seed (the judge mocks also
count repeated identical requests so that repeated trials differ), which makes
whole evaluation runs reproducible without any model.
"""

from __future__ import annotations

import hashlib
import json
import threading
from collections import defaultdict
from typing import Callable, Iterable, Mapping

import numpy as np

from ..audio import AudioClip, VadMask, resample, vad_mask
from ..errors import BackendUnavailable
from ..judge import template_for_prompt
from .base import RetryingMixin, RetryPolicy, check_embed_clip

MOCK_RATE = 16000


def clip_digest(clip: AudioClip) -> str:
    h = hashlib.sha256()
    h.update(str(clip.sample_rate).encode())
    h.update(np.asarray(clip.samples, dtype="<f8").tobytes())
    return h.hexdigest()


def _seeded_rng(*parts) -> np.random.Generator:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


class MockBackend:
    provenance_params: dict = {}

    @property
    def provenance(self) -> dict:
        return {"endpoint": f"mock:{type(self).__name__}", "params": dict(self.provenance_params)}

    def close(self):
        pass


class MockEmbedder(MockBackend):
    """Spectral-profile embedder.

    Log energies in 48 log-spaced bands (70 Hz - 4 kHz), mean-removed, then
    rotated into ``dim`` dimensions by a seeded orthonormal basis. Rotation
    keeps cosines, so voices with different pitch land in separate clusters.
    """

    n_bands = 48

    def __init__(self, seed: int = 0, dim: int = 192):
        self.seed = seed
        self.dim = dim
        self.provenance_params = {"seed": seed, "dim": dim}
        rng = _seeded_rng("embedder", seed)
        q, _ = np.linalg.qr(rng.standard_normal((dim, self.n_bands)))
        self._basis = q
        self._fallback = q[:, 0]
        self.edges = np.geomspace(70.0, 4000.0, self.n_bands + 1)

    def features(self, clip: AudioClip) -> np.ndarray:
        x = resample(clip, MOCK_RATE).samples
        spec = np.abs(np.fft.rfft(x * np.hanning(len(x)))) ** 2
        freqs = np.fft.rfftfreq(len(x), 1.0 / MOCK_RATE)
        band = np.searchsorted(self.edges, freqs, side="right") - 1
        valid = (band >= 0) & (band < self.n_bands)
        energy = np.bincount(band[valid], weights=spec[valid], minlength=self.n_bands)
        v = np.log(energy + 1e-10)
        return v - v.mean()

    def embed(self, clip: AudioClip) -> np.ndarray:
        check_embed_clip(clip)
        v = self.features(clip)
        norm = np.linalg.norm(v)
        if norm < 1e-9:
            return self._fallback.copy()
        return self._basis @ (v / norm)


class EchoAsr(MockBackend):
    """Returns the fixture text registered for the clip's name (or ``""``)."""

    def __init__(self, fixtures: Mapping[str, str] | None = None):
        self.fixtures = dict(fixtures or {})

    def transcribe(self, clip: AudioClip, language: str) -> str:
        if language not in ("zh", "en"):
            raise ValueError(f"language must be zh or en, got {language!r}")
        return self.fixtures.get(clip.name, "")


class ConstantQuality(MockBackend):
    def __init__(self, value: float = 3.8):
        self.value = float(value)
        self.provenance_params = {"value": self.value}

    def quality(self, clip: AudioClip) -> float:
        return self.value


class EnergyQuality(MockBackend):
    """Score rises monotonically with clip RMS, saturating near 4.5."""

    def quality(self, clip: AudioClip) -> float:
        rms = float(np.sqrt(np.mean(np.square(clip.samples)))) if len(clip) else 0.0
        return -0.5 + 5.0 * (1.0 - np.exp(-rms / 0.05))


class MockVad(MockBackend):
    """``mode`` is "speech", "silence" or "energy" (delegates to the energy VAD)."""

    def __init__(self, mode: str = "energy"):
        if mode not in ("speech", "silence", "energy"):
            raise ValueError(mode)
        self.mode = mode
        self.provenance_params = {"mode": mode}

    def vad(self, clip: AudioClip) -> VadMask:
        base = vad_mask(clip)
        if self.mode == "energy":
            return base
        fill = self.mode == "speech"
        return VadMask(np.full(len(base.frame_flags), fill), base.frame_hop_s, base.frame_len_s)


def _judge_payload(template_id: str, score: float) -> dict:
    if template_id == "richness":
        return {"Overall_Impression": "mock", "Expressiveness": "mock analysis",
                "Expressiveness_Score": score, "Final_Recommendation": "Recommended with Reservations"}
    if template_id == "hierarchy":
        return {"Overall_Impression": "mock",
                "Hierarchy_Analysis": {"Emotional_Arc": "mock", "Dynamics_and_Rhythm": "mock", "Scene_Fit": "mock"},
                "Score": score, "Final_Recommendation": "Recommended with Reservations"}
    return {"Overall_Impression": "mock",
            "Detailed_Analysis": {"Coherence_and_Flow": "mock", "Hierarchy_and_Layering": "mock",
                                  "Naturalness": "mock"},
            "Score": score}


def judge_json(template_id: str, score: float) -> str:
    return json.dumps(_judge_payload(template_id, score))


class HashJudge(MockBackend):
    """Seeded pseudo-random judge.

    The n-th identical (clip, prompt) request draws the n-th score from a
    stream keyed by (seed, clip digest, template id), so repeated trials vary
    but a whole run is reproducible.
    """

    levels = np.arange(2.0, 5.0 + 1e-9, 0.5)

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.provenance_params = {"seed": seed}
        self._counts: dict[tuple, int] = defaultdict(int)
        self._lock = threading.Lock()

    def judge(self, clip: AudioClip, prompt: str) -> str:
        if not prompt:
            raise ValueError("empty prompt")
        template = template_for_prompt(prompt)
        tid = template.id if template else "prosody"
        key = (clip_digest(clip), hashlib.sha256(prompt.encode()).hexdigest())
        with self._lock:
            n = self._counts[key]
            self._counts[key] += 1
        rng = _seeded_rng("judge", self.seed, key[0], tid, n)
        return judge_json(tid, float(rng.choice(self.levels)))


class ScriptedJudge(MockBackend, RetryingMixin):
    """Plays back a script of replies; entries that are exceptions are raised.

    ``script`` is either a list consumed in call order, or a callable
    ``(clip, prompt, call_index) -> str | Exception``. Retryable exceptions
    go through the normal retry policy so retry behaviour can be tested.
    """

    def __init__(self, script: Iterable | Callable, max_retries: int = 3,
                 sleep: Callable[[float], None] = lambda s: None):
        self._script = script if callable(script) else list(script)
        self._index = 0
        self._lock = threading.Lock()
        self.name = "mock:ScriptedJudge"
        self._init_retry(RetryPolicy(max_retries, 1.0, 2.0, sleep))

    def _next(self, clip: AudioClip, prompt: str):
        with self._lock:
            i = self._index
            self._index += 1
        if callable(self._script):
            item = self._script(clip, prompt, i)
        elif i < len(self._script):
            item = self._script[i]
        else:
            item = BackendUnavailable("script exhausted")
        if isinstance(item, BaseException):
            raise item
        return item

    def judge(self, clip: AudioClip, prompt: str) -> str:
        if not prompt:
            raise ValueError("empty prompt")
        return self._with_retries(self._next, clip, prompt)


class DownBackend(MockBackend):
    """Always unavailable; stands in for an unreachable endpoint."""

    def __init__(self, kind: str):
        self.kind = kind

    def _fail(self, *args, **kwargs):
        raise BackendUnavailable(f"{self.kind} backend is down")

    embed = transcribe = judge = quality = vad = _fail
