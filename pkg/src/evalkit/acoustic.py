"""Timbre consistency, timbre similarity, reverb consistency and sound fidelity."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .audio import AudioClip, VadMask, WindowSlice, plan_windows, slice_clip, speech_ratio
from .errors import EmptyInput, InsufficientWindows, ZeroNormEmbedding
from .srmr import DEFAULT_CONFIG, SrmrConfig, srmr

log = logging.getLogger(__name__)

FIDELITY_MIN = -0.5
FIDELITY_MAX = 4.5

# timbre label thresholds
TIMBRE_DRIFT_BELOW = 0.85
TIMBRE_SUPERIOR_FROM = 0.93


@dataclass
class EmbeddingSequence:
    vectors: np.ndarray
    windows: list[WindowSlice] = field(default_factory=list)

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=np.float64))
        if self.windows and len(self.windows) != len(self.vectors):
            raise ValueError("one window per embedding required")

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass
class ReverbSeries:
    scores: list[float]
    windows: list[WindowSlice]


@dataclass(frozen=True)
class WindowConfig:
    window_s: float = 3.0
    stride_s: float = 2.0
    min_speech_ratio: float = 0.4  # windows with >60% non-speech are dropped


def _unit_rows(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms == 0) or not np.all(np.isfinite(norms)):
        raise ZeroNormEmbedding("embedding with zero or non-finite norm")
    return vectors / norms[:, None]


def timbre_consistency_single(emb: EmbeddingSequence | np.ndarray) -> float:
    """Mean cosine similarity over all pairs of distinct embeddings.

    Uses ``(||sum u_i||^2 - n) / (n (n - 1))`` for unit vectors ``u_i``, which
    equals the pairwise mean without building the n x n matrix.
    """
    vectors = emb.vectors if isinstance(emb, EmbeddingSequence) else np.atleast_2d(np.asarray(emb, float))
    n = len(vectors)
    if n < 2:
        raise InsufficientWindows(f"need at least 2 embeddings, got {n}")
    u = _unit_rows(vectors)
    total = u.sum(axis=0)
    return float((total @ total - n) / (n * (n - 1)))


def timbre_consistency_multi(per_speaker: Sequence[tuple[str, float]]) -> float:
    if not per_speaker:
        raise EmptyInput("no speakers")
    return float(np.mean([score for _, score in per_speaker]))


def timbre_similarity(emb: EmbeddingSequence | np.ndarray, ref: np.ndarray) -> float:
    vectors = emb.vectors if isinstance(emb, EmbeddingSequence) else np.atleast_2d(np.asarray(emb, float))
    if len(vectors) == 0:
        raise InsufficientWindows("no embeddings")
    ref = np.asarray(ref, dtype=np.float64)
    ref_norm = np.linalg.norm(ref)
    if ref_norm == 0:
        raise ZeroNormEmbedding("reference embedding has zero norm")
    return float(np.mean(_unit_rows(vectors) @ (ref / ref_norm)))


def timbre_label(score: float) -> str:
    if score < TIMBRE_DRIFT_BELOW:
        return "significant timbre drift"
    if score >= TIMBRE_SUPERIOR_FROM:
        return "superior"
    return "acceptable"


def embed_windows(clip: AudioClip, embedder, cfg: WindowConfig = WindowConfig()) -> EmbeddingSequence:
    windows = plan_windows(clip.duration_s, cfg.window_s, cfg.stride_s)
    vectors = [np.asarray(embedder.embed(slice_clip(clip, w)), dtype=np.float64) for w in windows]
    if not vectors:
        return EmbeddingSequence(np.zeros((0, 1)), [])
    return EmbeddingSequence(np.stack(vectors), windows)


def population_std(values: Sequence[float]) -> float:
    values = np.asarray(values, dtype=np.float64)
    return float(np.sqrt(np.mean((values - values.mean()) ** 2)))


def reverb_series(clip: AudioClip, mask: VadMask, cfg: WindowConfig = WindowConfig(),
                  srmr_cfg: SrmrConfig = DEFAULT_CONFIG) -> ReverbSeries:
    scores, kept = [], []
    for w in plan_windows(clip.duration_s, cfg.window_s, cfg.stride_s):
        if speech_ratio(mask, w) < cfg.min_speech_ratio:
            continue
        scores.append(srmr(slice_clip(clip, w), srmr_cfg))
        kept.append(w)
    return ReverbSeries(scores, kept)


def reverb_consistency_from_series(scores: Sequence[float]) -> float:
    if len(scores) < 2:
        raise InsufficientWindows(f"need at least 2 retained windows, got {len(scores)}")
    return population_std(scores)


def reverb_consistency(clip: AudioClip, mask: VadMask, cfg: WindowConfig = WindowConfig(),
                       srmr_cfg: SrmrConfig = DEFAULT_CONFIG) -> float:
    """Population std of windowed SRMR over VAD-retained windows (lower is steadier)."""
    return reverb_consistency_from_series(reverb_series(clip, mask, cfg, srmr_cfg).scores)


def sound_fidelity(clip: AudioClip, backend) -> float:
    raw = float(backend.quality(clip))
    clamped = min(max(raw, FIDELITY_MIN), FIDELITY_MAX)
    if clamped != raw:
        log.warning("fidelity score %.4f clamped to %.1f", raw, clamped)
    return clamped
