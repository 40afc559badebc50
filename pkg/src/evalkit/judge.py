"""Judge-scored metrics: prosodic coherence, expressive richness, expressive hierarchy."""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Any

import numpy as np

from .audio import AudioClip, WindowSlice, slice_clip
from .errors import (
    BackendMalformedResponse,
    InsufficientTrials,
    MalformedResponse,
    TooManyMalformedResponses,
)

log = logging.getLogger(__name__)

SCORE_MIN = 1.0
SCORE_MAX = 5.0
SCORE_STEP = 0.5
SNAP_TOLERANCE = 0.05

CHUNK_S = 10.0
MIN_TAIL_CHUNK_S = 5.0
PROSODY_TRIALS = 10
PROSODY_MIN_VALID = 8
MALFORMED_RETRIES = 3


@dataclass(frozen=True)
class JudgePromptTemplate:
    id: str
    body: str
    required_fields: tuple[str, ...]
    score_field: str
    score_range: tuple[float, float] = (SCORE_MIN, SCORE_MAX)
    score_step: float = SCORE_STEP


@dataclass
class JudgeResponse:
    score: float
    analysis: dict[str, Any]
    raw: str


@dataclass(frozen=True)
class ChunkPlan:
    chunks: list[tuple[float, float]]

    def __len__(self) -> int:
        return len(self.chunks)


_SCHEMAS = {
    "prosody": (("Overall_Impression", "Detailed_Analysis", "Score"), "Score"),
    "hierarchy": (("Overall_Impression", "Hierarchy_Analysis", "Score", "Final_Recommendation"), "Score"),
    "richness": (("Overall_Impression", "Expressiveness", "Expressiveness_Score", "Final_Recommendation"),
                 "Expressiveness_Score"),
}
TEMPLATE_IDS = tuple(_SCHEMAS)


@lru_cache(maxsize=None)
def load_template(template_id: str) -> JudgePromptTemplate:
    if template_id not in _SCHEMAS:
        raise KeyError(f"unknown template {template_id!r}; expected one of {TEMPLATE_IDS}")
    body = resources.files("evalkit.prompts").joinpath(f"{template_id}.txt").read_text(encoding="utf-8")
    required, score_field = _SCHEMAS[template_id]
    return JudgePromptTemplate(template_id, body, required, score_field)


def template_for_prompt(prompt: str) -> JudgePromptTemplate | None:
    for tid in TEMPLATE_IDS:
        t = load_template(tid)
        if prompt.startswith(t.body):
            return t
    return None


def build_prompt(template: JudgePromptTemplate, target_text: str | None = None) -> str:
    if target_text and template.id == "prosody":
        return f"{template.body}\nTarget Text:\n{target_text}\n"
    return template.body


# ---------------------------------------------------------------------------
# parsing

_FENCE = re.compile(r"^```[A-Za-z0-9_-]*\s*\n(.*?)\n?```$", re.S)


def snap_score(value: float, template: JudgePromptTemplate) -> float:
    """Snap to the score grid when within ``SNAP_TOLERANCE`` of a grid point."""
    lo, hi = template.score_range
    step = template.score_step
    snapped = lo + round((value - lo) / step) * step
    if abs(value - snapped) > SNAP_TOLERANCE + 1e-9:
        raise MalformedResponse(f"score {value} is not on the {step} grid")
    if not lo <= snapped <= hi:
        raise MalformedResponse(f"score {value} outside [{lo}, {hi}]")
    return float(snapped)


def parse_judge_response(raw: str, template: JudgePromptTemplate) -> JudgeResponse:
    text = raw.strip()
    fenced = _FENCE.match(text)
    if fenced:
        text = fenced.group(1).strip()
    try:
        payload = json.loads(text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedResponse(f"not JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise MalformedResponse("expected a JSON object")
    missing = [f for f in template.required_fields if f not in payload]
    if missing:
        raise MalformedResponse(f"missing fields: {', '.join(missing)}")

    value = payload[template.score_field]
    if isinstance(value, bool):
        raise MalformedResponse("score is a boolean")
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise MalformedResponse(f"score {value!r} is not a number") from None
    if not math.isfinite(value):
        raise MalformedResponse("score is not finite")
    score = snap_score(value, template)
    analysis = {k: v for k, v in payload.items() if k != template.score_field}
    return JudgeResponse(score, analysis, raw)


# ---------------------------------------------------------------------------
# scoring


def plan_chunks(duration_s: float, chunk_s: float = CHUNK_S, min_tail_s: float = MIN_TAIL_CHUNK_S) -> ChunkPlan:
    """Back-to-back chunks; a short final remainder is merged into the previous chunk."""
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    eps = 1e-9
    n_full = int(math.floor(duration_s / chunk_s + eps))
    if n_full == 0:
        return ChunkPlan([(0.0, float(duration_s))])
    chunks = [(k * chunk_s, (k + 1) * chunk_s) for k in range(n_full)]
    rem = duration_s - n_full * chunk_s
    if rem + eps >= min_tail_s:
        chunks.append((n_full * chunk_s, float(duration_s)))
    elif rem > eps:
        chunks[-1] = (chunks[-1][0], float(duration_s))
    return ChunkPlan(chunks)


@dataclass
class JudgeOutcome:
    score: float
    parts: list[float] = field(default_factory=list)
    failures: int = 0


def judge_once(clip: AudioClip, judge, template: JudgePromptTemplate, prompt: str | None = None,
               retries: int = MALFORMED_RETRIES) -> JudgeResponse:
    """One judged call; malformed replies are re-requested up to ``retries`` times."""
    prompt = prompt or template.body
    last: Exception | None = None
    for attempt in range(retries + 1):
        try:
            return parse_judge_response(judge.judge(clip, prompt), template)
        except (MalformedResponse, BackendMalformedResponse) as exc:
            last = exc
            log.info("malformed %s response (attempt %d): %s", template.id, attempt + 1, exc)
    raise MalformedResponse(f"{template.id}: {last}")


def richness_score(clip: AudioClip, judge, chunk_s: float = CHUNK_S,
                   retries: int = MALFORMED_RETRIES) -> JudgeOutcome:
    """Mean of per-chunk expressiveness scores over back-to-back chunks."""
    template = load_template("richness")
    scores = []
    for start, end in plan_chunks(clip.duration_s, chunk_s, chunk_s / 2).chunks:
        chunk = slice_clip(clip, WindowSlice(start, end))
        try:
            scores.append(judge_once(chunk, judge, template, retries=retries).score)
        except MalformedResponse as exc:
            raise TooManyMalformedResponses(f"chunk [{start}, {end}): {exc}") from None
    return JudgeOutcome(float(np.mean(scores)), scores)


def hierarchy_score(clip: AudioClip, judge, retries: int = MALFORMED_RETRIES) -> JudgeOutcome:
    """Single judged pass over the whole clip."""
    resp = judge_once(clip, judge, load_template("hierarchy"), retries=retries)
    return JudgeOutcome(resp.score, [resp.score])


def prosody_score(clip: AudioClip, judge, n_trials: int = PROSODY_TRIALS, target_text: str | None = None,
                  min_valid: int = PROSODY_MIN_VALID, retries: int = MALFORMED_RETRIES) -> JudgeOutcome:
    """Mean over independent prosody trials; at least ``min_valid`` must succeed."""
    template = load_template("prosody")
    prompt = build_prompt(template, target_text)
    scores, failures = [], 0
    for _ in range(n_trials):
        try:
            scores.append(judge_once(clip, judge, template, prompt, retries=retries).score)
        except MalformedResponse:
            failures += 1
    needed = min(min_valid, n_trials)
    if len(scores) < needed:
        raise InsufficientTrials(f"{len(scores)} valid of {n_trials} trials (need {needed})")
    return JudgeOutcome(float(np.mean(scores)), scores, failures)
