"""Per-clip orchestration of the seven metrics."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from ..acoustic import (
    WindowConfig,
    embed_windows,
    reverb_consistency_from_series,
    reverb_series,
    sound_fidelity,
    timbre_consistency_multi,
    timbre_consistency_single,
)
from ..audio import AudioClip, SpeakerTurnManifest, concat_speaker_stream, load_wav, resample
from ..backends import Backends, external_vad
from ..errors import BackendError, EvalKitError, MissingAlignment, NonPositiveDuration
from ..judge import hierarchy_score, plan_chunks, prosody_score, richness_score
from ..text import Transcript, content_accuracy
from .config import EvalConfig
from .manifest import TestCase

log = logging.getLogger(__name__)

METRICS = ("timbre_consistency", "reverb_consistency", "sound_fidelity", "content_error_rate",
           "prosody", "richness", "hierarchy")
BACKEND_METRICS = ("timbre_consistency", "sound_fidelity", "content_error_rate", "prosody", "richness",
                   "hierarchy")
TIMINGS_FILE = "timings.json"


@dataclass
class ClipUnderTest:
    case_id: str
    audio_path: Path
    manifest_path: Path | None = None
    inference_time_s: float | None = None


@dataclass
class MetricReport:
    case_id: str
    model: str = ""
    scenario: str = ""
    challenge: str = ""
    language: str = ""
    num_speakers: int = 1
    duration_s: float = 0.0
    values: dict[str, float | None] = field(default_factory=dict)
    status: dict[str, str] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    details: dict[str, Any] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def rtf(self) -> float | None:
        return self.values.get("rtf")

    def ok(self, metric: str) -> bool:
        return self.status.get(metric) == "ok"

    @property
    def failed_metrics(self) -> list[str]:
        return [m for m, s in self.status.items() if s != "ok"]

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id, "model": self.model, "scenario": self.scenario,
            "challenge": self.challenge, "language": self.language, "num_speakers": self.num_speakers,
            "duration_s": self.duration_s, "values": self.values, "status": self.status,
            "errors": self.errors, "details": self.details, "warnings": self.warnings,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def rtf(inference_time_s: float, audio_duration_s: float) -> float:
    """Real-time factor: inference time over generated audio duration."""
    if inference_time_s <= 0 or audio_duration_s <= 0:
        raise NonPositiveDuration(f"need positive times, got {inference_time_s}, {audio_duration_s}")
    return inference_time_s / audio_duration_s


def discover_clip(case: TestCase, audio_dir: str | Path, timings: dict | None = None) -> ClipUnderTest:
    """``<id>.wav`` plus optional ``<id>.align.json`` and a ``timings.json`` entry."""
    audio_dir = Path(audio_dir)
    align = audio_dir / f"{case.id}.align.json"
    t = (timings or {}).get(case.id)
    return ClipUnderTest(case.id, audio_dir / f"{case.id}.wav", align if align.exists() else None,
                         float(t) if t is not None else None)


def load_timings(audio_dir: str | Path) -> dict:
    path = Path(audio_dir) / TIMINGS_FILE
    if not path.exists():
        return {}
    return json.loads(path.read_text(encoding="utf-8"))


def _timbre(clip: AudioClip, case: TestCase, cut: ClipUnderTest, backends: Backends, wcfg: WindowConfig,
            details: dict) -> float:
    if case.num_speakers == 1:
        emb = embed_windows(clip, backends.embedder, wcfg)
        details["timbre_windows"] = len(emb)
        return timbre_consistency_single(emb)
    if cut.manifest_path is None:
        raise MissingAlignment(f"{case.id}: {case.num_speakers} speakers but no alignment manifest")
    turns = SpeakerTurnManifest.load(cut.manifest_path)
    per_speaker = []
    for spk in sorted(turns.speakers):
        stream = concat_speaker_stream(clip, turns, spk)
        per_speaker.append((spk, timbre_consistency_single(embed_windows(stream, backends.embedder, wcfg))))
    details["timbre_per_speaker"] = {spk: a for spk, a in per_speaker}
    return timbre_consistency_multi(per_speaker)


def evaluate_clip(case: TestCase, cut: ClipUnderTest, backends: Backends, config: EvalConfig,
                  model: str = "") -> MetricReport:
    """Compute all seven metrics for one clip.

    A failing metric records its error code and does not stop the others;
    only an unreadable audio file aborts the clip.
    """
    clip = load_wav(cut.audio_path)
    clip = resample(clip, config.eval_rate)
    report = MetricReport(case.id, model, case.scenario, case.challenge or "", case.language, case.num_speakers,
                          round(clip.duration_s, 6))
    wcfg = WindowConfig(config.window_s, config.stride_s, config.min_speech_ratio)
    details = report.details

    def run(name: str, fn: Callable[[], float]):
        try:
            value = float(fn())
        except EvalKitError as exc:
            report.status[name] = exc.code
            report.errors[name] = str(exc)
            report.values[name] = None
            log.warning("%s/%s failed: %s", case.id, name, exc)
            return
        except ValueError as exc:
            report.status[name] = "InvalidInput"
            report.errors[name] = str(exc)
            report.values[name] = None
            log.warning("%s/%s failed: %s", case.id, name, exc)
            return
        report.status[name] = "ok"
        report.values[name] = value

    run("timbre_consistency", lambda: _timbre(clip, case, cut, backends, wcfg, details))

    def reverb():
        mask = external_vad(clip, backends.vad, report.warnings)
        series = reverb_series(clip, mask, wcfg)
        details["reverb_series"] = series.scores
        return reverb_consistency_from_series(series.scores)

    run("reverb_consistency", reverb)
    run("sound_fidelity", lambda: sound_fidelity(clip, backends.quality))
    run("content_error_rate", lambda: content_accuracy(Transcript(case.text, case.language), clip, backends.asr))

    def prosody():
        out = prosody_score(clip, backends.judge, config.prosody_trials, target_text=case.text,
                            min_valid=config.prosody_min_valid)
        details["prosody_trials"] = out.parts
        details["prosody_failed_trials"] = out.failures
        return out.score

    def richness():
        details["richness_chunks"] = [list(c) for c in plan_chunks(clip.duration_s, config.chunk_s,
                                                                    config.chunk_s / 2).chunks]
        out = richness_score(clip, backends.judge, config.chunk_s)
        details["richness_chunk_scores"] = out.parts
        return out.score

    run("prosody", prosody)
    run("richness", richness)
    run("hierarchy", lambda: hierarchy_score(clip, backends.judge).score)

    if cut.inference_time_s is not None:
        run("rtf", lambda: rtf(cut.inference_time_s, clip.duration_s))
    return report


def unreadable_clip(case: TestCase, exc: Exception, model: str = "") -> MetricReport:
    """Report for a clip whose audio could not be loaded: every metric failed."""
    code = exc.code if isinstance(exc, EvalKitError) else "FileNotFound" if isinstance(
        exc, FileNotFoundError) else "IoError"
    log.error("%s: cannot load audio: %s", case.id, exc)
    if isinstance(exc, OSError) and exc.filename:
        message = f"{exc.strerror}: {Path(exc.filename).name}"  # no absolute paths in reports
    else:
        message = str(exc)
    report = MetricReport(case.id, model, case.scenario, case.challenge or "", case.language, case.num_speakers)
    for m in METRICS:
        report.status[m] = code
        report.errors[m] = message
        report.values[m] = None
    return report


def evaluate_all(cases: list[TestCase], audio_dir: str | Path, backends: Backends, config: EvalConfig,
                 model: str = "") -> list[MetricReport]:
    """Evaluate every case (optionally in parallel); reports come back sorted by case id."""
    timings = load_timings(audio_dir)
    cuts = [(case, discover_clip(case, audio_dir, timings)) for case in cases]

    def one(item):
        case, cut = item
        try:
            return evaluate_clip(case, cut, backends, config, model)
        except (OSError, EvalKitError) as exc:
            return unreadable_clip(case, exc, model)

    workers = max(1, int(config.workers))
    if workers == 1:
        reports = [one(item) for item in cuts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(one, cuts))
    return sorted(reports, key=lambda r: r.case_id)


def is_backend_failure(code: str) -> bool:
    return code in {cls.code for cls in _backend_error_classes()}


def _backend_error_classes():
    stack, out = [BackendError], []
    while stack:
        cls = stack.pop()
        out.append(cls)
        stack.extend(cls.__subclasses__())
    return out


def total_backend_failure(reports: list[MetricReport]) -> bool:
    """True when every backend-driven metric of every clip failed with a backend error."""
    if not reports:
        return False
    for r in reports:
        for m in BACKEND_METRICS:
            code = r.status.get(m, "ok")
            if code == "ok" or not is_backend_failure(code):
                return False
    return True
