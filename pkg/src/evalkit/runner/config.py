"""Run configuration (TOML or JSON)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..errors import SchemaViolation


@dataclass
class EvalConfig:
    window_s: float = 3.0
    stride_s: float = 2.0
    vad_nonspeech_discard: float = 0.6
    chunk_s: float = 10.0
    prosody_trials: int = 10
    prosody_min_valid: int = 8
    eval_rate: int = 24000
    workers: int = 1
    seed: int = 0
    backends: dict[str, dict[str, Any]] = field(default_factory=dict)
    base_dir: str | None = None

    def __post_init__(self):
        if self.window_s <= 0 or self.stride_s <= 0:
            raise SchemaViolation("window_s and stride_s must be positive", "windows")
        if not 0 <= self.vad_nonspeech_discard <= 1:
            raise SchemaViolation("must be within [0, 1]", "vad_nonspeech_discard")
        if self.prosody_trials < 1:
            raise SchemaViolation("must be >= 1", "prosody_trials")

    @property
    def min_speech_ratio(self) -> float:
        return 1.0 - self.vad_nonspeech_discard

    def public_dict(self) -> dict:
        """Settings that shape the scores (recorded in reports)."""
        d = asdict(self)
        d.pop("base_dir")
        d.pop("workers")
        return d


_KNOWN = {"window_s", "stride_s", "vad_nonspeech_discard", "chunk_s", "prosody_trials", "prosody_min_valid",
          "eval_rate", "workers", "seed", "backends"}


def config_from_dict(data: dict, base_dir: str | Path | None = None) -> EvalConfig:
    flat = dict(data)
    for section in ("windows", "judge_metrics", "run"):
        if isinstance(flat.get(section), dict):
            flat.update(flat.pop(section))
    unknown = sorted(set(flat) - _KNOWN)
    if unknown:
        raise SchemaViolation(f"unknown config keys: {', '.join(unknown)}", unknown[0])
    return EvalConfig(**flat, base_dir=str(base_dir) if base_dir is not None else None)


def load_config(path: str | Path | None) -> EvalConfig:
    if path is None:
        return EvalConfig()
    path = Path(path)
    raw = path.read_bytes()
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw)
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise SchemaViolation(f"cannot parse config: {exc}", str(path)) from None
    return config_from_dict(data, base_dir=path.parent)
