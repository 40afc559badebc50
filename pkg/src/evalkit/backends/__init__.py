"""Pluggable model backends (embedder, ASR, judge, quality, VAD)."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from ..audio import AudioClip, VadMask, vad_mask
from ..errors import BackendError
from .base import KINDS, BackendEndpoint, RemoteBackend, RetryPolicy, decode_audio, encode_audio, parse_reply
from .mock import (
    ConstantQuality,
    DownBackend,
    EchoAsr,
    EnergyQuality,
    HashJudge,
    MockEmbedder,
    MockVad,
    ScriptedJudge,
)

log = logging.getLogger(__name__)

ENV_URLS = {kind: f"EVALKIT_{kind.upper()}_URL" for kind in KINDS}
JUDGE_TOKEN_ENV = "EVALKIT_JUDGE_TOKEN"

__all__ = [
    "Backends", "BackendEndpoint", "RemoteBackend", "RetryPolicy", "build_backend", "build_backends",
    "external_vad", "encode_audio", "decode_audio", "parse_reply",
    "MockEmbedder", "EchoAsr", "HashJudge", "ScriptedJudge", "ConstantQuality", "EnergyQuality", "MockVad",
    "DownBackend",
]


@dataclass
class Backends:
    embedder: Any
    asr: Any
    judge: Any
    quality: Any
    vad: Any = None  # None -> built-in energy VAD

    def provenance(self) -> dict:
        out = {}
        for kind in KINDS:
            b = getattr(self, kind)
            out[kind] = getattr(b, "provenance", None) if b is not None else {"endpoint": "builtin:energy-vad"}
        return out

    def close(self):
        for kind in KINDS:
            b = getattr(self, kind)
            if b is not None and hasattr(b, "close"):
                b.close()


def _endpoint(kind: str, spec: Mapping[str, Any]) -> BackendEndpoint:
    fields = ("url", "command", "timeout_s", "max_retries", "token_env", "sample_rate", "max_concurrency",
              "max_payload_bytes", "backoff_base_s", "backoff_factor", "params")
    kwargs = {k: spec[k] for k in fields if k in spec}
    if kind == "judge":
        kwargs.setdefault("token_env", JUDGE_TOKEN_ENV)
    return BackendEndpoint(kind=kind, **kwargs)


def build_backend(kind: str, spec: Mapping[str, Any] | None = None, seed: int = 0,
                  base_dir: str | Path | None = None):
    """Construct one backend from a config table.

    ``spec["type"]`` selects ``mock`` (default), ``http``, ``subprocess``,
    ``down`` or ``none`` (VAD only: use the built-in energy VAD). An
    ``EVALKIT_<KIND>_URL`` environment variable switches an unconfigured
    backend to HTTP.
    """
    spec = dict(spec or {})
    if "type" not in spec and os.environ.get(ENV_URLS[kind]):
        spec.update(type="http", url=os.environ[ENV_URLS[kind]])
    btype = spec.pop("type", "none" if kind == "vad" else "mock")

    if btype in ("http", "subprocess"):
        if btype == "http":
            spec.pop("command", None)
        else:
            spec.pop("url", None)
        return RemoteBackend(_endpoint(kind, spec))
    if btype == "down":
        return DownBackend(kind)
    if btype == "none":
        if kind != "vad":
            raise ValueError(f"backend type 'none' is only valid for vad, not {kind}")
        return None
    if btype != "mock":
        raise ValueError(f"unknown backend type {btype!r} for {kind}")

    if kind == "embedder":
        return MockEmbedder(seed=seed, dim=int(spec.get("dim", 192)))
    if kind == "asr":
        fixtures = spec.get("fixtures", {})
        if isinstance(fixtures, (str, Path)):
            path = Path(fixtures)
            if not path.is_absolute() and base_dir is not None:
                path = Path(base_dir) / path
            fixtures = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {}
        return EchoAsr(fixtures)
    if kind == "judge":
        return HashJudge(seed=seed)
    if kind == "quality":
        if spec.get("mode", "energy") == "constant":
            return ConstantQuality(float(spec.get("value", 3.8)))
        return EnergyQuality()
    return MockVad(spec.get("mode", "energy"))


def build_backends(specs: Mapping[str, Mapping[str, Any]] | None = None, seed: int = 0,
                   base_dir: str | Path | None = None) -> Backends:
    specs = specs or {}
    built = {kind: build_backend(kind, specs.get(kind), seed, base_dir) for kind in KINDS}
    return Backends(**built)


def external_vad(clip: AudioClip, backend, warnings: list[str] | None = None) -> VadMask:
    """VAD from ``backend``; falls back to the energy VAD if it fails."""
    if backend is None:
        return vad_mask(clip)
    try:
        return backend.vad(clip)
    except BackendError as exc:
        msg = f"external VAD unavailable ({exc.code}); using energy VAD"
        log.warning(msg)
        if warnings is not None:
            warnings.append(msg)
        return vad_mask(clip)
