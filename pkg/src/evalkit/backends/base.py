"""Remote backend clients and the JSON wire contract.

Every request is a JSON object::

    {"sample_rate": 16000, "pcm_f32_b64": "...", ...kind-specific fields}

and every reply is a JSON object carrying one kind-specific field
(``embedding``, ``text``, ``response``, ``score`` or ``frames``). The same
objects travel either as an HTTP POST body or as one line on a subprocess's
stdin/stdout.
"""

from __future__ import annotations

import base64
import json
import logging
import math
import os
import select
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import httpx
import numpy as np

from ..audio import AudioClip, VadMask, resample
from ..errors import (
    BackendError,
    BackendMalformedResponse,
    BackendUnavailable,
    DimensionMismatch,
    PayloadTooLarge,
    RateLimited,
)

log = logging.getLogger(__name__)

KINDS = ("embedder", "asr", "judge", "quality", "vad")
DEFAULT_BACKEND_RATE = 16000
EMBED_MIN_S = 0.5
EMBED_MAX_S = 30.0


@dataclass
class BackendEndpoint:
    kind: str
    url: str | None = None
    command: str | list[str] | None = None
    timeout_s: float = 60.0
    max_retries: int = 3
    token_env: str | None = None
    sample_rate: int = DEFAULT_BACKEND_RATE
    max_concurrency: int = 4
    max_payload_bytes: int | None = None
    backoff_base_s: float = 1.0
    backoff_factor: float = 2.0
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if (self.url is None) == (self.command is None):
            raise ValueError("exactly one of url / command must be set")

    @property
    def id(self) -> str:
        target = self.url if self.url else (self.command if isinstance(self.command, str)
                                             else " ".join(self.command))
        return f"{self.kind}:{target}"


# ---------------------------------------------------------------------------
# wire encoding


def encode_audio(clip: AudioClip, rate: int = DEFAULT_BACKEND_RATE) -> dict:
    clip = resample(clip, rate)
    pcm = np.asarray(clip.samples, dtype="<f4").tobytes()
    return {"sample_rate": rate, "pcm_f32_b64": base64.b64encode(pcm).decode("ascii")}


def decode_audio(payload: dict) -> AudioClip:
    raw = base64.b64decode(payload["pcm_f32_b64"])
    return AudioClip(np.frombuffer(raw, dtype="<f4").astype(np.float64), int(payload["sample_rate"]))


def parse_reply(kind: str, reply: Any):
    """Validate one decoded reply object and return the kind's value."""
    if not isinstance(reply, dict):
        raise BackendMalformedResponse(f"{kind}: reply is not a JSON object")
    try:
        if kind == "embedder":
            vec = np.asarray(reply["embedding"], dtype=np.float64)
            if vec.ndim != 1 or vec.size == 0 or not np.all(np.isfinite(vec)):
                raise ValueError("embedding must be a non-empty finite list")
            return vec
        if kind == "asr":
            text = reply["text"]
            if not isinstance(text, str):
                raise ValueError("text must be a string")
            return text
        if kind == "judge":
            text = reply["response"]
            if not isinstance(text, str):
                raise ValueError("response must be a string")
            return text
        if kind == "quality":
            score = reply["score"]
            if isinstance(score, bool) or not math.isfinite(float(score)):
                raise ValueError("score must be a finite number")
            return float(score)
        if kind == "vad":
            frames = reply["frames"]
            if not all(f in (0, 1, True, False) for f in frames):
                raise ValueError("frames must be 0/1")
            return VadMask(np.asarray(frames, dtype=bool), float(reply.get("hop_s", 0.01)),
                           float(reply.get("len_s", 0.025)))
    except (KeyError, TypeError, ValueError) as exc:
        raise BackendMalformedResponse(f"{kind}: {exc}") from None
    raise ValueError(f"unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# transports


class HttpTransport:
    def __init__(self, endpoint: BackendEndpoint):
        self.endpoint = endpoint
        self._client = httpx.Client(timeout=endpoint.timeout_s)

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.endpoint.token_env:
            token = os.environ.get(self.endpoint.token_env)
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def request(self, body: bytes) -> Any:
        try:
            resp = self._client.post(self.endpoint.url, content=body, headers=self._headers())
        except httpx.TimeoutException as exc:
            raise BackendUnavailable(f"{self.endpoint.id}: timeout ({exc})") from None
        except httpx.HTTPError as exc:
            raise BackendUnavailable(f"{self.endpoint.id}: {exc}") from None
        if resp.status_code == 429:
            raise RateLimited(f"{self.endpoint.id}: HTTP 429")
        if resp.status_code >= 500:
            raise BackendUnavailable(f"{self.endpoint.id}: HTTP {resp.status_code}")
        if resp.status_code >= 400:
            err = BackendUnavailable(f"{self.endpoint.id}: HTTP {resp.status_code}")
            err.retryable = False
            raise err
        try:
            return resp.json()
        except ValueError:
            raise BackendMalformedResponse(f"{self.endpoint.id}: reply is not JSON") from None

    def close(self):
        self._client.close()


class SubprocessTransport:
    """One JSON request per line on stdin, one JSON reply per line on stdout."""

    def __init__(self, endpoint: BackendEndpoint):
        self.endpoint = endpoint
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            cmd = self.endpoint.command
            argv = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
            try:
                self._proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                              stderr=subprocess.DEVNULL, bufsize=0)
            except OSError as exc:
                raise BackendUnavailable(f"{self.endpoint.id}: {exc}") from None
        return self._proc

    def request(self, body: bytes) -> Any:
        with self._lock:
            proc = self._ensure()
            try:
                proc.stdin.write(body + b"\n")
                proc.stdin.flush()
            except OSError as exc:
                self._kill()
                raise BackendUnavailable(f"{self.endpoint.id}: {exc}") from None
            ready, _, _ = select.select([proc.stdout], [], [], self.endpoint.timeout_s)
            if not ready:
                self._kill()
                raise BackendUnavailable(f"{self.endpoint.id}: timeout")
            line = proc.stdout.readline()
            if not line:
                self._kill()
                raise BackendUnavailable(f"{self.endpoint.id}: process exited")
        try:
            return json.loads(line)
        except ValueError:
            raise BackendMalformedResponse(f"{self.endpoint.id}: reply is not JSON") from None

    def _kill(self):
        if self._proc is not None:
            self._proc.kill()
            self._proc.wait()
            self._proc = None

    def close(self):
        with self._lock:
            if self._proc is not None:
                try:
                    self._proc.stdin.close()
                    self._proc.wait(timeout=2)
                except (OSError, subprocess.TimeoutExpired):
                    self._proc.kill()
                self._proc = None


# ---------------------------------------------------------------------------
# retries


@dataclass
class RetryPolicy:
    max_retries: int = 3
    base_s: float = 1.0
    factor: float = 2.0
    sleep: Callable[[float], None] = time.sleep

    def delay(self, attempt: int) -> float:
        return self.base_s * self.factor**attempt


class RetryingMixin:
    """Retries BackendUnavailable / RateLimited / malformed replies with exponential backoff."""

    policy: RetryPolicy
    name: str = "backend"

    def _init_retry(self, policy: RetryPolicy, max_concurrency: int = 4):
        self.policy = policy
        self.retries = 0
        self.calls = 0
        self._counter_lock = threading.Lock()
        self._slots = threading.BoundedSemaphore(max(1, max_concurrency))

    def _with_retries(self, fn: Callable, *args):
        last: BackendError | None = None
        with self._counter_lock:
            self.calls += 1
        with self._slots:
            for attempt in range(self.policy.max_retries + 1):
                if attempt:
                    with self._counter_lock:
                        self.retries += 1
                    self.policy.sleep(self.policy.delay(attempt - 1))
                try:
                    return fn(*args)
                except (BackendUnavailable, RateLimited, BackendMalformedResponse) as exc:
                    if not getattr(exc, "retryable", True):
                        raise
                    last = exc
                    log.info("%s attempt %d failed: %s", self.name, attempt + 1, exc)
        if isinstance(last, BackendMalformedResponse):
            raise BackendMalformedResponse(f"{self.name}: {last} (after {self.policy.max_retries} retries)")
        raise BackendUnavailable(f"{self.name}: {last} (after {self.policy.max_retries} retries)")


def check_embed_clip(clip: AudioClip) -> None:
    if not EMBED_MIN_S <= clip.duration_s <= EMBED_MAX_S:
        raise ValueError(f"embedder input must be {EMBED_MIN_S}-{EMBED_MAX_S} s, got {clip.duration_s:.3f} s")


class RemoteBackend(RetryingMixin):
    """Client for one endpoint. Exposes the method matching its kind."""

    def __init__(self, endpoint: BackendEndpoint, sleep: Callable[[float], None] = time.sleep):
        self.endpoint = endpoint
        self.name = endpoint.id
        self.transport = HttpTransport(endpoint) if endpoint.url else SubprocessTransport(endpoint)
        self._init_retry(RetryPolicy(endpoint.max_retries, endpoint.backoff_base_s, endpoint.backoff_factor, sleep),
                         endpoint.max_concurrency)
        self._dim: int | None = None

    @property
    def provenance(self) -> dict:
        return {"endpoint": self.endpoint.id, "params": dict(self.endpoint.params)}

    def _call(self, clip: AudioClip, **extra):
        request = encode_audio(clip, self.endpoint.sample_rate)
        request.update(extra)
        body = json.dumps(request).encode("utf-8")
        if self.endpoint.max_payload_bytes is not None and len(body) > self.endpoint.max_payload_bytes:
            raise PayloadTooLarge(f"{self.name}: payload {len(body)} bytes exceeds cap "
                                  f"{self.endpoint.max_payload_bytes}")
        kind = self.endpoint.kind
        return self._with_retries(lambda: parse_reply(kind, self.transport.request(body)))

    def embed(self, clip: AudioClip) -> np.ndarray:
        check_embed_clip(clip)
        vec = self._call(clip)
        if self._dim is None:
            self._dim = len(vec)
        elif len(vec) != self._dim:
            raise DimensionMismatch(f"{self.name}: dimension changed {self._dim} -> {len(vec)}")
        return vec

    def transcribe(self, clip: AudioClip, language: str) -> str:
        if language not in ("zh", "en"):
            raise ValueError(f"language must be zh or en, got {language!r}")
        return self._call(clip, language=language)

    def judge(self, clip: AudioClip, prompt: str) -> str:
        if not prompt:
            raise ValueError("empty prompt")
        return self._call(clip, prompt=prompt)

    def quality(self, clip: AudioClip) -> float:
        return self._call(clip)

    def vad(self, clip: AudioClip) -> VadMask:
        return self._call(clip)

    def close(self):
        self.transport.close()
