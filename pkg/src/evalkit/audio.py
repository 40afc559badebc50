"""Audio I/O, resampling, window planning, energy VAD and speaker streams."""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from math import gcd
from pathlib import Path

import numpy as np
from scipy import signal

from .errors import CorruptFile, EmptyInput, OutOfBounds, SchemaViolation, UnknownSpeaker, UnsupportedFormat

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

# energy VAD defaults
VAD_FRAME_S = 0.025
VAD_HOP_S = 0.010
VAD_ABS_FLOOR = 1e-4
VAD_REL_FRACTION = 0.1
VAD_PERCENTILE = 95.0


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int
    name: str = ""

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioClip is mono; got shape %r" % (samples.shape,))
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class WindowSlice:
    start_s: float
    end_s: float
    index: int = 0

    @property
    def length_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class VadMask:
    frame_flags: np.ndarray
    frame_hop_s: float = VAD_HOP_S
    frame_len_s: float = VAD_FRAME_S

    def __post_init__(self):
        object.__setattr__(self, "frame_flags", np.asarray(self.frame_flags, dtype=bool))
        if self.frame_len_s < self.frame_hop_s:
            raise ValueError("frame_len_s must be >= frame_hop_s")

    @property
    def centers_s(self) -> np.ndarray:
        return np.arange(len(self.frame_flags)) * self.frame_hop_s + self.frame_len_s / 2

    @property
    def span_s(self) -> float:
        return len(self.frame_flags) * self.frame_hop_s


@dataclass(frozen=True)
class Segment:
    speaker: str
    start_s: float
    end_s: float


@dataclass
class SpeakerTurnManifest:
    """Per-speaker half-open time segments ``[start_s, end_s)``."""

    segments: list[Segment]
    speakers: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        self.segments = sorted(self.segments, key=lambda s: (s.start_s, s.end_s))
        if not self.speakers:
            self.speakers = frozenset(s.speaker for s in self.segments)
        prev_end = -math.inf
        for i, seg in enumerate(self.segments):
            if not 0 <= seg.start_s < seg.end_s:
                raise SchemaViolation(f"need 0 <= start_s < end_s, got [{seg.start_s}, {seg.end_s})",
                                      f"segments[{i}]")
            if seg.start_s < prev_end:
                raise SchemaViolation("segments overlap", f"segments[{i}]")
            if seg.speaker not in self.speakers:
                raise SchemaViolation(f"undeclared speaker {seg.speaker!r}", f"segments[{i}].speaker")
            prev_end = seg.end_s

    @classmethod
    def from_dict(cls, data: dict) -> "SpeakerTurnManifest":
        if not isinstance(data, dict) or not isinstance(data.get("segments"), list):
            raise SchemaViolation("expected an object with a 'segments' list", "segments")
        segments = []
        for i, raw in enumerate(data["segments"]):
            try:
                segments.append(Segment(str(raw["speaker"]),
                                        round(float(raw["start_s"]), 3),
                                        round(float(raw["end_s"]), 3)))
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaViolation(f"bad segment ({exc})", f"segments[{i}]") from None
        speakers = frozenset(data.get("speakers") or (s.speaker for s in segments))
        return cls(segments, speakers)

    @classmethod
    def load(cls, path: str | Path) -> "SpeakerTurnManifest":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {"segments": [{"speaker": s.speaker, "start_s": s.start_s, "end_s": s.end_s}
                             for s in self.segments]}


# ---------------------------------------------------------------------------
# WAV I/O


def _parse_chunks(data: bytes):
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8: pos + 8 + size]
        if len(body) < size:
            raise CorruptFile(f"chunk {cid!r} truncated ({len(body)} of {size} bytes)")
        yield cid, body
        pos += 8 + size + (size & 1)


def load_wav(path: str | Path) -> AudioClip:
    """Read a PCM16 or float32 WAV file as a mono clip in [-1, 1].

    Stereo files are downmixed by averaging the two channels. PCM16 values are
    divided by 32768.
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise UnsupportedFormat(f"{path}: not a RIFF/WAVE file")

    fmt = None
    pcm = None
    for cid, body in _parse_chunks(data):
        if cid == b"fmt ":
            if len(body) < 16:
                raise CorruptFile(f"{path}: fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body)
            if fmt[0] == WAVE_FORMAT_EXTENSIBLE and len(body) >= 26:
                # sub-format GUID starts with the real format tag
                fmt = (struct.unpack_from("<H", body, 24)[0],) + fmt[1:]
        elif cid == b"data":
            pcm = body
    if fmt is None or pcm is None:
        raise CorruptFile(f"{path}: missing fmt or data chunk")

    tag, channels, rate, _, block_align, bits = fmt
    if channels not in (1, 2):
        raise UnsupportedFormat(f"{path}: {channels} channels (only mono/stereo)")
    if tag == WAVE_FORMAT_PCM and bits == 16:
        dtype, scale = np.dtype("<i2"), 32768.0
    elif tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise UnsupportedFormat(f"{path}: format tag {tag:#x} with {bits} bits")
    if rate <= 0:
        raise CorruptFile(f"{path}: sample rate {rate}")

    frame_bytes = dtype.itemsize * channels
    n_frames = len(pcm) // frame_bytes
    samples = np.frombuffer(pcm[: n_frames * frame_bytes], dtype=dtype).astype(np.float64) / scale
    if channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    return AudioClip(samples, int(rate), name=path.name)


def write_wav(path: str | Path, clip: AudioClip, float32: bool = False) -> None:
    x = np.asarray(clip.samples)
    if float32:
        tag, bits, payload = WAVE_FORMAT_IEEE_FLOAT, 32, x.astype("<f4").tobytes()
    else:
        ints = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
        tag, bits, payload = WAVE_FORMAT_PCM, 16, ints.tobytes()
    block = bits // 8
    fmt = struct.pack("<HHIIHH", tag, 1, clip.sample_rate, clip.sample_rate * block, block, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


# ---------------------------------------------------------------------------
# resampling / slicing


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Band-limited rational resampling (Kaiser-windowed sinc, polyphase)."""
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    target_rate = int(target_rate)
    if target_rate == clip.sample_rate:
        return clip
    g = gcd(target_rate, clip.sample_rate)
    up, down = target_rate // g, clip.sample_rate // g
    out = signal.resample_poly(clip.samples, up, down)
    return AudioClip(out, target_rate, name=clip.name)


def _sample_index(t: float, rate: int) -> int:
    return int(round(t * rate))


def slice_clip(clip: AudioClip, w: WindowSlice) -> AudioClip:
    """Samples in ``[w.start_s, w.end_s)``."""
    i0 = _sample_index(w.start_s, clip.sample_rate)
    i1 = _sample_index(w.end_s, clip.sample_rate)
    if i0 < 0 or i1 > len(clip) or i1 < i0:
        raise OutOfBounds(f"[{w.start_s}, {w.end_s}) outside clip of {clip.duration_s:.3f} s")
    return AudioClip(clip.samples[i0:i1], clip.sample_rate, name=clip.name)


# the operation is named `slice` in the public contract
slice = slice_clip  # noqa: A001


def plan_windows(duration_s: float, window_s: float, stride_s: float) -> list[WindowSlice]:
    """Sliding windows over ``[0, duration_s]``.

    Full windows start at multiples of the stride. If the part left uncovered
    after the last full window is at least half a window long, one extra
    window aligned to the end of the clip is added. Clips shorter than half a
    window yield no windows.
    """
    if window_s <= 0 or stride_s <= 0:
        raise ValueError("window_s and stride_s must be positive")
    if duration_s < 0:
        raise ValueError("duration_s must be non-negative")
    eps = 1e-9
    if duration_s + eps < window_s / 2:
        return []

    windows: list[WindowSlice] = []
    k = 0
    while k * stride_s + window_s <= duration_s + eps:
        start = k * stride_s
        windows.append(WindowSlice(start, start + window_s, k))
        k += 1
    covered = windows[-1].end_s if windows else 0.0
    tail = duration_s - covered
    if tail > eps and tail + eps >= window_s / 2:
        start = max(0.0, duration_s - window_s)
        windows.append(WindowSlice(start, duration_s, len(windows)))
    return windows


# ---------------------------------------------------------------------------
# energy VAD


def frame_rms(clip: AudioClip, frame_s: float = VAD_FRAME_S, hop_s: float = VAD_HOP_S) -> np.ndarray:
    hop = max(1, _sample_index(hop_s, clip.sample_rate))
    flen = max(hop, _sample_index(frame_s, clip.sample_rate))
    n_frames = math.ceil(len(clip) / hop)
    padded = np.zeros((n_frames - 1) * hop + flen)
    padded[: len(clip)] = clip.samples
    frames = np.lib.stride_tricks.sliding_window_view(padded, flen)[::hop][:n_frames]
    return np.sqrt(np.mean(frames**2, axis=1))


def vad_mask(clip: AudioClip) -> VadMask:
    """Energy VAD: 25 ms frames, 10 ms hop.

    A frame is speech when its RMS exceeds both an absolute floor and a
    fraction of the clip's 95th-percentile frame RMS.
    """
    if len(clip) == 0:
        raise EmptyInput("empty clip")
    rms = frame_rms(clip)
    threshold = max(VAD_ABS_FLOOR, VAD_REL_FRACTION * float(np.percentile(rms, VAD_PERCENTILE)))
    return VadMask(rms > threshold, VAD_HOP_S, VAD_FRAME_S)


def speech_ratio(mask: VadMask, w: WindowSlice) -> float:
    """Fraction of speech frames among frames centred inside the window."""
    if w.start_s < 0 or w.end_s > mask.span_s + mask.frame_len_s:
        raise OutOfBounds(f"window [{w.start_s}, {w.end_s}) outside mask span {mask.span_s:.3f} s")
    centers = mask.centers_s
    inside = (centers >= w.start_s) & (centers < w.end_s)
    n = int(inside.sum())
    if n == 0:
        return 0.0
    return float(mask.frame_flags[inside].sum()) / n


# ---------------------------------------------------------------------------
# multi-speaker streams


def concat_speaker_stream(clip: AudioClip, manifest: SpeakerTurnManifest, speaker_id: str) -> AudioClip:
    if speaker_id not in manifest.speakers:
        raise UnknownSpeaker(speaker_id)
    parts = []
    for seg in manifest.segments:
        if seg.speaker != speaker_id:
            continue
        parts.append(slice_clip(clip, WindowSlice(seg.start_s, seg.end_s)).samples)
    samples = np.concatenate(parts) if parts else np.zeros(0)
    return AudioClip(samples, clip.sample_rate, name=f"{clip.name}#{speaker_id}")
