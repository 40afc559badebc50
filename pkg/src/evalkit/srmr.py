"""Speech-to-reverberation modulation energy ratio (SRMR).

Gammatone analysis -> Hilbert envelope per band -> modulation filterbank.
The score is low-modulation energy (first ``low_band_count`` modulation
bands) over high-modulation energy, summed over acoustic bands. Reverberation
fills the gaps between syllables, which lowers the ratio.

Input is always resampled to 16 kHz so a single filter design is used.
Absolute values are comparable in spirit with other SRMR implementations but
are not expected to match them digit for digit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import signal

from .audio import AudioClip, resample
from .errors import ClipTooShort, SampleRateTooLow

SRMR_RATE = 16000
MIN_DURATION_S = 0.5
EPS = 1e-12


@dataclass(frozen=True)
class SrmrConfig:
    n_acoustic_bands: int = 23
    low_freq: float = 125.0
    high_freq: float = 8000.0  # capped at 0.9 * Nyquist at design time
    n_modulation_bands: int = 8
    modulation_centers: tuple[float, ...] = field(
        default_factory=lambda: tuple(float(f) for f in np.geomspace(4.0, 128.0, 8)))
    modulation_q: float = 2.0
    low_band_count: int = 4
    envelope_lowpass_cutoff: float = 150.0
    envelope_rate: int = 800

    def __post_init__(self):
        if len(self.modulation_centers) != self.n_modulation_bands:
            raise ValueError("modulation_centers must have n_modulation_bands entries")
        if not 0 < self.low_band_count < self.n_modulation_bands:
            raise ValueError("need 0 < low_band_count < n_modulation_bands")
        if any(b <= a for a, b in zip(self.modulation_centers, self.modulation_centers[1:])):
            raise ValueError("modulation centers must be strictly increasing")
        if self.modulation_centers[-1] >= self.envelope_rate / 2:
            raise ValueError("envelope_rate too low for the top modulation band")

    def band_range(self, fs: int) -> tuple[float, float]:
        hi = min(self.high_freq, 0.45 * fs)
        if self.low_freq >= hi:
            raise ValueError("acoustic band range must lie below Nyquist")
        return self.low_freq, hi


DEFAULT_CONFIG = SrmrConfig()


def _hz_to_erb_rate(f):
    return 21.4 * np.log10(1.0 + 0.00437 * np.asarray(f))


def _erb_rate_to_hz(e):
    return (10.0 ** (np.asarray(e) / 21.4) - 1.0) / 0.00437


def erb_space(low: float, high: float, n: int) -> np.ndarray:
    """``n`` centre frequencies equally spaced on the ERB-rate scale."""
    return _erb_rate_to_hz(np.linspace(_hz_to_erb_rate(low), _hz_to_erb_rate(high), n))


def center_frequencies(cfg: SrmrConfig, fs: int) -> np.ndarray:
    lo, hi = cfg.band_range(fs)
    return erb_space(lo, hi, cfg.n_acoustic_bands)


def gammatone_sos(freq: float, fs: int) -> np.ndarray:
    """scipy's IIR gammatone as second-order sections.

    The transfer-function form has its four pole pairs multiplied out into
    one 8th-order polynomial, which loses precision in the low bands. The
    poles are known exactly, so only the numerator needs root finding.
    """
    b, _ = signal.gammatone(freq, "iir", fs=fs)
    bw = 2 * np.pi * 1.019 * (24.7 + freq / 9.26449)
    p = np.exp(-bw / fs + 2j * np.pi * freq / fs)
    return signal.zpk2sos(np.roots(b), np.array([p, np.conj(p)] * 4), b[0])


@lru_cache(maxsize=16)
def _gammatone_bank(cfg: SrmrConfig, fs: int):
    return tuple(gammatone_sos(f, fs) for f in center_frequencies(cfg, fs))


@lru_cache(maxsize=16)
def _envelope_lowpass(cutoff: float, fs: int):
    return signal.butter(4, cutoff, fs=fs, output="sos")


@lru_cache(maxsize=16)
def _modulation_bank(cfg: SrmrConfig):
    return tuple(signal.iirpeak(fc, cfg.modulation_q, fs=cfg.envelope_rate)
                 for fc in cfg.modulation_centers)


def gammatone_filterbank(clip: AudioClip, cfg: SrmrConfig = DEFAULT_CONFIG) -> np.ndarray:
    """4th-order gammatone bands, shape ``(n_acoustic_bands, len(clip))``."""
    if clip.sample_rate < 8000:
        raise SampleRateTooLow(f"{clip.sample_rate} Hz < 8000 Hz")
    bank = _gammatone_bank(cfg, clip.sample_rate)
    return np.stack([signal.sosfilt(sos, clip.samples) for sos in bank])


def temporal_envelope(band: np.ndarray, cfg: SrmrConfig = DEFAULT_CONFIG, fs: int = SRMR_RATE) -> np.ndarray:
    """Low-passed Hilbert magnitude; same length as the input (works row-wise on 2-D input)."""
    band = np.asarray(band, dtype=np.float64)
    if band.shape[-1] == 0:
        raise ValueError("empty band")
    env = np.abs(signal.hilbert(band, axis=-1))
    sos = _envelope_lowpass(cfg.envelope_lowpass_cutoff, fs)
    padlen = min(env.shape[-1] - 1, 3 * (2 * len(sos) + 1))
    env = signal.sosfiltfilt(sos, env, axis=-1, padlen=padlen)
    return np.maximum(env, 0.0)


def modulation_energies(envelope: np.ndarray, cfg: SrmrConfig = DEFAULT_CONFIG,
                        fs: int = SRMR_RATE) -> np.ndarray:
    """Mean energy of the mean-removed envelope in each modulation band.

    The envelope is decimated to ``cfg.envelope_rate`` first; it is already
    band-limited by the envelope low-pass. Returns shape
    ``(..., n_modulation_bands)``.
    """
    env = np.asarray(envelope, dtype=np.float64)
    step = max(1, fs // cfg.envelope_rate)
    if fs % cfg.envelope_rate:
        raise ValueError(f"envelope rate {cfg.envelope_rate} must divide {fs}")
    env = env[..., ::step]
    env = env - env.mean(axis=-1, keepdims=True)
    out = [np.mean(signal.lfilter(b, a, env, axis=-1) ** 2, axis=-1) for b, a in _modulation_bank(cfg)]
    return np.stack(out, axis=-1)


def srmr(clip: AudioClip, cfg: SrmrConfig = DEFAULT_CONFIG) -> float:
    if clip.duration_s < MIN_DURATION_S:
        raise ClipTooShort(f"{clip.duration_s:.3f} s < {MIN_DURATION_S} s")
    if clip.sample_rate < 8000:
        raise SampleRateTooLow(f"{clip.sample_rate} Hz < 8000 Hz")
    clip = resample(clip, SRMR_RATE)
    bands = gammatone_filterbank(clip, cfg)
    energies = modulation_energies(temporal_envelope(bands, cfg, SRMR_RATE), cfg, SRMR_RATE)
    low = float(energies[:, : cfg.low_band_count].sum())
    high = float(energies[:, cfg.low_band_count:].sum())
    return low / max(high, EPS)
