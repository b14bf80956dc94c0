"""Time-domain signal container and WAV file I/O."""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from .errors import ConfigError, FormatError

SAMPLE_RATE = 16000

_PCM16_SCALE = 32768.0


@dataclass(frozen=True, eq=False)
class TimeSignal:
    """Sampled waveform, stored as a read-only ``(channels, samples)`` array."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64)
        if x.ndim == 1:
            x = x[np.newaxis, :]
        if x.ndim != 2 or x.shape[0] < 1:
            raise ConfigError(f"samples must be 1-D or (channels, samples), got shape {x.shape}")
        if int(self.sample_rate) <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    def __len__(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def energy(self) -> float:
        return float(np.sum(self.samples ** 2))

    def channel(self, index: int) -> "TimeSignal":
        return TimeSignal(self.samples[index], self.sample_rate)

    def with_samples(self, samples) -> "TimeSignal":
        return TimeSignal(samples, self.sample_rate)

    def __add__(self, other: "TimeSignal") -> "TimeSignal":
        _check_compatible(self, other)
        return self.with_samples(self.samples + other.samples)

    def __sub__(self, other: "TimeSignal") -> "TimeSignal":
        _check_compatible(self, other)
        return self.with_samples(self.samples - other.samples)

    def scaled(self, gain: float) -> "TimeSignal":
        return self.with_samples(gain * self.samples)


def _check_compatible(a: TimeSignal, b: TimeSignal):
    if a.sample_rate != b.sample_rate or a.samples.shape != b.samples.shape:
        raise ConfigError(
            f"incompatible signals: {a.samples.shape}@{a.sample_rate} vs "
            f"{b.samples.shape}@{b.sample_rate}"
        )


def require_rate(signal: TimeSignal, rate: int = SAMPLE_RATE):
    # no resampling anywhere in the workbench
    if signal.sample_rate != rate:
        raise ConfigError(f"only {rate} Hz audio is supported, got {signal.sample_rate} Hz")


def load_wav(path) -> TimeSignal:
    """Read a PCM16 or float32 WAV file into a TimeSignal.

    PCM16 values are mapped to ``value / 32768``. Any other codec or bit
    depth raises :class:`FormatError`; a truncated file raises ``OSError``.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("error", wavfile.WavFileWarning)
        try:
            rate, data = wavfile.read(os.fspath(path))
        except wavfile.WavFileWarning as exc:
            raise OSError(f"{path}: {exc}") from exc
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from exc
    if data.dtype == np.int16:
        x = data.astype(np.float64) / _PCM16_SCALE
    elif data.dtype == np.float32:
        x = data.astype(np.float64)
    else:
        raise FormatError(f"{path}: unsupported sample type {data.dtype}; need PCM16 or float32")
    if x.ndim == 2:
        x = x.T
    sig = TimeSignal(x, rate)
    require_rate(sig)
    return sig


def save_wav(signal: TimeSignal, path, bit_depth: str = "float32"):
    """Write ``signal`` as ``pcm16`` (rounded and clipped) or ``float32``."""
    if len(signal) == 0:
        raise ConfigError("cannot write an empty signal")
    x = signal.samples.T if signal.channels > 1 else signal.samples[0]
    if bit_depth == "float32":
        data = x.astype(np.float32)
    elif bit_depth == "pcm16":
        data = np.clip(np.round(x * _PCM16_SCALE), -32768, 32767).astype(np.int16)
    else:
        raise ConfigError(f"bit_depth must be 'pcm16' or 'float32', got {bit_depth!r}")
    wavfile.write(os.fspath(path), signal.sample_rate, np.ascontiguousarray(data))
