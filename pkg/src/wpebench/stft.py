"""Invertible STFT analysis/synthesis and the ``SPG1`` spectrogram dump format.

Frames are stored ``(channel, frame, bin)``. With ``center_pad`` the signal is
reflect-padded by ``frame_len // 2`` on both sides so frame ``t`` is centred on
sample ``t * hop_len``. Synthesis uses the canonical dual of the analysis
window, normalised by the overlap-added window product actually present, so
``istft(stft(x))`` reproduces ``x`` over its full length.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .audio import SAMPLE_RATE, TimeSignal, require_rate
from .errors import ConfigError, FormatError

WINDOWS = ("sqrt_hann", "hann", "rect")

# NOLA: the overlap-added squared window must stay away from zero
_NOLA_RATIO = 1e-3
_COLA_TOL = 1e-6


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class StftConfig:
    frame_len: int = 1024
    hop_len: int = 256
    fft_len: int = 1024
    window: str = "sqrt_hann"
    center_pad: bool = True

    def __post_init__(self):
        if self.window not in WINDOWS:
            raise ConfigError(f"unknown window {self.window!r}; choose from {WINDOWS}")
        if self.frame_len < 1 or self.hop_len < 1:
            raise ConfigError("frame_len and hop_len must be positive")
        if self.hop_len > self.frame_len:
            raise ConfigError(f"hop_len {self.hop_len} exceeds frame_len {self.frame_len}")
        if not _is_pow2(self.fft_len) or self.fft_len < self.frame_len:
            raise ConfigError(
                f"fft_len must be a power of two >= frame_len, got {self.fft_len}"
            )
        denom = self._overlap_sum(self.analysis_window ** 2)
        if denom.min() <= _NOLA_RATIO * denom.max():
            raise ConfigError(
                f"{self.window} window with hop {self.hop_len} cannot be inverted (NOLA fails)"
            )
        dev = self.cola_deviation()
        if dev > _COLA_TOL:
            raise ConfigError(f"analysis/synthesis pair deviates from COLA by {dev:.2e}")

    @classmethod
    def for_wpe(cls) -> "StftConfig":
        """64 ms / 16 ms frames with a 1024-point FFT at 16 kHz."""
        return cls(1024, 256, 1024)

    @classmethod
    def for_embedding(cls) -> "StftConfig":
        """25 ms / 10 ms frames zero-padded to a 512-point FFT at 16 kHz."""
        return cls(400, 160, 512)

    @property
    def n_bins(self) -> int:
        return self.fft_len // 2 + 1

    @cached_property
    def analysis_window(self) -> np.ndarray:
        n = np.arange(self.frame_len)
        if self.window == "rect":
            w = np.ones(self.frame_len)
        else:
            # periodic Hann
            w = 0.5 - 0.5 * np.cos(2.0 * np.pi * n / self.frame_len)
            if self.window == "sqrt_hann":
                w = np.sqrt(w)
        w.setflags(write=False)
        return w

    @cached_property
    def synthesis_window(self) -> np.ndarray:
        w = self.analysis_window
        ws = w / self._overlap_sum(w ** 2)
        ws.setflags(write=False)
        return ws

    def _overlap_sum(self, w: np.ndarray) -> np.ndarray:
        # sum_k w[n - k*hop] over all integer k, for n in [0, frame_len)
        L, H = self.frame_len, self.hop_len
        out = np.zeros(L)
        reach = -(-L // H)
        for k in range(-reach, reach + 1):
            lo, hi = max(0, k * H), min(L, L + k * H)
            if lo < hi:
                out[lo:hi] += w[lo - k * H : hi - k * H]
        return out

    def cola_deviation(self) -> float:
        """Max deviation of the overlap-added analysis*synthesis product from 1."""
        prod = self._overlap_sum(self.analysis_window * self.synthesis_window)
        return float(np.max(np.abs(prod - 1.0)))

    def n_frames(self, n_samples: int) -> int:
        if self.center_pad:
            return 1 + n_samples // self.hop_len
        return 1 + max(0, -(-(n_samples - self.frame_len) // self.hop_len))

    def to_dict(self) -> dict:
        return {
            "frame_len": self.frame_len,
            "hop_len": self.hop_len,
            "fft_len": self.fft_len,
            "window": self.window,
            "center_pad": self.center_pad,
        }


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """One-sided complex STFT, ``coefficients[channel, frame, bin]``."""

    coefficients: np.ndarray
    config: StftConfig
    sample_rate: int = SAMPLE_RATE
    num_samples: int | None = None

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=np.complex128)
        if c.ndim == 2:
            c = c[np.newaxis]
        if c.ndim != 3:
            raise ConfigError(f"coefficients must be (channel, frame, bin), got {c.shape}")
        if c.shape[2] != self.config.n_bins:
            raise ConfigError(
                f"bin count {c.shape[2]} does not match fft_len {self.config.fft_len}"
            )
        n = self.num_samples
        if n is None:
            n = (c.shape[1] - 1) * self.config.hop_len
            if not self.config.center_pad:
                n += self.config.frame_len
        if self.config.n_frames(n) != c.shape[1]:
            raise ConfigError(f"{c.shape[1]} frames inconsistent with {n} samples")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "num_samples", int(n))

    @property
    def channels(self) -> int:
        return self.coefficients.shape[0]

    @property
    def n_frames(self) -> int:
        return self.coefficients.shape[1]

    @property
    def n_bins(self) -> int:
        return self.coefficients.shape[2]

    @property
    def shape(self) -> tuple:
        return self.coefficients.shape

    def power(self) -> np.ndarray:
        c = self.coefficients
        return c.real ** 2 + c.imag ** 2

    def with_coefficients(self, coefficients) -> "Spectrogram":
        return Spectrogram(coefficients, self.config, self.sample_rate, self.num_samples)

    def channel(self, index: int) -> "Spectrogram":
        return self.with_coefficients(self.coefficients[index : index + 1])


def stft(signal: TimeSignal, config: StftConfig | None = None) -> Spectrogram:
    config = config or StftConfig.for_wpe()
    require_rate(signal)
    n = len(signal)
    if n < 1:
        raise ConfigError("stft needs at least one sample")
    L, H = config.frame_len, config.hop_len
    x = signal.samples
    T = config.n_frames(n)
    if config.center_pad:
        mode = "reflect" if n > 1 else "edge"
        x = np.pad(x, ((0, 0), (L // 2, L // 2)), mode=mode)
    need = (T - 1) * H + L
    if x.shape[1] < need:
        x = np.pad(x, ((0, 0), (0, need - x.shape[1])))
    frames = np.lib.stride_tricks.sliding_window_view(x, L, axis=1)[:, : need - L + 1 : H]
    coeffs = np.fft.rfft(frames * config.analysis_window, n=config.fft_len, axis=-1)
    return Spectrogram(coeffs, config, signal.sample_rate, n)


def istft(spec: Spectrogram) -> TimeSignal:
    config = spec.config
    L, H = config.frame_len, config.hop_len
    C, T, _ = spec.shape
    frames = np.fft.irfft(spec.coefficients, n=config.fft_len, axis=-1)[..., :L]
    ws = config.synthesis_window
    out_len = (T - 1) * H + L
    out = np.zeros((C, out_len))
    norm = np.zeros(out_len)
    prod = config.analysis_window * ws
    for t in range(T):
        out[:, t * H : t * H + L] += frames[:, t] * ws
        norm[t * H : t * H + L] += prod
    # interior norm is 1; edges only see part of the overlap
    covered = norm > 1e-10
    out[:, covered] /= norm[covered]
    start = L // 2 if config.center_pad else 0
    y = out[:, start : start + spec.num_samples]
    if y.shape[1] < spec.num_samples:
        y = np.pad(y, ((0, 0), (0, spec.num_samples - y.shape[1])))
    return TimeSignal(y, spec.sample_rate)


_SPG_MAGIC = b"SPG1"
_SPG_HEADER = struct.Struct("<4sIII")


def write_spectrogram_dump(coefficients, path):
    """Write a ``(channel, frame, bin)`` complex array as an SPG1 dump (float32)."""
    if isinstance(coefficients, Spectrogram):
        coefficients = coefficients.coefficients
    c = np.asarray(coefficients)
    if c.ndim == 2:
        c = c[np.newaxis]
    if c.ndim != 3:
        raise ConfigError(f"dump needs a 3-D array, got shape {c.shape}")
    body = np.empty(c.shape + (2,), dtype="<f4")
    body[..., 0] = np.real(c)
    body[..., 1] = np.imag(c) if np.iscomplexobj(c) else 0.0
    with open(os.fspath(path), "wb") as fh:
        fh.write(_SPG_HEADER.pack(_SPG_MAGIC, *c.shape))
        fh.write(body.tobytes())


def read_spectrogram_dump(path) -> np.ndarray:
    """Read an SPG1 dump into a complex128 ``(channel, frame, bin)`` array."""
    with open(os.fspath(path), "rb") as fh:
        raw = fh.read()
    if len(raw) < _SPG_HEADER.size:
        raise FormatError(f"{path}: too short for an SPG1 header")
    magic, C, T, F = _SPG_HEADER.unpack_from(raw)
    if magic != _SPG_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    expected = _SPG_HEADER.size + C * T * F * 8
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    body = np.frombuffer(raw, dtype="<f4", offset=_SPG_HEADER.size).reshape(C, T, F, 2)
    return body[..., 0].astype(np.float64) + 1j * body[..., 1].astype(np.float64)
