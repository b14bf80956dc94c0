"""Reverberant, noisy observation synthesis.

The observation model is ``y = x_early + x_late + n`` where ``x_early`` and
``x_late`` are the source convolved with the parts of the RIR before and after
a boundary placed a fixed time after the RIR's main peak.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .audio import SAMPLE_RATE, TimeSignal
from .errors import ConfigError, DegenerateInputError

EARLY_BOUNDARY_MS = 50.0
# ln(1000): amplitude falls by 60 dB over one T60
DECAY_CONST = 6.9077
DIRECT_CONV_MAX = 4096


def ms_to_samples(ms: float, sample_rate: int = SAMPLE_RATE) -> int:
    return int(round(ms * sample_rate / 1000.0))


@dataclass(frozen=True)
class RirBundle:
    impulse_response: TimeSignal
    main_peak_index: int
    early_boundary: int

    def __post_init__(self):
        n = len(self.impulse_response)
        if self.main_peak_index != int(np.argmax(np.abs(self.impulse_response.samples[0]))):
            raise ConfigError("main_peak_index is not the absolute peak of channel 0")
        if self.early_boundary <= 0:
            raise ConfigError("early_boundary must be positive")
        if self.main_peak_index + self.early_boundary > n:
            raise ConfigError("early boundary runs past the end of the RIR")

    @property
    def split_index(self) -> int:
        return self.main_peak_index + self.early_boundary

    def early(self) -> TimeSignal:
        h = np.array(self.impulse_response.samples)
        h[:, self.split_index :] = 0.0
        return self.impulse_response.with_samples(h)

    def late(self) -> TimeSignal:
        h = np.array(self.impulse_response.samples)
        h[:, : self.split_index] = 0.0
        return self.impulse_response.with_samples(h)

    def stats(self) -> dict:
        return {
            "length": len(self.impulse_response),
            "channels": self.impulse_response.channels,
            "main_peak_index": self.main_peak_index,
            "early_boundary": self.early_boundary,
            "early_energy": self.early().energy(),
            "late_energy": self.late().energy(),
        }


def split_rir(rir: TimeSignal, boundary_ms: float = EARLY_BOUNDARY_MS):
    """Split ``rir`` at ``boundary_ms`` after the main peak of channel 0.

    Returns ``(bundle, early_rir, late_rir)``. A boundary past the end of the
    RIR yields an all-zero late part.
    """
    n = len(rir)
    if n == 0:
        raise ConfigError("empty RIR")
    if boundary_ms <= 0:
        raise ConfigError("boundary_ms must be positive")
    peak = int(np.argmax(np.abs(rir.samples[0])))
    boundary = min(ms_to_samples(boundary_ms, rir.sample_rate), n - peak)
    bundle = RirBundle(rir, peak, max(boundary, 1))
    return bundle, bundle.early(), bundle.late()


def decay_envelope(t60_ms: float, n_samples: int, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    t = np.arange(n_samples) / sample_rate
    return np.exp(-DECAY_CONST * t / (t60_ms / 1000.0))


def synth_rir(
    t60_ms: float,
    direct_delay_ms: float = 0.0,
    length_ms: float | None = None,
    seed: int = 0,
    *,
    channels: int = 1,
    tail_gain: float = 0.1,
    channel_offset_samples: int = 3,
    sample_rate: int = SAMPLE_RATE,
) -> TimeSignal:
    """Exponentially decaying noise-tail RIR with a single direct-path tap.

    Extra channels model further microphones in the same room: an independent
    tail and a direct path ``channel_offset_samples`` later per channel. The
    result is scaled so its absolute peak is 1 and sits on channel 0's direct tap.
    """
    if t60_ms <= 0:
        raise ConfigError("t60_ms must be positive")
    if length_ms is None:
        length_ms = 1.2 * t60_ms + direct_delay_ms
    rng = np.random.default_rng(seed)
    n = ms_to_samples(length_ms, sample_rate)
    d0 = ms_to_samples(direct_delay_ms, sample_rate)
    if d0 + (channels - 1) * channel_offset_samples >= n:
        raise ConfigError("direct path falls outside the RIR")
    h = np.zeros((channels, n))
    for c in range(channels):
        d = d0 + c * channel_offset_samples
        tail = tail_gain * rng.standard_normal(n - d - 1)
        tail *= decay_envelope(t60_ms, n - d, sample_rate)[1:]
        h[c, d + 1 :] = tail
        h[c, d] = 1.0
    peak = np.max(np.abs(h[:, d0 + 1 :])) if n > d0 + 1 else 0.0
    if peak >= 1.0:
        # keep channel 0's direct tap dominant
        h[:, d0 + 1 :] *= 0.99 / peak
    return TimeSignal(h / np.max(np.abs(h)), sample_rate)


def convolve(source: TimeSignal, rir: TimeSignal) -> TimeSignal:
    """Linear convolution of a mono source with each RIR channel, cut to the source length."""
    if source.channels != 1:
        raise ConfigError("convolve expects a mono source")
    if source.sample_rate != rir.sample_rate:
        raise ConfigError("source and RIR sample rates differ")
    x = source.samples[0]
    n = len(x)
    out = np.empty((rir.channels, n))
    for c in range(rir.channels):
        h = rir.samples[c]
        if max(n, len(h)) <= DIRECT_CONV_MAX:
            y = np.convolve(x, h)
        else:
            y = sps.oaconvolve(x, h)
        out[c] = y[:n]
    return TimeSignal(out, source.sample_rate)


def _fit_noise(noise: TimeSignal, n: int, channels: int, rng: np.random.Generator) -> np.ndarray:
    if noise.channels not in (1, channels):
        raise ConfigError(f"noise has {noise.channels} channels, speech has {channels}")
    m = len(noise)
    out = np.empty((channels, n))
    for c in range(channels):
        src = noise.samples[c if noise.channels > 1 else 0]
        if m >= n:
            off = int(rng.integers(0, m - n + 1))
            out[c] = src[off : off + n]
        else:
            off = int(rng.integers(0, m))
            out[c] = src[(off + np.arange(n)) % m]
    return out


def mix_at_snr(speech: TimeSignal, noise: TimeSignal, snr_db: float, seed: int = 0):
    """Scale ``noise`` so that ``speech`` sits ``snr_db`` above it.

    Noise longer than the speech is cropped at a seeded random offset; shorter
    noise is tiled from a seeded random circular offset. A mono noise feeding
    multichannel speech draws an independent offset per channel.
    Returns ``(noisy, scaled_noise)``.
    """
    if len(noise) == 0:
        raise DegenerateInputError("empty noise")
    rng = np.random.default_rng(seed)
    n_fit = _fit_noise(noise, len(speech), speech.channels, rng)
    e_speech = speech.energy()
    e_noise = float(np.sum(n_fit ** 2))
    if e_speech <= 0.0:
        raise DegenerateInputError("speech has zero energy")
    if e_noise <= 0.0:
        raise DegenerateInputError("noise has zero energy")
    gain = np.sqrt(e_speech / (e_noise * 10.0 ** (snr_db / 10.0)))
    scaled = speech.with_samples(gain * n_fit)
    return speech + scaled, scaled


@dataclass(frozen=True)
class ObservationSet:
    observed: TimeSignal
    early_clean: TimeSignal
    late: TimeSignal
    early_noisy: TimeSignal
    noise: TimeSignal
    snr_db: float

    def __post_init__(self):
        parts = (self.early_clean, self.late, self.early_noisy, self.noise)
        for p in parts:
            if p.samples.shape != self.observed.samples.shape or p.sample_rate != self.observed.sample_rate:
                raise ConfigError("observation components are not aligned")
        if not np.array_equal(
            self.observed.samples,
            self.early_clean.samples + self.late.samples + self.noise.samples,
        ):
            raise ConfigError("observed != early_clean + late + noise")
        if not np.array_equal(self.early_noisy.samples, self.early_clean.samples + self.noise.samples):
            raise ConfigError("early_noisy != early_clean + noise")

    def components(self) -> dict:
        return {
            "observed": self.observed,
            "early_clean": self.early_clean,
            "early_noisy": self.early_noisy,
            "late": self.late,
            "noise": self.noise,
        }


def simulate(source: TimeSignal, rir: RirBundle, noise: TimeSignal, snr_db: float, seed: int = 0) -> ObservationSet:
    """Render every component of the observation model for one utterance.

    The SNR is measured against the full reverberant speech ``x_early + x_late``.
    """
    early = convolve(source, rir.early())
    late = convolve(source, rir.late())
    _, scaled = mix_at_snr(early + late, noise, snr_db, seed)
    observed = early.samples + late.samples + scaled.samples
    realized = 10.0 * np.log10((early + late).energy() / scaled.energy())
    return ObservationSet(
        observed=early.with_samples(observed),
        early_clean=early,
        late=late,
        early_noisy=early + scaled,
        noise=scaled,
        snr_db=float(realized),
    )


# Test material. The workbench ships no corpora, so these stand in for speech and noise.

def synthetic_utterance(duration_s: float, seed: int = 0, sample_rate: int = SAMPLE_RATE) -> TimeSignal:
    """Speech-like test signal: gliding-pitch voiced syllables, fricative bursts and pauses."""
    rng = np.random.default_rng(seed)
    n_total = int(round(duration_s * sample_rate))
    out = np.zeros(n_total)
    pos = int(rng.integers(0, sample_rate // 20))
    while pos < n_total:
        kind = rng.choice(3, p=[0.6, 0.2, 0.2])
        if kind == 0:
            n = int(rng.uniform(0.08, 0.25) * sample_rate)
            seg = _voiced(n, rng, sample_rate)
        elif kind == 1:
            n = int(rng.uniform(0.04, 0.12) * sample_rate)
            seg = _fricative(n, rng)
        else:
            n = int(rng.uniform(0.03, 0.2) * sample_rate)
            seg = np.zeros(n)
        seg = seg[: n_total - pos]
        out[pos : pos + len(seg)] += seg
        pos += len(seg)
    peak = np.max(np.abs(out))
    if peak > 0:
        out *= 0.5 / peak
    return TimeSignal(out, sample_rate)


def _voiced(n: int, rng: np.random.Generator, sr: int) -> np.ndarray:
    f_start = rng.uniform(90.0, 220.0)
    f_end = f_start * rng.uniform(0.7, 1.3)
    f0 = np.linspace(f_start, f_end, n) * (1.0 + 0.01 * rng.standard_normal(n))
    phase = 2.0 * np.pi * np.cumsum(f0) / sr
    seg = np.zeros(n)
    for h in range(1, int(3800.0 / max(f_start, f_end)) + 1):
        seg += np.sin(h * phase + rng.uniform(0, 2 * np.pi)) / h
    for lo, hi in ((300.0, 850.0), (900.0, 2300.0), (2300.0, 3200.0)):
        seg = seg + 0.5 * _resonate(seg, rng.uniform(lo, hi), sr)
    return seg * np.hanning(n) * rng.uniform(0.3, 1.0)


def _resonate(x: np.ndarray, freq: float, sr: int, r: float = 0.97) -> np.ndarray:
    theta = 2.0 * np.pi * freq / sr
    return sps.lfilter([1.0 - r], [1.0, -2.0 * r * np.cos(theta), r * r], x)


def _fricative(n: int, rng: np.random.Generator) -> np.ndarray:
    noise = rng.standard_normal(n)
    noise = np.diff(noise, prepend=0.0)  # tilt towards high frequencies
    return 0.1 * noise * np.hanning(n) * rng.uniform(0.3, 1.0)


def white_noise(duration_s: float, seed: int = 0, sample_rate: int = SAMPLE_RATE) -> TimeSignal:
    rng = np.random.default_rng(seed)
    return TimeSignal(rng.standard_normal(int(round(duration_s * sample_rate))), sample_rate)


def speech_shaped_noise(duration_s: float, seed: int = 0, sample_rate: int = SAMPLE_RATE) -> TimeSignal:
    """White noise through a one-pole low-pass, roughly matching the long-term speech tilt."""
    x = white_noise(duration_s, seed, sample_rate).samples[0]
    return TimeSignal(sps.lfilter([1.0], [1.0, -0.9], x), sample_rate)
