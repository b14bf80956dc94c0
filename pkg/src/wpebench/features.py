"""Log mel-filterbank energies, MFCCs, sliding-window mean subtraction and a toy speaker embedding."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.fft import dct

from .audio import TimeSignal
from .errors import ConfigError, DegenerateInputError, FormatError
from .stft import Spectrogram, StftConfig, stft

LOG_FLOOR = 1e-10
N_MELS = 64
N_MFCC = 20
SWMS_WINDOW_S = 3.0

FEATURE_KINDS = ("log_mfbe", "mfcc", "lps")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray  # (frame, coefficient)
    kind: str
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ConfigError(f"features must be (frame, coefficient), got {v.shape}")
        if self.kind not in FEATURE_KINDS:
            raise ConfigError(f"unknown feature kind {self.kind!r}")
        if not np.all(np.isfinite(v)):
            raise ConfigError("features contain NaN or Inf")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    def frame_rate(self) -> float:
        return self.provenance["sample_rate"] / self.provenance["hop_len"]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=16)
def mel_filterbank(n_mels: int, fft_len: int, sample_rate: int) -> np.ndarray:
    """HTK-scale triangular filters with unit peaks, shape ``(n_mels, fft_len//2 + 1)``."""
    if n_mels < 2:
        raise ConfigError(f"need at least 2 mel bands, got {n_mels}")
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_mels + 2))
    freqs = np.arange(fft_len // 2 + 1) * sample_rate / fft_len
    lower, centre, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lower) / (centre - lower)
    falling = (upper - freqs) / (upper - centre)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    if np.any(fb.sum(axis=1) == 0):
        raise ConfigError(f"{n_mels} mel bands is too many for a {fft_len}-point FFT")
    fb.setflags(write=False)
    return fb


def log_mfbe(spec: Spectrogram, bands: int = N_MELS) -> FeatureMatrix:
    if spec.channels != 1:
        raise ConfigError("log_mfbe expects a mono spectrogram")
    fb = mel_filterbank(bands, spec.config.fft_len, spec.sample_rate)
    energies = spec.power()[0] @ fb.T
    prov = {
        "n_mels": bands,
        "fft_len": spec.config.fft_len,
        "hop_len": spec.config.hop_len,
        "sample_rate": spec.sample_rate,
    }
    return FeatureMatrix(np.log(np.maximum(energies, LOG_FLOOR)), "log_mfbe", prov)


def mfcc(features: FeatureMatrix, coeffs: int = N_MFCC) -> FeatureMatrix:
    """Orthonormal DCT-II over the band axis, keeping the first ``coeffs`` terms."""
    if features.kind != "log_mfbe":
        raise ConfigError(f"mfcc needs log_mfbe input, got {features.kind}")
    if coeffs > features.values.shape[1]:
        raise ConfigError(f"{coeffs} coefficients requested from {features.values.shape[1]} bands")
    c = dct(features.values, type=2, norm="ortho", axis=1)[:, :coeffs]
    return FeatureMatrix(c, "mfcc", dict(features.provenance, n_mfcc=coeffs))


def lps(spec: Spectrogram) -> FeatureMatrix:
    """Log power spectrum of a mono spectrogram."""
    if spec.channels != 1:
        raise ConfigError("lps expects a mono spectrogram")
    prov = {"fft_len": spec.config.fft_len, "hop_len": spec.config.hop_len, "sample_rate": spec.sample_rate}
    return FeatureMatrix(np.log(np.maximum(spec.power()[0], LOG_FLOOR)), "lps", prov)


def swms(features: FeatureMatrix, window_s: float = SWMS_WINDOW_S) -> FeatureMatrix:
    """Subtract a centred moving mean of ``window_s`` seconds, truncated at the edges.

    The window spans ``half = round(window_s * frame_rate) // 2`` frames on
    each side of the current frame.
    """
    if window_s <= 0:
        raise ConfigError("window_s must be positive")
    x = features.values
    T = x.shape[0]
    half = int(round(window_s * features.frame_rate())) // 2
    csum = np.vstack([np.zeros((1, x.shape[1])), np.cumsum(x, axis=0)])
    lo = np.clip(np.arange(T) - half, 0, T)
    hi = np.clip(np.arange(T) + half + 1, 0, T)
    means = (csum[hi] - csum[lo]) / (hi - lo)[:, None]
    return FeatureMatrix(x - means, features.kind, dict(features.provenance, swms_window_s=window_s))


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).ravel()
        if not np.all(np.isfinite(v)):
            raise ConfigError("embedding contains NaN or Inf")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.values, self.values)))


def toy_embedding(signal: TimeSignal, config: StftConfig | None = None) -> EmbeddingVector:
    """Deterministic 128-D stand-in for a speaker embedding.

    Mean and standard deviation over time of SWMS-normalised 64-band log-MFBEs.
    """
    if signal.energy() == 0.0:
        raise DegenerateInputError("cannot embed a silent signal")
    feats = swms(log_mfbe(stft(signal.channel(0), config or StftConfig.for_embedding())))
    v = feats.values
    return EmbeddingVector(np.concatenate([v.mean(axis=0), v.std(axis=0)]))


def cosine_similarity(a, b) -> float:
    a = a.values if isinstance(a, EmbeddingVector) else np.asarray(a, float)
    b = b.values if isinstance(b, EmbeddingVector) else np.asarray(b, float)
    ma, mb = float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(b), initial=0.0))
    if ma == 0.0 or mb == 0.0:
        raise DegenerateInputError("cosine similarity of a zero vector")
    # unit max-abs scaling keeps tiny (subnormal) and huge vectors away from under/overflow
    a, b = a / ma, b / mb
    aa, bb = float(np.dot(a, a)), float(np.dot(b, b))
    # sqrt(aa * bb) rather than |a| * |b| so that cs(a, a) == 1 exactly
    cs = float(np.dot(a, b)) / np.sqrt(aa * bb)
    return float(min(1.0, max(-1.0, cs)))


def save_embeddings(table: dict, path):
    """Write ``{utterance_id: EmbeddingVector}`` as a ``dim=<N>`` text table."""
    dims = {e.dim for e in table.values()}
    if len(dims) > 1:
        raise FormatError(f"embeddings have mixed dimensions {sorted(dims)}")
    dim = dims.pop() if dims else 0
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        fh.write(f"dim={dim}\n")
        for utt, emb in table.items():
            fh.write(utt + " " + " ".join(repr(float(v)) for v in emb.values) + "\n")


def load_embeddings(path) -> dict:
    table = {}
    with open(os.fspath(path), encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        return table
    header = lines[0].strip()
    if not header.startswith("dim="):
        raise FormatError(f"{path}:1: expected 'dim=<N>' header")
    try:
        dim = int(header[4:])
    except ValueError as exc:
        raise FormatError(f"{path}:1: bad dimension {header[4:]!r}") from exc
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if not parts:
            continue
        if len(parts) - 1 != dim:
            raise FormatError(f"{path}:{lineno}: {parts[0]} has {len(parts) - 1} values, expected {dim}")
        try:
            vals = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
        if parts[0] in table:
            raise FormatError(f"{path}:{lineno}: duplicate id {parts[0]}")
        table[parts[0]] = EmbeddingVector(vals)
    return table
