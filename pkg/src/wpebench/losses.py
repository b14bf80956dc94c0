"""Training-style loss functionals evaluated as metrics, plus oracle quality measures."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .audio import TimeSignal
from .errors import AlignmentError, ConfigError, DegenerateInputError
from .features import LOG_FLOOR, N_MELS, N_MFCC, EmbeddingVector, cosine_similarity, log_mfbe, mfcc, toy_embedding
from .stft import Spectrogram, StftConfig, stft

SNR_CAP_DB = 120.0


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 0.04
    gamma: float = 5.0
    eta: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (np.isfinite(v) and v >= 0):
                raise ConfigError(f"loss weight {f.name} must be finite and >= 0, got {v}")

    @classmethod
    def pretrain(cls) -> "LossWeights":
        return cls(1.0, 0.04, 5.0, 0.0)

    @classmethod
    def finetune(cls) -> "LossWeights":
        return cls(1.0, 0.1, 5.0, 0.2)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _mse(a, b) -> float:
    return float(np.mean((a - b) ** 2))


def _mae(a, b) -> float:
    return float(np.mean(np.abs(a - b)))


def log_magnitude(spec: Spectrogram) -> np.ndarray:
    return 0.5 * np.log(np.maximum(spec.power(), LOG_FLOOR))


def _check_pair(a_spec, b_spec, a_time, b_time):
    if a_spec.shape != b_spec.shape:
        raise ConfigError(f"spectrogram shapes differ: {a_spec.shape} vs {b_spec.shape}")
    if a_time.samples.shape != b_time.samples.shape:
        raise ConfigError(f"waveform shapes differ: {a_time.samples.shape} vs {b_time.samples.shape}")


def l1_loss(a_spec: Spectrogram, b_spec: Spectrogram, a_time: TimeSignal, b_time: TimeSignal, w: LossWeights) -> float:
    """RI-component MSE, log-magnitude MSE and waveform MAE, weighted by alpha/beta/gamma."""
    _check_pair(a_spec, b_spec, a_time, b_time)
    A, B = a_spec.coefficients, b_spec.coefficients
    ri = _mse(A.real, B.real) + _mse(A.imag, B.imag)
    mag = _mse(log_magnitude(a_spec), log_magnitude(b_spec))
    wav = _mae(a_time.samples, b_time.samples)
    return w.alpha * ri + w.beta * mag + w.gamma * wav


def mfcc_distance(a_spec: Spectrogram, b_spec: Spectrogram, bands: int = N_MELS, coeffs: int = N_MFCC) -> float:
    """MAE between the MFCC matrices of two mono spectrograms."""
    if a_spec.shape != b_spec.shape:
        raise ConfigError(f"spectrogram shapes differ: {a_spec.shape} vs {b_spec.shape}")
    ca = mfcc(log_mfbe(a_spec, bands), coeffs).values
    cb = mfcc(log_mfbe(b_spec, bands), coeffs).values
    return _mae(ca, cb)


def l2_loss(a_spec: Spectrogram, b_spec: Spectrogram, a_time: TimeSignal, b_time: TimeSignal, w: LossWeights) -> float:
    return l1_loss(a_spec, b_spec, a_time, b_time, w) + w.eta * mfcc_distance(a_spec, b_spec)


def ncs_loss(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Negative cosine similarity, in [-1, 1]."""
    return -cosine_similarity(a, b)


@dataclass(frozen=True)
class LossInputs:
    """Signals feeding the composite losses; each processed field names the input that was processed.

    ``virtual_of_*`` are virtual-channel generator outputs, ``processed_*``
    are outputs of the full dual-channel front-end.
    """

    early_clean: TimeSignal | None = None
    early_noisy: TimeSignal | None = None
    late: TimeSignal | None = None
    virtual_of_reverberant: TimeSignal | None = None
    virtual_of_observed: TimeSignal | None = None
    processed_reverberant: TimeSignal | None = None
    processed_observed: TimeSignal | None = None
    processed_early_clean: TimeSignal | None = None
    processed_early_noisy: TimeSignal | None = None


_REQUIRES = {
    "l_pt": ("virtual_of_reverberant", "virtual_of_observed", "late"),
    "l_ft": ("processed_reverberant", "processed_observed", "early_clean", "early_noisy"),
    "l_tso": ("processed_reverberant", "processed_observed", "early_clean"),
    "l_dr": ("processed_early_clean", "processed_early_noisy", "early_clean", "early_noisy"),
}
_REQUIRES["l_dr_tso"] = tuple(dict.fromkeys(_REQUIRES["l_tso"] + _REQUIRES["l_dr"]))

COMPOSITES = tuple(_REQUIRES)


def composite_losses(
    inputs: LossInputs,
    terms=COMPOSITES,
    *,
    embed=toy_embedding,
    stft_config: StftConfig | None = None,
    pt_weights: LossWeights | None = None,
    ft_weights: LossWeights | None = None,
) -> dict:
    """Evaluate the pretraining, fine-tuning, TSO and distortion-regularisation losses.

    ``l_pt`` and ``l_ft`` pair generator/front-end outputs with the late and
    early targets; ``l_tso`` and ``l_dr`` compare embeddings (``embed``) of
    front-end outputs with those of the early targets. ``l_dr_tso`` is
    ``l_tso + l_dr``.
    """
    unknown = set(terms) - set(COMPOSITES)
    if unknown:
        raise ConfigError(f"unknown loss terms {sorted(unknown)}")
    for term in terms:
        missing = [name for name in _REQUIRES[term] if getattr(inputs, name) is None]
        if missing:
            raise ConfigError(f"{term} needs {', '.join(missing)}")
    cfg = stft_config or StftConfig.for_wpe()
    pt_w = pt_weights or LossWeights.pretrain()
    ft_w = ft_weights or LossWeights.finetune()
    specs, embs = {}, {}

    def sig(name):
        return getattr(inputs, name).channel(0)

    def spec(name):
        if name not in specs:
            specs[name] = stft(sig(name), cfg)
        return specs[name]

    def emb(name):
        if name not in embs:
            embs[name] = embed(sig(name))
        return embs[name]

    def pair(loss, a, b, w):
        return loss(spec(a), spec(b), sig(a), sig(b), w)

    out = {}
    if "l_pt" in terms:
        out["l_pt"] = pair(l1_loss, "virtual_of_reverberant", "late", pt_w) + pair(
            l1_loss, "virtual_of_observed", "late", pt_w
        )
    if "l_ft" in terms:
        out["l_ft"] = pair(l2_loss, "processed_reverberant", "early_clean", ft_w) + pair(
            l2_loss, "processed_observed", "early_noisy", ft_w
        )
    l_tso = l_dr = None
    if "l_tso" in terms or "l_dr_tso" in terms:
        l_tso = ncs_loss(emb("processed_reverberant"), emb("early_clean")) + ncs_loss(
            emb("processed_observed"), emb("early_clean")
        )
    if "l_dr" in terms or "l_dr_tso" in terms:
        l_dr = ncs_loss(emb("processed_early_clean"), emb("early_clean")) + ncs_loss(
            emb("processed_early_noisy"), emb("early_noisy")
        )
    if "l_tso" in terms:
        out["l_tso"] = l_tso
    if "l_dr" in terms:
        out["l_dr"] = l_dr
    if "l_dr_tso" in terms:
        out["l_dr_tso"] = l_tso + l_dr
    return out


def log_spectral_distance(a: Spectrogram, b: Spectrogram) -> float:
    """RMS over frames of the per-frame RMS difference of dB power spectra."""
    if a.shape != b.shape:
        raise ConfigError(f"spectrogram shapes differ: {a.shape} vs {b.shape}")
    da = 10.0 * np.log10(np.maximum(a.power(), LOG_FLOOR))
    db = 10.0 * np.log10(np.maximum(b.power(), LOG_FLOOR))
    per_frame = np.sqrt(np.mean((da - db) ** 2, axis=-1))
    return float(np.sqrt(np.mean(per_frame ** 2)))


def oracle_snr(speech: TimeSignal, residual: TimeSignal, cap: float = SNR_CAP_DB) -> float:
    """``10 log10(E_speech / E_residual)`` in dB, capped at ``cap`` (a zero residual gives ``cap``)."""
    if speech.samples.shape != residual.samples.shape:
        raise AlignmentError(f"lengths differ: {speech.samples.shape} vs {residual.samples.shape}")
    es, er = speech.energy(), residual.energy()
    if es == 0.0:
        raise DegenerateInputError("reference speech has zero energy")
    if er == 0.0:
        return cap
    return float(min(cap, 10.0 * np.log10(es / er)))
