"""Seeded synthetic test scenes and the measurements made on them.

Shared by the acceptance tests and the scripts in ``scripts/`` so that the
numbers a script records are the numbers the tests check.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .audio import save_wav
from .losses import log_spectral_distance, oracle_snr
from .room import ObservationSet, simulate, speech_shaped_noise, split_rir, synth_rir, synthetic_utterance
from .stft import StftConfig, istft, stft
from .wpe import WpeConfig, dereverberate, iterative_wpe, vace_wpe, wpe_apply


@dataclass(frozen=True)
class Scene:
    index: int
    duration_s: float
    t60_ms: float
    snr_db: float
    direct_delay_ms: float
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


def draw_scenes(n: int, seed: int, duration_s=(4.0, 6.0), t60_ms=(300.0, 900.0), snr_db=(3.0, 20.0)) -> list:
    """``n`` scenes with parameters drawn uniformly from the given ranges."""
    rng = np.random.default_rng(seed)
    return [
        Scene(
            index=i,
            duration_s=float(rng.uniform(*duration_s)),
            t60_ms=float(rng.uniform(*t60_ms)),
            snr_db=float(rng.uniform(*snr_db)),
            direct_delay_ms=float(rng.uniform(2.0, 10.0)),
            seed=int(rng.integers(0, 2**31 - 1)),
        )
        for i in range(n)
    ]


def render(scene: Scene, channels: int = 1) -> ObservationSet:
    """Simulate the scene; with ``channels=2`` the second channel is a second microphone."""
    base = scene.seed
    source = synthetic_utterance(scene.duration_s, seed=base)
    rir = synth_rir(scene.t60_ms, scene.direct_delay_ms, seed=base + 1, channels=channels)
    bundle, _, _ = split_rir(rir)
    noise = speech_shaped_noise(scene.duration_s + 1.0, seed=base + 2)
    return simulate(source, bundle, noise, scene.snr_db, seed=base + 3)


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def passthrough_deviation(obs: ObservationSet, noisy: bool, config: WpeConfig | None = None) -> float:
    """Relative L2 change that one WPE pass makes to early-only speech (channel 0)."""
    config = config or WpeConfig(delay=3, taps=15, psd_mode="observed")
    y = (obs.early_noisy if noisy else obs.early_clean).channel(0)
    z = istft(dereverberate(stft(y, StftConfig.for_wpe()), config))
    return _rel(z.samples, y.samples)


def efficacy(obs: ObservationSet, config: WpeConfig | None = None) -> dict:
    """LSD to clean early speech and residual-reverb SNR, before and after WPE."""
    config = config or WpeConfig(delay=3, taps=30, iterations=3, psd_mode="iterative")
    cfg = StftConfig.for_wpe()
    y = obs.observed.channel(0)
    x_early = obs.early_clean.channel(0)
    y_early = obs.early_noisy.channel(0)
    Y, X = stft(y, cfg), stft(x_early, cfg)
    Z = dereverberate(Y, config)
    z = istft(Z)
    return {
        "lsd_in": log_spectral_distance(Y, X),
        "lsd_out": log_spectral_distance(Z, X),
        "srr_in": oracle_snr(x_early, y - y_early),
        "srr_out": oracle_snr(x_early, z - y_early),
    }


def dual_channel(obs: ObservationSet, vace_config: WpeConfig | None = None, single_config: WpeConfig | None = None) -> dict:
    """Residual energies of VACE with the second microphone versus single-channel WPE (channel 0).

    ``residual_*`` is the late-reverb residual: the estimated filters applied
    to the noise-free reverberant speech, minus the clean early speech.
    ``error_*`` is the full output error ``|z - y_early|^2``, which also
    counts noise the filters carry over from the predicting channels.
    """
    if obs.observed.channels < 2:
        raise ValueError("dual_channel needs a two-channel observation")
    vace_config = vace_config or WpeConfig(delay=3, taps=15, iterations=3, psd_mode="iterative")
    single_config = single_config or WpeConfig(delay=3, taps=30, iterations=3, psd_mode="iterative")
    cfg = StftConfig.for_wpe()
    Y = stft(obs.observed, cfg)
    speech = stft(obs.early_clean + obs.late, cfg)
    x_early = obs.early_clean.channel(0)
    y_early = obs.early_noisy.channel(0)
    z_vace, g_vace = vace_wpe(Y.channel(0), Y.channel(1), vace_config, return_filters=True)
    z_single, g_single = iterative_wpe(Y.channel(0), single_config, return_filters=True)

    def late_residual(spec, filters):
        return (istft(wpe_apply(spec, filters)).channel(0) - x_early).energy()

    return {
        "residual_vace": late_residual(speech, g_vace),
        "residual_single": late_residual(speech.channel(0), g_single),
        "error_vace": (istft(z_vace) - y_early).energy(),
        "error_single": (istft(z_single) - y_early).energy(),
    }


def write_demo_corpus(out_dir, n: int = 3, seed: int = 0, duration_s: float = 2.0, bit_depth: str = "float32") -> Path:
    """Write dry sources, RIRs and noises for ``n`` scenes plus a ``manifest.jsonl``; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for scene in draw_scenes(n, seed, duration_s=(duration_s, duration_s)):
        tag = f"s{scene.index:02d}"
        base = scene.seed
        save_wav(synthetic_utterance(scene.duration_s, seed=base), out / f"{tag}_source.wav", bit_depth)
        save_wav(synth_rir(scene.t60_ms, scene.direct_delay_ms, seed=base + 1), out / f"{tag}_rir.wav", bit_depth)
        save_wav(speech_shaped_noise(scene.duration_s + 1.0, seed=base + 2), out / f"{tag}_noise.wav", bit_depth)
        lines.append(
            json.dumps(
                {
                    "id": tag,
                    "source": f"{tag}_source.wav",
                    "rir": f"{tag}_rir.wav",
                    "noise": f"{tag}_noise.wav",
                    "snr_db": round(scene.snr_db, 3),
                    "seed": base + 3,
                },
                sort_keys=True,
            )
        )
    manifest = out / "manifest.jsonl"
    manifest.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return manifest
