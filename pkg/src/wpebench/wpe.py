"""Weighted prediction error (WPE) dereverberation in the STFT domain.

Late reverberation at frame ``t`` is predicted from the frames
``t - delay, ..., t - delay - taps + 1`` of every input channel. Per frequency
bin the prediction filter solves the PSD-weighted normal equations

    (R + eps * tr(R) / (D*K) * I) G = P,
    R = sum_t y~_t y~_t^H / lambda_t,   P = sum_t y~_t y_t^H / lambda_t,

and the output is ``z_t = y_t - G^H y~_t``. Arrays follow the ``Spectrogram``
layout ``(channel, frame, bin)``; stacked history vectors are tap-major, so
entry ``k * D + d`` holds channel ``d`` at lag ``delay + k``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .audio import load_wav
from .errors import ConfigError, FormatError, NumericalError
from .stft import Spectrogram, read_spectrogram_dump, stft

PSD_MODES = ("observed", "iterative", "oracle", "external")


@dataclass(frozen=True)
class WpeConfig:
    delay: int = 3
    taps: int = 30
    iterations: int = 3
    psd_mode: str = "observed"
    diag_load: float = 1e-6
    psd_floor: float = 1e-10

    def __post_init__(self):
        if self.delay < 1:
            raise ConfigError(f"delay must be >= 1, got {self.delay}")
        if self.taps < 0:
            raise ConfigError(f"taps must be >= 0, got {self.taps}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.psd_mode not in PSD_MODES:
            raise ConfigError(f"psd_mode must be one of {PSD_MODES}, got {self.psd_mode!r}")
        if not self.diag_load >= 0:
            raise ConfigError("diag_load must be >= 0")
        if not self.psd_floor > 0:
            raise ConfigError("psd_floor must be > 0")

    @classmethod
    def single_channel(cls, **kw) -> "WpeConfig":
        return cls(**{"taps": 30, **kw})

    @classmethod
    def vace(cls, **kw) -> "WpeConfig":
        return cls(**{"taps": 15, **kw})

    def to_dict(self) -> dict:
        return {
            "delay": self.delay,
            "taps": self.taps,
            "iterations": self.iterations,
            "psd_mode": self.psd_mode,
            "diag_load": self.diag_load,
            "psd_floor": self.psd_floor,
        }


@dataclass(frozen=True, eq=False)
class PsdEstimate:
    """Per time-frequency power, ``values[frame, bin]``."""

    values: np.ndarray
    mode: str

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ConfigError(f"PSD must be (frame, bin), got shape {v.shape}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ConfigError("PSD values must be finite and nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape

    def scaled(self, gain: float) -> "PsdEstimate":
        return PsdEstimate(gain * self.values, self.mode)


@dataclass(frozen=True, eq=False)
class LpFilterSet:
    """Prediction matrices ``filters[bin]`` of shape ``(D*K, D)``."""

    filters: np.ndarray
    delay: int
    taps: int
    channels: int

    def __post_init__(self):
        g = np.asarray(self.filters, dtype=np.complex128)
        if g.ndim != 3 or g.shape[1:] != (self.channels * self.taps, self.channels):
            raise ConfigError(
                f"filters of shape {g.shape} do not match D={self.channels}, K={self.taps}"
            )
        if not np.all(np.isfinite(g)):
            raise NumericalError("non-finite filter coefficients")
        g.setflags(write=False)
        object.__setattr__(self, "filters", g)

    @property
    def n_bins(self) -> int:
        return self.filters.shape[0]


def _coeffs(spec) -> np.ndarray:
    return spec.coefficients if isinstance(spec, Spectrogram) else np.asarray(spec)


def build_delayed_stack(spec, delay: int, taps: int) -> np.ndarray:
    """Stacked delayed history, shape ``(bin, frame, D*taps)``; missing history is zero."""
    y = _coeffs(spec)
    D, T, F = y.shape
    out = np.zeros((F, T, D * taps), dtype=np.complex128)
    yt = y.transpose(2, 1, 0)  # (F, T, D)
    for k in range(taps):
        lag = delay + k
        if lag >= T:
            break
        out[:, lag:, k * D : (k + 1) * D] = yt[:, : T - lag]
    return out


def floor_psd(values: np.ndarray, floor: float) -> np.ndarray:
    """Clamp at ``floor`` times the largest value (or ``floor`` itself for all-zero input)."""
    peak = float(np.max(values)) if values.size else 0.0
    level = floor * peak if peak > 0 else floor
    return np.maximum(values, level)


def estimate_psd(
    source: Spectrogram | None,
    mode: str = "observed",
    *,
    external: PsdEstimate | np.ndarray | None = None,
    channels=None,
    floor: float = 1e-10,
) -> PsdEstimate:
    """Channel-averaged power of ``source``, or a pass-through of ``external``.

    ``observed`` takes the raw input, ``iterative`` the previous output and
    ``oracle`` a clean (or noisy) early-speech reference; all three average
    ``|.|^2`` over ``channels`` (default: every channel). ``external`` uses
    the supplied values. The result is floored relative to its maximum.
    """
    if mode not in PSD_MODES:
        raise ConfigError(f"unknown PSD mode {mode!r}")
    if (mode == "external") != (external is not None):
        raise ConfigError("an external PSD must be given exactly when mode='external'")
    if mode == "external":
        values = external.values if isinstance(external, PsdEstimate) else np.asarray(external, float)
        if source is not None and values.shape != (source.n_frames, source.n_bins):
            raise ConfigError(
                f"external PSD shape {values.shape} does not match "
                f"{(source.n_frames, source.n_bins)}"
            )
    else:
        power = source.power()
        if channels is not None:
            power = power[np.atleast_1d(channels)]
        values = power.mean(axis=0)
    return PsdEstimate(floor_psd(values, floor), mode)


def psd_from_lps(lps) -> PsdEstimate:
    """Exponentiate a log-power spectrum ``(frame, bin)`` into a PSD."""
    return PsdEstimate(np.exp(np.asarray(lps, dtype=np.float64)), "external")


def load_psd_file(path) -> PsdEstimate:
    """Read an SPG1 dump holding single-channel LPS values in the real part."""
    raw = read_spectrogram_dump(path)
    if raw.shape[0] != 1:
        raise FormatError(f"{path}: PSD dump must hold one channel, found {raw.shape[0]}")
    return psd_from_lps(raw[0].real)


def weighted_correlations(spec, psd: PsdEstimate, delay: int, taps: int):
    """Return ``(R, P)`` with shapes ``(F, DK, DK)`` and ``(F, DK, D)``."""
    y = _coeffs(spec)
    D, T, F = y.shape
    lam = psd.values
    if lam.shape != (T, F):
        raise ConfigError(f"PSD shape {lam.shape} does not match spectrogram {(T, F)}")
    if np.any(lam <= 0):
        raise ConfigError("PSD must be strictly positive; floor it first")
    stack = build_delayed_stack(y, delay, taps)
    weighted = stack / lam.T[:, :, np.newaxis]
    wh = weighted.transpose(0, 2, 1)
    R = wh @ stack.conj()
    P = wh @ y.transpose(2, 1, 0).conj()
    return R, P


def loaded_system(R: np.ndarray, diag_load: float) -> np.ndarray:
    """``R + eps * tr(R) / n * I`` for each bin."""
    n = R.shape[-1]
    if n == 0:
        return R.copy()
    trace = np.real(np.trace(R, axis1=-2, axis2=-1))
    return R + (diag_load * trace / n)[:, np.newaxis, np.newaxis] * np.eye(n)


def solve_filters(R: np.ndarray, P: np.ndarray, diag_load: float) -> np.ndarray:
    """Solve the loaded normal equations bin by bin.

    Uses a Cholesky solve, falling back to least squares when the
    factorisation fails; raises :class:`NumericalError` if both fail.
    """
    F, n, D = P.shape
    G = np.zeros((F, n, D), dtype=np.complex128)
    if n == 0:
        return G
    A = loaded_system(R, diag_load)
    for f in range(F):
        if not (np.all(np.isfinite(A[f])) and np.all(np.isfinite(P[f]))):
            raise NumericalError(f"non-finite normal equations at bin {f}", bin_index=f)
        try:
            G[f] = scipy.linalg.cho_solve(
                scipy.linalg.cho_factor(A[f], lower=True, check_finite=False),
                P[f],
                check_finite=False,
            )
        except np.linalg.LinAlgError:
            try:
                G[f] = scipy.linalg.lstsq(A[f], P[f], check_finite=False)[0]
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise NumericalError(f"filter solve failed at bin {f}: {exc}", bin_index=f) from exc
        if not np.all(np.isfinite(G[f])):
            raise NumericalError(f"non-finite filter at bin {f}", bin_index=f)
    return G


def wpe_filter_estimate(spec: Spectrogram, psd: PsdEstimate, config: WpeConfig) -> LpFilterSet:
    R, P = weighted_correlations(spec, psd, config.delay, config.taps)
    G = solve_filters(R, P, config.diag_load)
    return LpFilterSet(G, config.delay, config.taps, spec.channels)


def wpe_apply(spec: Spectrogram, filters: LpFilterSet) -> Spectrogram:
    y = spec.coefficients
    D, T, F = y.shape
    if filters.channels != D or filters.n_bins != F:
        raise ConfigError("filters do not match the spectrogram")
    if filters.taps == 0:
        return spec
    stack = build_delayed_stack(y, filters.delay, filters.taps)
    late = stack @ filters.filters.conj()  # (F, T, D)
    return spec.with_coefficients(y - late.transpose(2, 1, 0))


def wpe_single_pass(spec: Spectrogram, config: WpeConfig, psd: PsdEstimate) -> Spectrogram:
    return wpe_apply(spec, wpe_filter_estimate(spec, psd, config))


def _iterate(spec: Spectrogram, config: WpeConfig, psd: PsdEstimate, rounds: int, channels=None):
    for i in range(rounds):
        filters = wpe_filter_estimate(spec, psd, config)
        out = wpe_apply(spec, filters)
        if i + 1 < rounds:
            psd = estimate_psd(out, "iterative", channels=channels, floor=config.psd_floor)
    return out, filters


def iterative_wpe(spec: Spectrogram, config: WpeConfig, return_filters: bool = False):
    """Classic WPE: start from the observed PSD, then re-weight with the output power.

    With ``return_filters`` the filters of the last round come back as well.
    """
    psd = estimate_psd(spec, "observed", floor=config.psd_floor)
    out, filters = _iterate(spec, config, psd, config.iterations)
    return (out, filters) if return_filters else out


def dereverberate(
    spec: Spectrogram,
    config: WpeConfig,
    psd: PsdEstimate | None = None,
    reference: Spectrogram | None = None,
) -> Spectrogram:
    """Run WPE with the PSD source chosen by ``config.psd_mode``.

    ``oracle`` needs ``reference`` (clean or noisy early speech) and
    ``external`` needs ``psd``.
    """
    mode = config.psd_mode
    if mode == "iterative":
        return iterative_wpe(spec, config)
    if mode == "observed":
        psd = estimate_psd(spec, "observed", floor=config.psd_floor)
    elif mode == "oracle":
        if reference is None:
            raise ConfigError("oracle PSD mode needs a reference spectrogram")
        psd = estimate_psd(reference, "oracle", floor=config.psd_floor)
    else:
        if psd is None:
            raise ConfigError("external PSD mode needs a PSD estimate")
        psd = estimate_psd(spec, "external", external=psd, floor=config.psd_floor)
    return wpe_single_pass(spec, config, psd)


def vace_wpe(
    actual: Spectrogram,
    virtual: Spectrogram,
    config: WpeConfig,
    psd: PsdEstimate | None = None,
    reference: Spectrogram | None = None,
    return_filters: bool = False,
):
    """Dual-channel WPE on ``[actual; virtual]``, returning the actual channel's output.

    The PSD is taken from the actual channel alone; the virtual channel only
    enters the filter estimation. ``return_filters`` adds the dual-channel
    filters of the last round to the result.
    """
    if actual.channels != 1 or virtual.channels != 1:
        raise ConfigError("vace_wpe expects mono actual and virtual spectrograms")
    if actual.shape != virtual.shape:
        raise ConfigError(f"actual {actual.shape} and virtual {virtual.shape} differ in shape")
    if config.taps == 0:
        return (actual, LpFilterSet(np.zeros((actual.n_bins, 0, 2)), config.delay, 0, 2)) if return_filters else actual
    pair = actual.with_coefficients(np.concatenate([actual.coefficients, virtual.coefficients]))
    mode = config.psd_mode
    rounds = 1
    if mode in ("observed", "iterative"):
        lam = estimate_psd(actual, "observed", floor=config.psd_floor)
        rounds = config.iterations if mode == "iterative" else 1
    elif mode == "oracle":
        if reference is None:
            raise ConfigError("oracle PSD mode needs a reference spectrogram")
        lam = estimate_psd(reference, "oracle", channels=0, floor=config.psd_floor)
    else:
        if psd is None:
            raise ConfigError("external PSD mode needs a PSD estimate")
        lam = estimate_psd(actual, "external", external=psd, floor=config.psd_floor)
    out, filters = _iterate(pair, config, lam, rounds, channels=0)
    return (out.channel(0), filters) if return_filters else out.channel(0)


def virtual_channel_source(
    kind: str,
    actual: Spectrogram,
    *,
    path=None,
    delay: int = 0,
    taps=None,
) -> Spectrogram:
    """Provide the second channel for :func:`vace_wpe`.

    ``file`` reads a WAV (analysed with the actual channel's STFT settings) or
    an SPG1 dump; ``delayed_copy`` shifts the actual channel by ``delay``
    frames; ``filtered_copy`` runs the per-bin FIR ``taps`` along the frame axis.
    """
    y = actual.coefficients[:1]
    if kind == "file":
        if path is None:
            raise ConfigError("file virtual source needs a path")
        if os.fspath(path).lower().endswith(".wav"):
            v = stft(load_wav(path).channel(0), actual.config).coefficients
        else:
            v = read_spectrogram_dump(path)
        if v.shape != y.shape:
            raise FormatError(f"{path}: virtual channel shape {v.shape} != actual {y.shape}")
        return actual.with_coefficients(v)
    if kind == "delayed_copy":
        if delay < 0:
            raise ConfigError("delay must be >= 0")
        taps = [0.0] * delay + [1.0]
    elif kind == "filtered_copy":
        if taps is None or len(taps) == 0:
            raise ConfigError("filtered_copy needs at least one tap")
    else:
        raise ConfigError(f"unknown virtual source kind {kind!r}")
    T = y.shape[1]
    v = np.zeros_like(y)
    for k, h in enumerate(taps):
        if h != 0 and k < T:
            v[:, k:] += h * y[:, : T - k]
    return actual.with_coefficients(v)


def with_taps(config: WpeConfig, taps: int) -> WpeConfig:
    return replace(config, taps=taps)
