import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wpebench.audio import TimeSignal
from wpebench.stft import Spectrogram, StftConfig

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.register_profile("ci", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_VERDICTS = {}


@pytest.fixture(scope="session")
def verdict():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""

    def record(key: str, title: str, ok: bool, detail: str = ""):
        _VERDICTS[key] = (title, bool(ok), detail)
        status = "PASS" if ok else "FAIL"
        print(f"\n[criterion {key}] {status} {title}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_VERDICTS, key=lambda k: (int(k.rstrip("ab")), k)):
        title, ok, detail = _VERDICTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key:<3} {title}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spectrogram(rng, channels=1, frames=20, bins=9, sample_rate=16000) -> Spectrogram:
    """Complex Gaussian coefficients wrapped with a config whose bin count matches ``bins``."""
    fft_len = 2 * (bins - 1)
    cfg = StftConfig(frame_len=fft_len, hop_len=fft_len // 4, fft_len=fft_len)
    c = rng.standard_normal((channels, frames, bins)) + 1j * rng.standard_normal((channels, frames, bins))
    n = (frames - 1) * cfg.hop_len
    return Spectrogram(c, cfg, sample_rate, n)


def random_signal(rng, n=16000, channels=1) -> TimeSignal:
    return TimeSignal(rng.standard_normal((channels, n)) * 0.1)
