import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wpebench.audio import TimeSignal
from wpebench.errors import ConfigError, DegenerateInputError
from wpebench.room import (
    DECAY_CONST,
    RirBundle,
    convolve,
    decay_envelope,
    mix_at_snr,
    simulate,
    speech_shaped_noise,
    split_rir,
    synth_rir,
    synthetic_utterance,
    white_noise,
)


def naive_conv(x, h):
    out = np.zeros(len(x))
    for n in range(len(x)):
        for k in range(min(len(h), n + 1)):
            out[n] += h[k] * x[n - k]
    return out


def energy_db(a, b):
    return 10 * math.log10(np.sum(a ** 2) / np.sum(b ** 2))


def test_unit_impulse_rir_split():
    h = np.zeros(2000)
    h[0] = 1.0
    for boundary in (1.0, 50.0, 500.0):
        bundle, early, late = split_rir(TimeSignal(h), boundary)
        assert np.array_equal(early.samples[0], h)
        assert not late.samples.any()
        assert bundle.main_peak_index == 0


def test_split_index_arithmetic():
    h = np.zeros(4000)
    h[160] = 1.0
    h[161:] = 0.01
    bundle, early, late = split_rir(TimeSignal(h), 50.0)
    assert bundle.split_index == 960
    assert not early.samples[0, 960:].any()
    assert not late.samples[0, :960].any()


def test_split_energy_partition():
    rir = synth_rir(400.0, 0.0, seed=3)
    _, early, late = split_rir(rir, 50.0)
    assert early.energy() + late.energy() == pytest.approx(rir.energy(), rel=1e-14)


def test_boundary_past_end_leaves_late_empty():
    rir = synth_rir(100.0, 2.0, length_ms=30.0, seed=1)
    bundle, early, late = split_rir(rir, 50.0)
    assert bundle.split_index == len(rir)
    assert np.array_equal(early.samples, rir.samples)
    assert not late.samples.any()


def test_bundle_invariants():
    h = TimeSignal(np.array([0.1, 1.0, 0.2, 0.1]))
    with pytest.raises(ConfigError):
        RirBundle(h, 0, 2)
    with pytest.raises(ConfigError):
        RirBundle(h, 1, 0)
    with pytest.raises(ConfigError):
        RirBundle(h, 1, 4)
    with pytest.raises(ConfigError):
        split_rir(h, 0.0)


@given(st.integers(1, 3000), st.floats(0.1, 300.0), st.integers(0, 2**32 - 1))
def test_partition_property(n, boundary_ms, seed):
    h = np.random.default_rng(seed).standard_normal(n)
    _, early, late = split_rir(TimeSignal(h), boundary_ms)
    assert np.array_equal(early.samples + late.samples, h[np.newaxis])
    assert not np.any(early.samples * late.samples)


def test_decay_reaches_minus_60_db_at_t60():
    env = decay_envelope(300.0, 4801)
    assert env[4800] == pytest.approx(math.exp(-DECAY_CONST))
    assert env[4800] == pytest.approx(1e-3, rel=1e-4)


def test_synth_rir_properties():
    a = synth_rir(300.0, 10.0, seed=5)
    b = synth_rir(300.0, 10.0, seed=5)
    assert np.array_equal(a.samples, b.samples)
    assert int(np.argmax(np.abs(a.samples[0]))) == 160
    assert np.max(np.abs(a.samples)) == 1.0
    assert not np.array_equal(a.samples, synth_rir(300.0, 10.0, seed=6).samples)


def test_synth_rir_tail_follows_envelope():
    rir = synth_rir(500.0, 0.0, length_ms=1000.0, seed=2).samples[0]
    # energy ratio of two 100 ms windows 300 ms apart tracks exp(-2*6.9077*0.3/0.5)
    w = 1600
    e1 = np.sum(rir[1 : 1 + w] ** 2)
    e2 = np.sum(rir[1 + 4800 : 1 + 4800 + w] ** 2)
    expected_db = -20 * DECAY_CONST * 0.3 / 0.5 / math.log(10)
    assert 10 * math.log10(e2 / e1) == pytest.approx(expected_db, abs=1.5)


def test_two_channel_rir():
    rir = synth_rir(400.0, 5.0, seed=9, channels=2)
    assert rir.channels == 2
    assert int(np.argmax(np.abs(rir.samples[1]))) == 80 + 3
    with pytest.raises(ConfigError):
        synth_rir(0.0)


def test_convolve_identity_and_shift(rng):
    x = TimeSignal(rng.standard_normal(500))
    h = np.zeros(50)
    h[0] = 1.0
    assert np.array_equal(convolve(x, TimeSignal(h)).samples, x.samples)
    h = np.zeros(50)
    h[7] = 1.0
    y = convolve(x, TimeSignal(h)).samples[0]
    assert not y[:7].any()
    assert np.array_equal(y[7:], x.samples[0, :-7])


def test_convolve_matches_loop_oracle(rng):
    x, h = rng.standard_normal(1000), rng.standard_normal(100)
    y = convolve(TimeSignal(x), TimeSignal(h)).samples[0]
    ref = naive_conv(x, h)
    assert np.linalg.norm(y - ref) <= 1e-10 * np.linalg.norm(ref)


def test_long_convolution_uses_fft_path_within_tolerance(rng):
    x, h = rng.standard_normal(20000), rng.standard_normal(5000)
    y = convolve(TimeSignal(x), TimeSignal(h)).samples[0]
    ref = np.convolve(x, h)[:20000]
    assert np.linalg.norm(y - ref) <= 1e-10 * np.linalg.norm(ref)


@given(st.integers(1, 300), st.integers(1, 60), st.integers(0, 2**32 - 1))
def test_convolution_oracle_property(n, m, seed):
    r = np.random.default_rng(seed)
    x, h = r.standard_normal(n), r.standard_normal(m)
    y = convolve(TimeSignal(x), TimeSignal(h)).samples[0]
    ref = naive_conv(x, h)
    assert np.linalg.norm(y - ref) <= 1e-10 * max(np.linalg.norm(ref), 1e-300)


def test_convolve_rejects_multichannel_source(rng):
    with pytest.raises(ConfigError):
        convolve(TimeSignal(rng.standard_normal((2, 10))), TimeSignal(np.ones(3)))


def test_mix_equal_energy_at_zero_db():
    s = TimeSignal(np.array([1.0, -1.0, 1.0, -1.0]))
    n = TimeSignal(np.array([1.0, 1.0, -1.0, -1.0]))
    noisy, scaled = mix_at_snr(s, n, 0.0)
    np.testing.assert_allclose(scaled.samples, n.samples, rtol=1e-15)
    assert np.array_equal(noisy.samples, s.samples + scaled.samples)


def test_mix_at_20_db(rng):
    s = TimeSignal(rng.standard_normal(3000))
    _, scaled = mix_at_snr(s, TimeSignal(rng.standard_normal(5000)), 20.0, seed=1)
    assert scaled.energy() / s.energy() == pytest.approx(1e-2, rel=1e-12)


def test_mix_degenerate_inputs(rng):
    with pytest.raises(DegenerateInputError):
        mix_at_snr(TimeSignal(np.zeros(100)), TimeSignal(rng.standard_normal(100)), 10.0)
    with pytest.raises(DegenerateInputError):
        mix_at_snr(TimeSignal(rng.standard_normal(100)), TimeSignal(np.zeros(100)), 10.0)


def test_short_noise_is_tiled_and_seeded(rng):
    s = TimeSignal(rng.standard_normal(1000))
    n = TimeSignal(rng.standard_normal(300))
    _, a = mix_at_snr(s, n, 5.0, seed=4)
    _, b = mix_at_snr(s, n, 5.0, seed=4)
    assert np.array_equal(a.samples, b.samples)
    x = a.samples[0]
    np.testing.assert_allclose(x[300:600], x[:300], rtol=1e-15)


@given(
    st.floats(-10, 40),
    st.integers(50, 2000),
    st.integers(10, 3000),
    st.integers(0, 2**32 - 1),
)
def test_snr_realization_property(snr_db, n, m, seed):
    r = np.random.default_rng(seed)
    s = TimeSignal(r.standard_normal(n))
    noisy, scaled = mix_at_snr(s, TimeSignal(r.standard_normal(m)), snr_db, seed=seed)
    assert abs(energy_db(s.samples, scaled.samples) - snr_db) <= 1e-9
    assert np.array_equal(noisy.samples, s.samples + scaled.samples)


def test_anechoic_simulation():
    src = synthetic_utterance(1.0, seed=1)
    h = np.zeros(100)
    h[0] = 1.0
    bundle, _, _ = split_rir(TimeSignal(h))
    obs = simulate(src, bundle, white_noise(1.0, seed=2), 200.0, seed=3)
    assert not obs.late.samples.any()
    np.testing.assert_allclose(obs.observed.samples, src.samples, atol=1e-9)


def test_simulation_additivity_and_snr():
    src = synthetic_utterance(2.0, seed=11)
    bundle, _, _ = split_rir(synth_rir(600.0, 4.0, seed=12))
    obs = simulate(src, bundle, speech_shaped_noise(3.0, seed=13), 3.0, seed=14)
    # bit-exact under the library's summation order (early + late) + noise
    assert np.array_equal(obs.observed.samples, obs.early_clean.samples + obs.late.samples + obs.noise.samples)
    assert np.array_equal(obs.early_noisy.samples, obs.early_clean.samples + obs.noise.samples)
    reverberant = obs.early_clean.samples + obs.late.samples
    assert abs(energy_db(reverberant, obs.noise.samples) - 3.0) <= 1e-9
    assert obs.snr_db == pytest.approx(3.0, abs=1e-9)


def test_simulation_is_deterministic():
    src = synthetic_utterance(1.0, seed=1)
    bundle, _, _ = split_rir(synth_rir(300.0, seed=2))
    noise = white_noise(2.0, seed=3)
    a = simulate(src, bundle, noise, 10.0, seed=4)
    b = simulate(src, bundle, noise, 10.0, seed=4)
    for key, sig in a.components().items():
        assert np.array_equal(sig.samples, b.components()[key].samples)


def test_synthetic_utterance_is_seeded():
    a = synthetic_utterance(1.5, seed=3)
    assert len(a) == 24000
    assert np.array_equal(a.samples, synthetic_utterance(1.5, seed=3).samples)
    assert np.max(np.abs(a.samples)) == pytest.approx(0.5)
