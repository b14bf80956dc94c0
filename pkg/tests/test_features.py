import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wpebench.audio import TimeSignal
from wpebench.errors import ConfigError, DegenerateInputError, FormatError
from wpebench.features import (
    LOG_FLOOR,
    EmbeddingVector,
    FeatureMatrix,
    cosine_similarity,
    hz_to_mel,
    load_embeddings,
    log_mfbe,
    lps,
    mel_filterbank,
    mel_to_hz,
    mfcc,
    save_embeddings,
    swms,
    toy_embedding,
)
from wpebench.room import speech_shaped_noise, synthetic_utterance, white_noise
from wpebench.stft import Spectrogram, StftConfig, stft

EMB = StftConfig.for_embedding()


def flat_spec(frames=5, value=1.0):
    c = np.full((1, frames, EMB.n_bins), np.sqrt(value), dtype=complex)
    return Spectrogram(c, EMB, 16000, (frames - 1) * EMB.hop_len)


def features(values, kind="log_mfbe", hop=160):
    return FeatureMatrix(values, kind, {"sample_rate": 16000, "hop_len": hop})


def test_mel_scale_round_trip():
    f = np.array([0.0, 700.0, 1000.0, 8000.0])
    np.testing.assert_allclose(mel_to_hz(hz_to_mel(f)), f, rtol=1e-12, atol=1e-9)
    assert hz_to_mel(700.0) == pytest.approx(2595.0 * np.log10(2.0))


def test_filterbank_shape_and_peaks():
    fb = mel_filterbank(64, 512, 16000)
    assert fb.shape == (64, 257)
    assert fb.min() >= 0 and fb.max() <= 1.0
    assert np.all(fb.sum(axis=1) > 0)
    with pytest.raises(ConfigError):
        mel_filterbank(1, 512, 16000)
    with pytest.raises(ConfigError):
        mel_filterbank(200, 64, 16000)


def test_zero_spectrogram_gives_log_floor():
    f = log_mfbe(flat_spec(value=0.0))
    np.testing.assert_array_equal(f.values, np.log(LOG_FLOOR))


def test_flat_power_gives_log_row_sums():
    f = log_mfbe(flat_spec(value=1.0))
    rows = mel_filterbank(64, 512, 16000).sum(axis=1)
    np.testing.assert_allclose(f.values, np.broadcast_to(np.log(rows), f.values.shape), rtol=1e-12)


def test_doubling_amplitude_adds_log4():
    x = white_noise(0.5, seed=3)
    a = log_mfbe(stft(x, EMB)).values
    b = log_mfbe(stft(x.scaled(2.0), EMB)).values
    np.testing.assert_allclose(b - a, np.log(4.0), rtol=1e-12)


def test_band_count_checked():
    with pytest.raises(ConfigError):
        log_mfbe(flat_spec(), bands=1)


def test_mfcc_of_constant_bands():
    f = mfcc(features(np.full((3, 64), 2.5)))
    np.testing.assert_allclose(f.values[:, 0], 2.5 * np.sqrt(64), rtol=1e-12)
    np.testing.assert_allclose(f.values[:, 1:], 0.0, atol=1e-12)


def test_mfcc_of_zero_is_zero():
    assert not mfcc(features(np.zeros((2, 64)))).values.any()


def test_mfcc_of_delta_matches_closed_form():
    x = np.zeros((1, 64))
    x[0, 0] = 1.0
    k = np.arange(20)
    scale = np.where(k == 0, np.sqrt(1 / 64), np.sqrt(2 / 64))
    expected = scale * np.cos(np.pi * k * 0.5 / 64)
    np.testing.assert_allclose(mfcc(features(x)).values[0], expected, rtol=1e-12, atol=1e-12)


def test_mfcc_checks():
    with pytest.raises(ConfigError):
        mfcc(features(np.zeros((2, 10))), coeffs=20)
    with pytest.raises(ConfigError):
        mfcc(features(np.zeros((2, 64)), kind="lps"))


def test_swms_of_constant_is_zero():
    assert np.allclose(swms(features(np.full((500, 4), 3.0))).values, 0.0, atol=1e-12)


def test_swms_short_utterance_is_global_mean(rng):
    x = rng.standard_normal((100, 5))  # 1 s at 100 frames/s, window 3 s
    np.testing.assert_allclose(swms(features(x)).values, x - x.mean(axis=0), rtol=1e-12, atol=1e-12)


def test_swms_middle_frame_matches_hand_window(rng):
    x = rng.standard_normal((1000, 3))  # 10 s
    out = swms(features(x)).values
    half = 150
    t = 500
    np.testing.assert_allclose(out[t], x[t] - x[t - half : t + half + 1].mean(axis=0), rtol=1e-10)
    # first frame sees a window truncated at the start
    np.testing.assert_allclose(out[0], x[0] - x[: half + 1].mean(axis=0), rtol=1e-10)


def test_swms_rejects_nonpositive_window(rng):
    with pytest.raises(ConfigError):
        swms(features(rng.standard_normal((10, 2))), 0.0)


def test_feature_frame_counts_agree():
    x = synthetic_utterance(1.3, seed=2)
    spec = stft(x, EMB)
    fb = log_mfbe(spec)
    assert lps(spec).n_frames == fb.n_frames == mfcc(fb).n_frames == spec.n_frames


def test_feature_matrix_rejects_nan():
    with pytest.raises(ConfigError):
        features(np.array([[np.nan]]))


def test_identical_signals_identical_embeddings():
    x = synthetic_utterance(2.0, seed=1)
    a, b = toy_embedding(x), toy_embedding(x)
    assert a.dim == 128
    assert np.array_equal(a.values, b.values)
    assert cosine_similarity(a, b) == 1.0


def test_scaled_copy_regression():
    # SWMS removes the constant log offset, so only floored (silent) bins move
    x = synthetic_utterance(2.0, seed=5)
    cs = cosine_similarity(toy_embedding(x), toy_embedding(x.scaled(0.5)))
    assert cs == pytest.approx(0.999975302348487, abs=1e-12)


def test_scaled_noise_keeps_mean_block():
    x = white_noise(2.0, seed=9)
    a, b = toy_embedding(x), toy_embedding(x.scaled(3.0))
    np.testing.assert_allclose(a.values, b.values, atol=1e-10)


def test_white_and_speech_shaped_noise_differ():
    cs = cosine_similarity(toy_embedding(white_noise(2.0, seed=1)), toy_embedding(speech_shaped_noise(2.0, seed=1)))
    assert cs < 1.0


def test_silent_signal_cannot_be_embedded():
    with pytest.raises(DegenerateInputError):
        toy_embedding(TimeSignal(np.zeros(16000)))


@given(st.integers(10, 60), st.integers(0, 2**32 - 1))
def test_time_reversal_keeps_mean_block(frames, seed):
    # lengths with (N - 1) a multiple of the hop put reversed frames on the same grid
    n = frames * EMB.hop_len + 1
    x = np.random.default_rng(seed).standard_normal(n)
    a = toy_embedding(TimeSignal(x)).values[:64]
    b = toy_embedding(TimeSignal(x[::-1].copy())).values[:64]
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_cosine_values():
    assert cosine_similarity([1.0, 0.0], [0.0, 2.0]) == 0.0
    assert cosine_similarity([1.0, 2.0], [-1.0, -2.0]) == -1.0
    with pytest.raises(DegenerateInputError):
        cosine_similarity([0.0, 0.0], [1.0, 0.0])


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50))
def test_self_cosine_is_one(v):
    if not any(v):
        return
    assert cosine_similarity(v, v) == 1.0


def test_embedding_table_round_trip(tmp_path, rng):
    table = {f"utt{i}": EmbeddingVector(rng.standard_normal(7)) for i in range(4)}
    save_embeddings(table, tmp_path / "e.txt")
    back = load_embeddings(tmp_path / "e.txt")
    assert list(back) == list(table)
    for k in table:
        assert np.array_equal(back[k].values, table[k].values)


def test_embedding_table_edge_cases(tmp_path):
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    assert load_embeddings(empty) == {}
    bad = tmp_path / "bad.txt"
    bad.write_text("dim=2\na 1 2\nb 1 2 3\n")
    with pytest.raises(FormatError):
        load_embeddings(bad)
    bad.write_text("dim=2\na 1 2\na 3 4\n")
    with pytest.raises(FormatError):
        load_embeddings(bad)
    bad.write_text("a 1 2\n")
    with pytest.raises(FormatError):
        load_embeddings(bad)
    with pytest.raises(FormatError):
        save_embeddings({"a": EmbeddingVector([1.0]), "b": EmbeddingVector([1.0, 2.0])}, bad)


def test_cosine_of_extreme_magnitudes():
    assert cosine_similarity([4.2e-308], [4.2e-308]) == 1.0
    assert cosine_similarity([1e200, 1e200], [1e-200, 1e-200]) == 1.0
    assert cosine_similarity([1e300, 0.0], [0.0, 5e-324]) == 0.0
