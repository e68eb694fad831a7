import numpy as np
import pytest
from scipy.signal import wiener as scipy_wiener

from rotodiag.errors import AllSilent, InvalidSize, SilentSignal
from rotodiag.preprocess import (PreprocessConfig, normalize_peak,
                                 preprocess_clip, remove_silence, wiener_filter)
from rotodiag.signal_io import AudioClip


def clip_of(x, fs=8000):
    return AudioClip(np.asarray(x, dtype=np.float64), fs, 16)


class TestNormalize:
    def test_zero_dbfs_full_scale(self):
        out = normalize_peak(clip_of([0.25, -0.125]), 0.0)
        assert np.isclose(np.max(np.abs(out.samples)), 1.0, atol=1e-6)
        assert np.allclose(out.samples, [1.0, -0.5])

    def test_minus_5p8_dbfs(self):
        # oracle: 10 ** (-5.8 / 20) evaluated directly
        expected_peak = 10.0 ** (-5.8 / 20.0)
        out = normalize_peak(clip_of([1.0, -0.3]), -5.8)
        assert np.isclose(np.max(np.abs(out.samples)), expected_peak, atol=1e-6)
        assert np.isclose(expected_peak, 0.512861, atol=1e-6)

    def test_all_zero_raises(self):
        with pytest.raises(SilentSignal):
            normalize_peak(clip_of([0.0, 0.0]), -3.0)

    def test_gain_is_linear(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-0.1, 0.1, 256)
        a = normalize_peak(clip_of(x), -6.0).samples
        b = normalize_peak(clip_of(3.0 * x), -6.0).samples
        assert np.allclose(a, b, atol=1e-12)


class TestRemoveSilence:
    def test_all_zero_raises(self):
        with pytest.raises(AllSilent):
            remove_silence(clip_of(np.zeros(1000)), -18.0, 10.0)

    def test_full_scale_square_wave_untouched(self):
        x = np.tile([1.0, -1.0], 500)
        out = remove_silence(clip_of(x), -18.0, 10.0)
        assert np.array_equal(out.samples, x)

    def test_tone_silence_tone_fixture(self):
        # 100 ms tone at -6 dBFS + 100 ms zeros + 100 ms tone, 10 ms frames.
        # oracle: direct per-frame RMS; every tone frame survives, zeros drop.
        fs = 8000
        t = np.arange(int(0.1 * fs)) / fs
        tone = 10 ** (-6 / 20) * np.sin(2 * np.pi * 1000 * t)
        x = np.concatenate([tone, np.zeros(int(0.1 * fs)), tone])
        frames = x.reshape(-1, 80)
        rms_db = 20 * np.log10(np.maximum(np.sqrt((frames ** 2).mean(axis=1)), 1e-12))
        surviving = int((rms_db >= -18.0).sum())
        out = remove_silence(clip_of(x, fs), -18.0, 10.0)
        assert out.samples.size == surviving * 80 == 2 * tone.size

    def test_output_is_subsequence_of_frames(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(-1, 1, 4000) * (rng.uniform(0, 1, 4000) > 0.3)
        x[:400] = 0.0
        out = remove_silence(clip_of(x), -18.0, 10.0)
        frames_in = [tuple(f) for f in x.reshape(-1, 80)]
        frames_out = [tuple(f) for f in out.samples.reshape(-1, 80)]
        it = iter(frames_in)
        assert all(f in it for f in frames_out)  # ordered subsequence
        # every surviving frame sits at or above the threshold
        rms = np.sqrt((out.samples.reshape(-1, 80) ** 2).mean(axis=1))
        assert np.all(20 * np.log10(rms) >= -18.0)


class TestWiener:
    def test_size_one_identity(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(-1, 1, 500)
        out = wiener_filter(clip_of(x), 1)
        assert np.array_equal(out.samples, x)

    def test_constant_passthrough_interior(self):
        x = np.full(300, 0.123)
        out = wiener_filter(clip_of(x), 9)
        pad = 4
        assert np.allclose(out.samples[pad:-pad], 0.123, atol=1e-9)

    def test_noise_variance_reduced(self):
        rng = np.random.default_rng(3)
        x = 0.5 * rng.standard_normal(4000).clip(-2, 2) / 2
        out = wiener_filter(clip_of(x), 33)
        assert out.samples.var() < x.var()

    @pytest.mark.parametrize("size", [3, 9, 33])
    def test_matches_scipy_reference(self, size):
        rng = np.random.default_rng(4)
        x = (0.3 * np.sin(np.linspace(0, 40, 2000))
             + 0.05 * rng.standard_normal(2000))
        ours = wiener_filter(clip_of(x), size).samples
        ref = scipy_wiener(x, mysize=size)
        assert np.allclose(ours, ref, atol=1e-10)

    def test_interior_shrinkage(self):
        # |out - local_mean| <= |in - local_mean| sample by sample
        rng = np.random.default_rng(5)
        x = rng.uniform(-0.9, 0.9, 1000)
        size = 11
        out = wiener_filter(clip_of(x), size).samples
        mu = np.convolve(x, np.ones(size), "same") / size
        assert np.all(np.abs(out - mu) <= np.abs(x - mu) + 1e-12)

    @pytest.mark.parametrize("size", [0, 2, 34, 37])
    def test_invalid_size(self, size):
        with pytest.raises(InvalidSize):
            wiener_filter(clip_of(np.ones(10) * 0.1), size)


class TestConfigAndChain:
    def test_config_bounds(self):
        with pytest.raises(ValueError):
            PreprocessConfig(normalize_dbfs=1.0)
        with pytest.raises(ValueError):
            PreprocessConfig(silence_dbfs=-10.0)
        with pytest.raises(ValueError):
            PreprocessConfig(wiener_size=2)

    def test_chain_runs_in_fixed_order(self):
        # normalization first means the silence gate sees the boosted signal:
        # a quiet clip with true content survives the gate only when
        # normalization happened before it.
        fs = 8000
        t = np.arange(fs) / fs
        x = 0.01 * np.sin(2 * np.pi * 500 * t)  # -40 dBFS raw peak
        cfg = PreprocessConfig(normalize_dbfs=-5.8, silence_dbfs=-18.0,
                               wiener_size=3, silence_frame_ms=10.0)
        out = preprocess_clip(clip_of(x, fs), cfg)
        assert out.samples.size == x.size  # nothing gated after normalize
