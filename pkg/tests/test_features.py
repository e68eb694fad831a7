import numpy as np
import pytest

from rotodiag.errors import ClipTooShort
from rotodiag.features import (CSV_FEATURE_COLUMNS, DESCRIPTIVE_NAMES,
                               N_FEATURES, N_MELS, FramingConfig, delta,
                               extract_file_features, frame_array,
                               frame_signal, hann_window, mfcc_sequence,
                               spectral_features, time_features)
from rotodiag.signal_io import AudioClip


def clip_of(x, fs=8000):
    return AudioClip(np.asarray(x, dtype=np.float64), fs, 16)


class TestHann:
    def test_n3(self):
        assert np.allclose(hann_window(3), [0.0, 1.0, 0.0])

    def test_n5_closed_form(self):
        # oracle: 0.5 - 0.5*cos(2*pi*n/4) at n = 0..4
        expected = [0.5 - 0.5 * np.cos(2 * np.pi * n / 4) for n in range(5)]
        assert np.allclose(hann_window(5), expected)
        assert np.allclose(hann_window(5), [0.0, 0.5, 1.0, 0.5, 0.0])

    @pytest.mark.parametrize("n", [2, 7, 64, 401])
    def test_symmetry_and_endpoints(self, n):
        w = hann_window(n)
        assert w[0] == 0.0 and w[-1] == 0.0
        assert np.allclose(w, w[::-1])


class TestFraming:
    def test_five_seconds_at_8k(self):
        clip = clip_of(np.random.default_rng(0).uniform(-1, 1, 5 * 8000))
        frames = frame_signal(clip, FramingConfig(window_ms=500.0, overlap_ms=0.0))
        assert frames.shape == (10, 4000)

    def test_offsets_enumeration(self):
        # oracle: offsets o with o + 400 <= 1000 stepping by 300 -> {0, 300, 600}
        x = np.arange(1000, dtype=float) / 1000.0
        frames = frame_array(x, 400, 300)
        assert frames.shape == (3, 400)
        assert frames[1][0] == x[300] and frames[2][0] == x[600]

    def test_too_short(self):
        with pytest.raises(ClipTooShort):
            frame_signal(clip_of(np.ones(100) * 0.1), FramingConfig(500.0, 0.0))

    def test_config_bounds(self):
        with pytest.raises(ValueError):
            FramingConfig(window_ms=200.0)
        with pytest.raises(ValueError):
            FramingConfig(window_ms=300.0, overlap_ms=250.0)


class TestTimeFeatures:
    def test_all_zero_frame(self):
        f = time_features(np.zeros(64))
        # mean, variance, skew, kurtosis, entropy, energy, rms, zcr, p2p all zero
        assert np.allclose(f[[0, 2, 4, 5, 6, 7, 11, 12, 13]], 0.0)

    def test_alternating_signs(self):
        f = time_features(np.array([1.0, -1.0, 1.0, -1.0]))
        assert f[13] == 1.0          # 3 sign changes over 3 gaps
        assert f[0] == 0.0           # mean
        assert f[12] == 1.0          # rms
        assert f[11] == 2.0          # peak to peak

    def test_hand_computed_moments(self):
        f = time_features(np.array([1.0, 2.0, 3.0, 4.0]))
        assert f[0] == 2.5 and f[1] == 2.5
        assert f[2] == 1.25          # population variance
        assert f[7] == 30.0          # energy
        assert f[8] == 7.5           # power

    def test_energy_power_rms_identities(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            x = rng.uniform(-1, 1, rng.integers(8, 500))
            f = time_features(x)
            assert np.isclose(f[7], x.size * f[8], rtol=1e-9)
            assert np.isclose(f[12] ** 2, f[8], rtol=1e-9)
            assert f[9] <= f[0] <= f[10]
            assert np.isclose(f[11], f[10] - f[9])

    def test_entropy_bounds(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            f = time_features(rng.uniform(-1, 1, 256))
            assert 0.0 <= f[6] <= np.log(100) + 1e-12

    def test_zeros_inherit_previous_sign(self):
        # +1, 0, -1: zero takes sign +1, so exactly one strict change
        f = time_features(np.array([1.0, 0.0, -1.0]))
        assert np.isclose(f[13], 0.5)


class TestSpectralFeatures:
    def test_zero_frame_conventions(self):
        f = spectral_features(np.zeros(256), 8000)
        assert np.allclose(f[[0, 1, 2]], 0.0)
        assert f[3] == 1.0
        assert np.allclose(f[4:], 0.0)

    def test_pure_tone_centroid_rolloff(self):
        fs, n = 8000, 4000
        t = np.arange(n) / fs
        tone = np.sin(2 * np.pi * 1000.0 * t)
        f = spectral_features(tone, fs)
        bin_hz = fs / 4096.0
        assert abs(f[0] - 1000.0) <= bin_hz
        assert abs(f[2] - 1000.0) <= 2 * bin_hz

    def test_flatness_separates_noise_from_tone(self):
        rng = np.random.default_rng(3)
        noise = rng.standard_normal(2048) * 0.2
        t = np.arange(2048) / 8000.0
        tone = np.sin(2 * np.pi * 800.0 * t)
        assert spectral_features(noise, 8000)[3] > 0.5
        assert spectral_features(tone, 8000)[3] < 0.1


class TestMfcc:
    def test_zero_frame_closed_form(self):
        # all 128 log-bands hit the floor 10*log10(1e-10) = -100;
        # orthonormal DCT-II of a constant: c0 = -100 * sqrt(128), rest 0
        out = mfcc_sequence(np.zeros((1, 256)), 8000)
        assert np.isclose(out[0, 0], -100.0 * np.sqrt(128.0), rtol=1e-12)
        assert np.allclose(out[0, 1:], 0.0, atol=1e-9)

    def test_brute_force_oracle(self):
        # independent route: direct DFT sums, independently built mel bank,
        # direct DCT-II cosine sums
        fs, n = 8000, 256
        nfft = 256
        rng = np.random.default_rng(4)

        def oracle(frame):
            w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / (n - 1))
            xw = frame * w
            k = np.arange(nfft // 2 + 1)
            dft = np.array([np.sum(xw * np.exp(-2j * np.pi * kk * np.arange(n) / nfft))
                            for kk in k])
            power = np.abs(dft) ** 2
            freqs = k * fs / nfft

            def to_mel(f):
                return f / (200.0 / 3.0) if f < 1000.0 else \
                    15.0 + np.log(f / 1000.0) / (np.log(6.4) / 27.0)

            def to_hz(m):
                return m * (200.0 / 3.0) if m < 15.0 else \
                    1000.0 * np.exp((np.log(6.4) / 27.0) * (m - 15.0))

            pts = np.array([to_hz(m) for m in
                            np.linspace(0.0, to_mel(fs / 2.0), N_MELS + 2)])
            energies = np.zeros(N_MELS)
            for i in range(N_MELS):
                lo, ce, hi = pts[i], pts[i + 1], pts[i + 2]
                tri = np.maximum(0.0, np.minimum((freqs - lo) / (ce - lo),
                                                 (hi - freqs) / (hi - ce)))
                energies[i] = np.sum(tri * (2.0 / (hi - lo)) * power)
            logb = 10.0 * np.log10(np.maximum(energies, 1e-10))
            coefs = np.zeros(40)
            for j in range(40):
                s = np.sum(logb * np.cos(np.pi * j * (2 * np.arange(N_MELS) + 1)
                                         / (2 * N_MELS)))
                scale = np.sqrt(1.0 / N_MELS) if j == 0 else np.sqrt(2.0 / N_MELS)
                coefs[j] = 2.0 * s * scale / 2.0
            return coefs

        frames = rng.uniform(-1, 1, (20, n))
        ours = mfcc_sequence(frames, fs)
        for i in range(20):
            assert np.allclose(ours[i], oracle(frames[i]), atol=1e-6)

    def test_identical_frames_identical_rows(self):
        frame = np.sin(np.linspace(0, 20, 512))
        out = mfcc_sequence(np.vstack([frame, frame]), 8000)
        assert np.array_equal(out[0], out[1])


class TestDelta:
    def test_constant_sequence(self):
        seq = np.ones((12, 5)) * 3.3
        assert np.allclose(delta(seq, 1), 0.0)
        assert np.allclose(delta(seq, 2), 0.0)

    def test_ramp_interior_slope_one(self):
        # oracle: sum(d * 2d) / (2 * sum(d^2)) = 1 exactly
        seq = np.arange(15, dtype=float)
        d = delta(seq, 1)
        assert np.allclose(d[4:-4], 1.0)

    def test_single_frame_zero(self):
        assert np.allclose(delta(np.array([[1.0, -2.0, 5.0]]), 1), 0.0)


class TestExtract:
    def test_vector_count_and_length(self):
        rng = np.random.default_rng(5)
        clip = clip_of(rng.uniform(-0.9, 0.9, 5 * 8000))
        fs = extract_file_features(clip, FramingConfig(500.0, 0.0), 3, "a.csv", "lbl")
        assert fs.vectors.shape == (10, N_FEATURES)
        assert fs.class_id == 3 and fs.origin == "original"

    def test_determinism(self):
        rng = np.random.default_rng(6)
        x = rng.uniform(-0.9, 0.9, 4 * 8000)
        a = extract_file_features(clip_of(x), FramingConfig(400.0, 100.0), 0, "f")
        b = extract_file_features(clip_of(x.copy()), FramingConfig(400.0, 100.0), 0, "f")
        assert np.array_equal(a.vectors, b.vectors)

    def test_delta_positions_recomputable(self):
        rng = np.random.default_rng(7)
        clip = clip_of(rng.uniform(-0.9, 0.9, 5 * 8000))
        fs = extract_file_features(clip, FramingConfig(500.0, 0.0), 0, "f")
        mfcc_cols = fs.vectors[:, 24:64]
        assert np.allclose(fs.vectors[:, 64:104], delta(mfcc_cols, 1), atol=1e-12)
        assert np.allclose(fs.vectors[:, 104:144], delta(mfcc_cols, 2), atol=1e-12)

    def test_position_map_is_stable(self):
        assert len(CSV_FEATURE_COLUMNS) == 144
        assert len(DESCRIPTIVE_NAMES) == 144
        assert DESCRIPTIVE_NAMES[0] == "mean"
        assert DESCRIPTIVE_NAMES[13] == "zcr"
        assert DESCRIPTIVE_NAMES[14] == "spectral_centroid"
        assert DESCRIPTIVE_NAMES[18] == "spectral_contrast_0"
        assert DESCRIPTIVE_NAMES[24] == "mfcc_00"
        assert DESCRIPTIVE_NAMES[64] == "delta_mfcc_00"
        assert DESCRIPTIVE_NAMES[104] == "delta2_mfcc_00"
        assert DESCRIPTIVE_NAMES[143] == "delta2_mfcc_39"
