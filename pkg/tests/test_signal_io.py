import numpy as np
import pytest

from rotodiag.errors import (EmptyFile, MalformedRow, UnsupportedFormat,
                             UnsupportedRate)
from rotodiag.signal_io import (AudioClip, decode_wav, encode_wav,
                                extract_mic_channel, mafaulda_class_table,
                                parse_measurement_csv, quantize, resample)


def csv_text(columns):
    rows = np.asarray(columns).T
    return "\n".join(",".join(repr(float(v)) for v in row) for row in rows)


class TestParse:
    def test_zero_rows(self):
        text = "0,0,0,0,0,0,0,0\n0,0,0,0,0,0,0,0\n"
        mfile = parse_measurement_csv(text, class_id=3)
        assert mfile.columns.shape == (8, 2)
        assert np.all(mfile.columns == 0)
        assert mfile.class_id == 3

    def test_wrong_arity_reports_row(self):
        with pytest.raises(MalformedRow) as err:
            parse_measurement_csv("1,2,3,4,5,6,7\n", class_id=0)
        assert err.value.row == 0

    def test_non_numeric_cell(self):
        with pytest.raises(MalformedRow) as err:
            parse_measurement_csv("0,0,0,0,0,0,0,0\n0,0,0,oops,0,0,0,0\n", 0)
        assert err.value.row == 1

    def test_empty(self):
        with pytest.raises(EmptyFile):
            parse_measurement_csv("", class_id=0)

    def test_sine_column_roundtrip(self):
        # oracle: direct evaluation of sin(2*pi*100*n/50000) for n = 0..9
        n = np.arange(10)
        sine = np.sin(2 * np.pi * 100.0 * n / 50000.0)
        cols = np.zeros((8, 10))
        cols[7] = sine
        mfile = parse_measurement_csv(csv_text(cols), class_id=1)
        assert np.allclose(mfile.columns[7], sine, atol=1e-9)


class TestExtractMic:
    def _mfile(self, col8):
        cols = np.zeros((8, len(col8)))
        cols[7] = col8
        return parse_measurement_csv(csv_text(cols), class_id=0)

    def test_in_range_passthrough(self):
        clip = extract_mic_channel(self._mfile([0.5, -0.5]))
        assert clip.sample_rate_hz == 50000
        assert np.array_equal(clip.samples, [0.5, -0.5])

    def test_peak_rescale(self):
        clip = extract_mic_channel(self._mfile([2.0, -1.0]))
        assert np.allclose(clip.samples, [1.0, -0.5])

    def test_zero_signal(self):
        clip = extract_mic_channel(self._mfile([0.0, 0.0]))
        assert np.all(clip.samples == 0)


class TestResample:
    def test_tone_dominant_bin(self):
        t = np.arange(50000) / 50000.0
        clip = AudioClip(0.9 * np.sin(2 * np.pi * 100.0 * t), 50000, 24)
        out = resample(clip, 8000)
        assert out.samples.size == 8000
        spectrum = np.abs(np.fft.rfft(out.samples))
        peak_hz = np.argmax(spectrum) * 8000 / out.samples.size
        assert abs(peak_hz - 100.0) <= 8000 / out.samples.size  # within one bin

    def test_dc_passthrough(self):
        clip = AudioClip(np.full(50000, 0.25), 50000, 24)
        out = resample(clip, 16000)
        interior = out.samples[1000:-1000]
        assert np.allclose(interior, 0.25, atol=1e-3)

    def test_identity_rate(self):
        rng = np.random.default_rng(0)
        clip = AudioClip(rng.uniform(-1, 1, 4096), 8000, 16)
        out = resample(clip, 8000)
        assert np.allclose(out.samples, clip.samples, atol=1e-9)

    def test_output_length_is_ceil(self):
        clip = AudioClip(np.zeros(50001), 50000, 24)
        clip.samples[0] = 0.1
        out = resample(clip, 24000)
        assert out.samples.size == -(-50001 * 24000 // 50000)

    def test_unsupported_rate(self):
        clip = AudioClip(np.ones(10) * 0.1, 50000, 24)
        with pytest.raises(UnsupportedRate):
            resample(clip, 44100)

    def test_alias_suppression_60db(self):
        # a 7 kHz tone folds across the 4 kHz target Nyquist; it must vanish
        t = np.arange(50000) / 50000.0
        tone = 0.9 * np.sin(2 * np.pi * 7000.0 * t)
        out = resample(AudioClip(tone, 50000, 24), 8000)
        out_rms = np.sqrt(np.mean(out.samples[500:-500] ** 2))
        in_rms = np.sqrt(np.mean(tone ** 2))
        assert out_rms < in_rms * 1e-3  # -60 dB


class TestQuantize:
    def test_half_on_grid(self):
        # oracle: enumerate the 256-level grid and snap
        grid = np.arange(-128, 128) / 128.0
        expected = grid[np.argmin(np.abs(grid - 0.5))]
        clip = quantize(AudioClip(np.array([0.5]), 8000, 24), 8)
        assert clip.samples[0] == expected == 0.5

    def test_zero_any_depth(self):
        for bits in (8, 16, 24):
            clip = quantize(AudioClip(np.array([0.0, 0.25]), 8000, 24), bits)
            assert clip.samples[0] == 0.0
            assert clip.bit_depth == bits

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        clip = AudioClip(rng.uniform(-1, 1, 1000), 8000, 24)
        once = quantize(clip, 8)
        twice = quantize(once, 8)
        assert np.array_equal(once.samples, twice.samples)

    @pytest.mark.parametrize("bits", [8, 16, 24])
    def test_error_bound_one_step(self, bits):
        rng = np.random.default_rng(2)
        x = rng.uniform(-1, 1, 5000)
        q = quantize(AudioClip(x, 8000, 24), bits)
        assert np.max(np.abs(q.samples - x)) <= 2.0 ** (1 - bits) + 1e-15


class TestWav:
    def test_hand_computed_8bit_bytes(self):
        clip = AudioClip(np.array([-1.0, 0.0, 0.99219]), 8000, 8)
        payload = encode_wav(clip)
        data_at = payload.index(b"data") + 8
        assert payload[data_at:data_at + 3] == bytes([0x00, 0x80, 0xFF])

    @pytest.mark.parametrize("bits", [8, 16, 24])
    def test_round_trip_exact(self, bits):
        rng = np.random.default_rng(3)
        clip = quantize(AudioClip(rng.uniform(-1, 1, 777), 16000, 24), bits)
        decoded = decode_wav(encode_wav(clip))
        assert decoded.sample_rate_hz == 16000
        assert decoded.bit_depth == bits
        assert np.array_equal(decoded.samples, clip.samples)

    def test_stereo_rejected(self):
        import struct
        fmt = struct.pack("<HHIIHH", 1, 2, 8000, 32000, 4, 16)
        data = b"\x00" * 8
        payload = b"".join([b"RIFF", struct.pack("<I", 4 + 24 + 8 + len(data)),
                            b"WAVE", b"fmt ", struct.pack("<I", 16), fmt,
                            b"data", struct.pack("<I", len(data)), data])
        with pytest.raises(UnsupportedFormat):
            decode_wav(payload)

    def test_non_pcm_rejected(self):
        import struct
        fmt = struct.pack("<HHIIHH", 3, 1, 8000, 32000, 4, 16)  # IEEE float code
        payload = b"".join([b"RIFF", struct.pack("<I", 36), b"WAVE",
                            b"fmt ", struct.pack("<I", 16), fmt,
                            b"data", struct.pack("<I", 0)])
        with pytest.raises(UnsupportedFormat):
            decode_wav(payload)

    def test_garbage_rejected(self):
        with pytest.raises(UnsupportedFormat):
            decode_wav(b"not a wav at all")


def test_chain_determinism():
    # parse -> extract -> resample -> quantize -> encode twice, identical bytes
    rng = np.random.default_rng(4)
    cols = np.zeros((8, 5000))
    cols[7] = rng.uniform(-2, 2, 5000)
    text = csv_text(cols)

    def run():
        mfile = parse_measurement_csv(text, class_id=0)
        clip = quantize(resample(extract_mic_channel(mfile), 8000), 8)
        return encode_wav(clip)

    assert run() == run()


def test_class_table_shape():
    table = mafaulda_class_table()
    assert len(table) == 42
    assert [cid for cid, _ in table] == list(range(42))
    assert len({label for _, label in table}) == 42
    assert table[29] == (29, "overhang_bearing_ball_fault_35g")
