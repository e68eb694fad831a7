"""Raw measurement ingestion and PCM WAV conversion.

Measurement files are 8-column CSVs where only the eighth column is the
microphone signal. Clips move through the pipeline as float64 arrays in
[-1, 1] and are written out as mono PCM WAV at 8/16/24 bits.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.signal import resample_poly

from .errors import EmptyFile, MalformedRow, UnsupportedFormat, UnsupportedRate

logger = logging.getLogger(__name__)

RAW_SAMPLE_RATE_HZ = 50_000
TARGET_RATES_HZ = (8_000, 16_000, 24_000, 48_000)
VALID_RATES_HZ = TARGET_RATES_HZ + (RAW_SAMPLE_RATE_HZ,)
BIT_DEPTHS = (8, 16, 24)

# Kaiser design for the anti-alias lowpass: beta sized for ~70 dB stopband,
# comfortably past the 60 dB alias requirement.
_KAISER_BETA = 6.755
_TAPS_PER_PHASE = 32


def mafaulda_class_table() -> list[tuple[int, str]]:
    """The 42 (class_id, label) pairs of the machinery fault database."""
    table = [(0, "normal")]
    for i, mm in enumerate(["0.5", "1.0", "1.5", "2.0"]):
        table.append((1 + i, f"horizontal_misalignment_{mm}mm"))
    for i, mm in enumerate(["0.51", "0.63", "1.27", "1.40", "1.78", "1.90"]):
        table.append((5 + i, f"vertical_misalignment_{mm}mm"))
    for i, g in enumerate([6, 10, 15, 20, 25, 30, 35]):
        table.append((11 + i, f"imbalance_{g}g"))
    next_id = 18
    for bearing in ("overhang", "underhang"):
        for sub in ("cage_fault", "outer_race", "ball_fault"):
            for g in (0, 6, 20, 35):
                table.append((next_id, f"{bearing}_bearing_{sub}_{g}g"))
                next_id += 1
    return table


@dataclass
class AudioClip:
    """Mono signal with amplitudes in [-1, 1] and a nominal bit depth."""

    samples: np.ndarray
    sample_rate_hz: int
    bit_depth: int = 24

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("clip samples must be a non-empty 1-D array")
        if self.sample_rate_hz not in VALID_RATES_HZ:
            raise ValueError(f"unsupported sample rate {self.sample_rate_hz}")
        if self.bit_depth not in BIT_DEPTHS:
            raise ValueError(f"unsupported bit depth {self.bit_depth}")
        peak = float(np.max(np.abs(self.samples)))
        if peak > 1.0 + 1e-9:
            raise ValueError(f"samples exceed full scale (peak {peak:.6g})")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass
class MeasurementFile:
    """One parsed 8-channel measurement recording."""

    path: str
    class_id: int
    class_label: str
    columns: np.ndarray  # shape (8, n_rows)

    def __post_init__(self):
        self.columns = np.asarray(self.columns, dtype=np.float64)
        if self.columns.shape[0] != 8 or self.columns.shape[1] == 0:
            raise ValueError("measurement file must hold 8 equal-length channels")


def parse_measurement_csv(raw_text, class_id: int, path: str = "",
                          class_label: str = "") -> MeasurementFile:
    """Parse an 8-column headerless numeric CSV into a MeasurementFile.

    Accepts a string or an iterable of lines. Raises MalformedRow with the
    offending row index on wrong arity or a non-numeric cell, EmptyFile when
    no data rows exist.
    """
    if isinstance(raw_text, str):
        lines = io.StringIO(raw_text)
    else:
        lines = raw_text
    rows = []
    idx = 0
    for line in lines:
        line = line.strip()
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != 8:
            raise MalformedRow(idx, f"expected 8 columns, got {len(cells)}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            raise MalformedRow(idx, "non-numeric cell") from None
        idx += 1
    if not rows:
        raise EmptyFile(path or "<stream>")
    columns = np.asarray(rows, dtype=np.float64).T
    return MeasurementFile(path=path, class_id=class_id,
                           class_label=class_label, columns=columns)


def extract_mic_channel(mfile: MeasurementFile,
                        sample_rate_hz: int = RAW_SAMPLE_RATE_HZ) -> AudioClip:
    """Take the eighth channel, rescaled into [-1, 1] when it overshoots.

    The rescale factor 1/max(1, peak) is logged so raw magnitudes remain
    auditable; in-range signals pass through untouched.
    """
    mic = mfile.columns[7]
    peak = float(np.max(np.abs(mic)))
    factor = 1.0 / max(1.0, peak)
    if factor != 1.0:
        samples = mic * factor
    else:
        samples = mic.copy()
    logger.debug("extract_mic_channel(%s): peak=%.6g rescale=%.6g",
                 mfile.path, peak, factor)
    return AudioClip(samples=samples, sample_rate_hz=sample_rate_hz, bit_depth=24)


def _design_lowpass(up: int, down: int) -> np.ndarray:
    """Windowed-sinc anti-alias filter for the polyphase stage, unit DC gain."""
    half = _TAPS_PER_PHASE * max(up, down)
    m = np.arange(2 * half + 1) - half
    c = min(1.0 / up, 1.0 / down)  # cutoff as a fraction of intermediate Nyquist
    h = c * np.sinc(c * m) * np.kaiser(2 * half + 1, _KAISER_BETA)
    return h / h.sum()


def resample(clip: AudioClip, target_rate_hz: int) -> AudioClip:
    """Band-limited rational-ratio resampling to one of the target rates.

    Output length is ceil(n * target / source). Raises UnsupportedRate for
    rates outside the conversion grid.
    """
    if target_rate_hz not in TARGET_RATES_HZ:
        raise UnsupportedRate(f"{target_rate_hz} Hz not in {TARGET_RATES_HZ}")
    if target_rate_hz == clip.sample_rate_hz:
        return AudioClip(clip.samples.copy(), target_rate_hz, clip.bit_depth)
    ratio = Fraction(target_rate_hz, clip.sample_rate_hz)
    up, down = ratio.numerator, ratio.denominator
    h = _design_lowpass(up, down)
    out = resample_poly(clip.samples, up, down, window=h)
    # the lowpass can ring marginally past full scale on sharp edges
    np.clip(out, -1.0, 1.0, out=out)
    assert out.size == math.ceil(clip.samples.size * up / down)
    return AudioClip(out, target_rate_hz, clip.bit_depth)


def _quantize_levels(samples: np.ndarray, bit_depth: int) -> np.ndarray:
    """Integer grid levels in [-2^(B-1), 2^(B-1)-1], round half away from zero."""
    scale = float(2 ** (bit_depth - 1))
    v = samples * scale
    q = np.copysign(np.floor(np.abs(v) + 0.5), v)
    return np.clip(q, -scale, scale - 1.0)


def quantize(clip: AudioClip, bit_depth: int) -> AudioClip:
    """Snap samples to the uniform 2^bit_depth-level PCM grid over [-1, 1)."""
    if bit_depth not in BIT_DEPTHS:
        raise ValueError(f"unsupported bit depth {bit_depth}")
    q = _quantize_levels(clip.samples, bit_depth)
    samples = q / float(2 ** (bit_depth - 1))
    return AudioClip(samples, clip.sample_rate_hz, bit_depth)


def encode_wav(clip: AudioClip) -> bytes:
    """Serialize as canonical mono PCM RIFF/WAVE (little-endian).

    8-bit data is stored unsigned with a 128 offset, 16/24-bit as signed
    two's complement (24-bit packed in 3 bytes).
    """
    bits = clip.bit_depth
    q = _quantize_levels(clip.samples, bits).astype(np.int32)
    if bits == 8:
        data = (q + 128).astype(np.uint8).tobytes()
    elif bits == 16:
        data = q.astype("<i2").tobytes()
    else:
        u = q.astype(np.uint32).view(np.uint32)
        packed = np.empty((q.size, 3), dtype=np.uint8)
        packed[:, 0] = u & 0xFF
        packed[:, 1] = (u >> 8) & 0xFF
        packed[:, 2] = (u >> 16) & 0xFF
        data = packed.tobytes()
    bytes_per_frame = bits // 8
    fmt = struct.pack("<HHIIHH", 1, 1, clip.sample_rate_hz,
                      clip.sample_rate_hz * bytes_per_frame, bytes_per_frame, bits)
    pad = b"\x00" if len(data) % 2 else b""
    riff_size = 4 + (8 + len(fmt)) + (8 + len(data) + len(pad))
    return b"".join([
        b"RIFF", struct.pack("<I", riff_size), b"WAVE",
        b"fmt ", struct.pack("<I", len(fmt)), fmt,
        b"data", struct.pack("<I", len(data)), data, pad,
    ])


def decode_wav(payload: bytes) -> AudioClip:
    """Parse a mono PCM WAV back into an AudioClip.

    Raises UnsupportedFormat on non-PCM compression codes, channel counts
    other than 1, or bit depths outside {8, 16, 24}.
    """
    if len(payload) < 12 or payload[:4] != b"RIFF" or payload[8:12] != b"WAVE":
        raise UnsupportedFormat("not a RIFF/WAVE stream")
    pos = 12
    fmt_fields = None
    data = None
    while pos + 8 <= len(payload):
        cid = payload[pos:pos + 4]
        (size,) = struct.unpack_from("<I", payload, pos + 4)
        body = payload[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            if size < 16:
                raise UnsupportedFormat("truncated fmt chunk")
            fmt_fields = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            data = body
        pos += 8 + size + (size % 2)
    if fmt_fields is None or data is None:
        raise UnsupportedFormat("missing fmt or data chunk")
    audio_format, channels, rate, _, _, bits = fmt_fields
    if audio_format != 1:
        raise UnsupportedFormat(f"compression code {audio_format} is not PCM")
    if channels != 1:
        raise UnsupportedFormat(f"{channels} channels; only mono is supported")
    if bits not in BIT_DEPTHS:
        raise UnsupportedFormat(f"unsupported bit depth {bits}")
    if bits == 8:
        q = np.frombuffer(data, dtype=np.uint8).astype(np.int32) - 128
    elif bits == 16:
        q = np.frombuffer(data, dtype="<i2").astype(np.int32)
    else:
        raw = np.frombuffer(data[:3 * (len(data) // 3)], dtype=np.uint8)
        raw = raw.reshape(-1, 3).astype(np.int32)
        q = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
        q = np.where(q >= 1 << 23, q - (1 << 24), q)
    samples = q.astype(np.float64) / float(2 ** (bits - 1))
    return AudioClip(samples, int(rate), bits)


@dataclass
class ManifestEntry:
    path: str
    class_id: int
    class_label: str
    source: str = ""  # original recording path, carried through stage dirs

    def source_path(self) -> str:
        return self.source or self.path


def read_manifest(path) -> list[ManifestEntry]:
    """Read the (path, class_id, class_label[, source]) CSV mapping files to classes."""
    entries = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            entries.append(ManifestEntry(path=row["path"],
                                         class_id=int(row["class_id"]),
                                         class_label=row["class_label"],
                                         source=row.get("source") or ""))
    if not entries:
        raise EmptyFile(str(path))
    return entries


def write_manifest(path, entries: list[ManifestEntry]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        with_source = any(e.source for e in entries)
        writer.writerow(["path", "class_id", "class_label"]
                        + (["source"] if with_source else []))
        for e in entries:
            row = [e.path, e.class_id, e.class_label]
            if with_source:
                row.append(e.source)
            writer.writerow(row)
