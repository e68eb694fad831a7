"""Hann framing and the fixed 144-dimensional per-frame feature vector.

Position map (never varies with configuration):

    [0..13]    time-domain statistics
    [14..17]   spectral centroid / bandwidth / rolloff / flatness
    [18..23]   spectral contrast, 6 sub-bands
    [24..63]   40 MFCCs
    [64..103]  first-order MFCC deltas
    [104..143] second-order MFCC deltas

Time statistics come from the raw frame; spectral and mel features from the
Hann-windowed frame zero-padded to the next power of two.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dct

from .errors import ClipTooShort
from .signal_io import AudioClip

N_FEATURES = 144
N_MFCC = 40
N_MELS = 128
LOG_FLOOR = 1e-10
DELTA_HALF_WIDTH = 4  # 9-frame regression window
ENTROPY_BINS = 100
ROLLOFF_FRACTION = 0.85
CONTRAST_BASE_HZ = 200.0
CONTRAST_BANDS = 6
CONTRAST_ALPHA = 0.02
SPECTRAL_EPS = 1e-10

TIME_NAMES = ["mean", "median", "variance", "std", "skewness", "kurtosis",
              "entropy", "energy", "power", "min", "max", "peak_to_peak",
              "rms", "zcr"]
SPECTRAL_NAMES = ["spectral_centroid", "spectral_bandwidth", "spectral_rolloff",
                  "spectral_flatness"] + [f"spectral_contrast_{b}" for b in range(CONTRAST_BANDS)]

CSV_FEATURE_COLUMNS = [f"f{i:03d}" for i in range(N_FEATURES)]

DESCRIPTIVE_NAMES = (TIME_NAMES + SPECTRAL_NAMES
                     + [f"mfcc_{i:02d}" for i in range(N_MFCC)]
                     + [f"delta_mfcc_{i:02d}" for i in range(N_MFCC)]
                     + [f"delta2_mfcc_{i:02d}" for i in range(N_MFCC)])

MFCC_POSITIONS = list(range(24, 64))
DELTA_POSITIONS = list(range(64, 104))
DELTA2_POSITIONS = list(range(104, 144))


@dataclass
class FramingConfig:
    window_ms: float = 500.0
    overlap_ms: float = 0.0

    def __post_init__(self):
        if not 300.0 <= self.window_ms <= 600.0:
            raise ValueError("window_ms must lie in [300, 600]")
        if not 0.0 <= self.overlap_ms <= 200.0:
            raise ValueError("overlap_ms must lie in [0, 200]")
        if self.overlap_ms >= self.window_ms:
            raise ValueError("overlap must be shorter than the window")


@dataclass
class FileFeatureSet:
    """All feature vectors extracted from one source file."""

    vectors: np.ndarray  # shape (n_frames, 144)
    source_file: str
    class_id: int
    class_label: str = ""
    origin: str = "original"


def hann_window(n: int) -> np.ndarray:
    """Symmetric Hann window, zero at both endpoints."""
    if n < 2:
        raise ValueError("window length must be at least 2")
    idx = np.arange(n)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * idx / (n - 1))


def frame_array(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """Slice x into frames at offsets 0, hop, 2*hop, ...; partial tail dropped."""
    if frame_len < 2 or hop < 1:
        raise ValueError("frame_len must be >= 2 and hop >= 1")
    if x.size < frame_len:
        raise ClipTooShort(f"{x.size} samples < frame of {frame_len}")
    n_frames = (x.size - frame_len) // hop + 1
    offsets = np.arange(n_frames) * hop
    return x[offsets[:, None] + np.arange(frame_len)[None, :]]


def frame_signal(clip: AudioClip, cfg: FramingConfig) -> np.ndarray:
    """Frame a clip per the window/overlap durations in milliseconds."""
    fs = clip.sample_rate_hz
    frame_len = int(round(cfg.window_ms * fs / 1000.0))
    hop = frame_len - int(round(cfg.overlap_ms * fs / 1000.0))
    return frame_array(clip.samples, frame_len, hop)


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


def time_features(frame: np.ndarray) -> np.ndarray:
    """The 14 time-domain statistics (positions 0..13)."""
    x = np.asarray(frame, dtype=np.float64)
    n = x.size
    mean = float(x.mean())
    median = float(np.median(x))
    centered = x - mean
    variance = float(np.mean(centered * centered))
    std = float(np.sqrt(variance))
    if std > 0.0:
        skewness = float(np.mean(centered ** 3)) / std ** 3
        kurtosis = float(np.mean(centered ** 4)) / std ** 4 - 3.0
    else:
        skewness = 0.0
        kurtosis = 0.0
    counts, _ = np.histogram(x, bins=ENTROPY_BINS)
    p = counts[counts > 0] / n
    entropy = float(-np.sum(p * np.log(p)))
    energy = float(np.sum(x * x))
    power = energy / n
    lo = float(x.min())
    hi = float(x.max())
    rms = float(np.sqrt(power))
    signs = np.sign(x)
    nz = signs != 0
    idx = np.where(nz, np.arange(n), 0)
    np.maximum.accumulate(idx, out=idx)
    filled = signs[idx]
    zcr = float(np.count_nonzero(filled[1:] * filled[:-1] < 0)) / (n - 1)
    return np.array([mean, median, variance, std, skewness, kurtosis, entropy,
                     energy, power, lo, hi, hi - lo, rms, zcr])


def _magnitude_spectrum(frame: np.ndarray, fs: int):
    n = frame.size
    windowed = frame * hann_window(n)
    nfft = _next_pow2(n)
    mags = np.abs(np.fft.rfft(windowed, nfft))
    freqs = np.fft.rfftfreq(nfft, 1.0 / fs)
    return mags, freqs


def contrast_band_edges(fs: int) -> list[tuple[float, float]]:
    """Six sub-bands: [0, 200), then octaves [200*2^(b-1), 200*2^b), capped at Nyquist."""
    nyquist = fs / 2.0
    edges = [(0.0, CONTRAST_BASE_HZ)]
    for b in range(1, CONTRAST_BANDS):
        lo = CONTRAST_BASE_HZ * 2.0 ** (b - 1)
        hi = CONTRAST_BASE_HZ * 2.0 ** b
        edges.append((min(lo, nyquist), min(hi, nyquist)))
    return edges


def spectral_features(frame: np.ndarray, fs: int) -> np.ndarray:
    """Centroid, bandwidth, rolloff, flatness, and 6 contrast values (14..23)."""
    mags, freqs = _magnitude_spectrum(np.asarray(frame, dtype=np.float64), fs)
    total = float(mags.sum())
    out = np.zeros(10)
    if total == 0.0:
        out[3] = 1.0
        return out
    power = mags * mags + SPECTRAL_EPS
    centroid = float((freqs * mags).sum()) / total
    bandwidth = float(np.sqrt(((freqs - centroid) ** 2 * mags).sum() / total))
    cum = np.cumsum(mags)
    k = int(np.searchsorted(cum, ROLLOFF_FRACTION * total, side="left"))
    rolloff = float(freqs[min(k, freqs.size - 1)])
    flatness = float(np.exp(np.mean(np.log(power))) / np.mean(power))
    out[:4] = [centroid, bandwidth, rolloff, flatness]
    for b, (lo, hi) in enumerate(contrast_band_edges(fs)):
        if b == CONTRAST_BANDS - 1:
            mask = (freqs >= lo) & (freqs <= hi)
        else:
            mask = (freqs >= lo) & (freqs < hi)
        band = np.sort(mags[mask])
        if band.size == 0:
            continue
        cnt = max(1, int(CONTRAST_ALPHA * band.size))
        top = float(band[-cnt:].mean())
        bottom = float(band[:cnt].mean())
        out[4 + b] = np.log(top + SPECTRAL_EPS) - np.log(bottom + SPECTRAL_EPS)
    return out


def _hz_to_mel(f):
    """Mel scale, linear below 1 kHz and logarithmic above."""
    f = np.asarray(f, dtype=np.float64)
    lin = f / (200.0 / 3.0)
    log_step = np.log(6.4) / 27.0
    with np.errstate(divide="ignore"):
        log_part = 15.0 + np.log(np.maximum(f, 1e-12) / 1000.0) / log_step
    return np.where(f < 1000.0, lin, log_part)


def _mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    lin = m * (200.0 / 3.0)
    log_step = np.log(6.4) / 27.0
    log_part = 1000.0 * np.exp(log_step * (m - 15.0))
    return np.where(m < 15.0, lin, log_part)


@lru_cache(maxsize=8)
def mel_filterbank(fs: int, nfft: int) -> np.ndarray:
    """128 area-normalized triangular filters spanning 0..fs/2, shape (128, nfft//2+1)."""
    freqs = np.fft.rfftfreq(nfft, 1.0 / fs)
    mel_pts = np.linspace(0.0, float(_hz_to_mel(fs / 2.0)), N_MELS + 2)
    hz_pts = _mel_to_hz(mel_pts)
    bank = np.zeros((N_MELS, freqs.size))
    for i in range(N_MELS):
        lower, center, upper = hz_pts[i], hz_pts[i + 1], hz_pts[i + 2]
        rising = (freqs - lower) / (center - lower)
        falling = (upper - freqs) / (upper - center)
        tri = np.maximum(0.0, np.minimum(rising, falling))
        bank[i] = tri * (2.0 / (upper - lower))
    return bank


def mfcc_sequence(frames: np.ndarray, fs: int) -> np.ndarray:
    """40 MFCCs per frame: Hann, power spectrum, 128 mel bands in dB, DCT-II."""
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    n = frames.shape[1]
    nfft = _next_pow2(n)
    spectra = np.fft.rfft(frames * hann_window(n)[None, :], nfft, axis=1)
    power = spectra.real ** 2 + spectra.imag ** 2
    energies = power @ mel_filterbank(fs, nfft).T
    log_bands = 10.0 * np.log10(np.maximum(energies, LOG_FLOOR))
    return dct(log_bands, type=2, norm="ortho", axis=1)[:, :N_MFCC]


def delta(seq: np.ndarray, order: int = 1) -> np.ndarray:
    """Local regression slope over a 9-frame window with edge replication."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    out = np.asarray(seq, dtype=np.float64)
    one_dimensional = out.ndim == 1
    if one_dimensional:
        out = out[:, None]
    for _ in range(order):
        out = _delta_once(out)
    return out[:, 0] if one_dimensional else out


def _delta_once(seq: np.ndarray) -> np.ndarray:
    w = DELTA_HALF_WIDTH
    t = seq.shape[0]
    padded = np.pad(seq, ((w, w), (0, 0)), mode="edge")
    num = np.zeros_like(seq)
    for d in range(1, w + 1):
        num += d * (padded[w + d:w + d + t] - padded[w - d:w - d + t])
    denom = 2.0 * sum(d * d for d in range(1, w + 1))
    return num / denom


def extract_file_features(clip: AudioClip, framing: FramingConfig,
                          class_id: int, source_file: str,
                          class_label: str = "",
                          origin: str = "original") -> FileFeatureSet:
    """One 144-value vector per frame, deltas computed over the file's own frames."""
    frames = frame_signal(clip, framing)
    fs = clip.sample_rate_hz
    n_frames = frames.shape[0]
    vectors = np.empty((n_frames, N_FEATURES))
    for t in range(n_frames):
        vectors[t, 0:14] = time_features(frames[t])
        vectors[t, 14:24] = spectral_features(frames[t], fs)
    mfcc = mfcc_sequence(frames, fs)
    vectors[:, 24:64] = mfcc
    vectors[:, 64:104] = delta(mfcc, 1)
    vectors[:, 104:144] = delta(mfcc, 2)
    if not np.all(np.isfinite(vectors)):
        raise ValueError(f"non-finite feature values extracted from {source_file}")
    return FileFeatureSet(vectors=vectors, source_file=source_file,
                          class_id=class_id, class_label=class_label, origin=origin)
