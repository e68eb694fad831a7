"""Signal conditioning: peak normalization, silence gating, Wiener denoising.

The stage order is fixed (normalize -> silence removal -> Wiener filter);
`preprocess_clip` is the only composition point, so no other order can be
constructed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import AllSilent, InvalidSize, SilentSignal
from .signal_io import AudioClip

logger = logging.getLogger(__name__)


@dataclass
class PreprocessConfig:
    normalize_dbfs: float = -5.8
    silence_dbfs: float = -18.0
    wiener_size: int = 33
    silence_frame_ms: float = 10.0

    def __post_init__(self):
        if not -12.0 <= self.normalize_dbfs <= 0.0:
            raise ValueError("normalize_dbfs must lie in [-12, 0]")
        if not -48.0 <= self.silence_dbfs <= -15.0:
            raise ValueError("silence_dbfs must lie in [-48, -15]")
        if self.silence_dbfs >= self.normalize_dbfs:
            raise ValueError("silence_dbfs must be below normalize_dbfs")
        if not (1 <= self.wiener_size <= 35 and self.wiener_size % 2 == 1):
            raise ValueError("wiener_size must be odd and in [1, 35]")
        if self.silence_frame_ms <= 0:
            raise ValueError("silence_frame_ms must be positive")


def normalize_peak(clip: AudioClip, target_dbfs: float) -> AudioClip:
    """Scale so the peak sits at 10^(target_dbfs/20) full scale."""
    peak = float(np.max(np.abs(clip.samples)))
    if peak == 0.0:
        raise SilentSignal("cannot normalize an all-zero clip")
    gain = 10.0 ** (target_dbfs / 20.0) / peak
    out = np.clip(clip.samples * gain, -1.0, 1.0)
    return AudioClip(out, clip.sample_rate_hz, clip.bit_depth)


def remove_silence(clip: AudioClip, threshold_dbfs: float,
                   frame_ms: float = 10.0) -> AudioClip:
    """Drop consecutive non-overlapping frames whose RMS falls below threshold.

    Frame length is round(frame_ms * fs / 1000) samples; a trailing partial
    frame is gated by the same rule. Survivors keep their original order.
    Raises AllSilent when nothing survives.
    """
    if frame_ms <= 0:
        raise ValueError("frame_ms must be positive")
    x = clip.samples
    n = max(1, int(round(frame_ms * clip.sample_rate_hz / 1000.0)))
    kept = []
    for start in range(0, x.size, n):
        frame = x[start:start + n]
        rms = float(np.sqrt(np.mean(frame * frame)))
        if rms > 0.0 and 20.0 * np.log10(rms) >= threshold_dbfs:
            kept.append(frame)
    if not kept:
        raise AllSilent("every frame fell below the silence threshold")
    return AudioClip(np.concatenate(kept), clip.sample_rate_hz, clip.bit_depth)


def wiener_filter(clip: AudioClip, size: int) -> AudioClip:
    """Local mean/variance shrinkage denoiser over a zero-padded window.

    Noise power is the mean of the local variances of the input itself.
    size=1 reproduces the input exactly.
    """
    if size % 2 == 0 or not 1 <= size <= 35:
        raise InvalidSize(f"window size {size} must be odd and in [1, 35]")
    x = clip.samples
    kernel = np.ones(size)
    local_mean = np.convolve(x, kernel, mode="same") / size
    local_sq = np.convolve(x * x, kernel, mode="same") / size
    local_var = local_sq - local_mean * local_mean
    noise = float(np.mean(local_var))
    denom = np.maximum(local_var, noise)
    safe = np.where(denom > 0.0, denom, 1.0)
    factor = np.where(denom > 0.0, np.maximum(local_var - noise, 0.0) / safe, 0.0)
    out = local_mean + factor * (x - local_mean)
    np.clip(out, -1.0, 1.0, out=out)
    return AudioClip(out, clip.sample_rate_hz, clip.bit_depth)


def preprocess_clip(clip: AudioClip, cfg: PreprocessConfig) -> AudioClip:
    """Run the fixed conditioning chain on one clip."""
    out = normalize_peak(clip, cfg.normalize_dbfs)
    out = remove_silence(out, cfg.silence_dbfs, cfg.silence_frame_ms)
    return wiener_filter(out, cfg.wiener_size)
