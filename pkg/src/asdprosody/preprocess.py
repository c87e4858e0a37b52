"""Preprocessing chain: trim, noise gate, pre-emphasis, normalisation, framing, windowing."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateInputError, EmptyInputError, StateError, TooShortError
from .signal_io import AudioClip

PIPELINE_ORDER = ("trim", "gate", "resample", "pre_emphasis", "normalize", "frame", "window")
BLOCK_S = 0.010


@dataclass(frozen=True)
class PreprocessConfig:
    pre_emphasis_alpha: float = 0.98
    frame_len_s: float = 0.025
    frame_shift_s: float = 0.010
    noise_reduction_db: float = 6.0
    gate_sensitivity: float = 6.0
    freq_smoothing_bins: int = 3
    silence_threshold_db: float = -40.0
    noise_profile_s: float = 0.05
    analysis_rate_hz: float = 10000.0

    def __post_init__(self):
        if not 0.9 <= self.pre_emphasis_alpha <= 1.0:
            raise ValueError(f"pre_emphasis_alpha must lie in [0.9, 1], got {self.pre_emphasis_alpha}")
        if not 0 < self.frame_shift_s <= self.frame_len_s:
            raise ValueError("need 0 < frame_shift_s <= frame_len_s")
        if not 0 <= self.gate_sensitivity <= 24:
            raise ValueError("gate_sensitivity must lie in [0, 24]")
        if self.noise_reduction_db < 0:
            raise ValueError("noise_reduction_db must be non-negative")

    def config_hash(self) -> str:
        """Stable digest of the configuration together with the stage order."""
        payload = json.dumps({"order": PIPELINE_ORDER, "config": asdict(self)}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class FrameSequence:
    frames: np.ndarray  # (n_frames, frame_len)
    frame_len: int
    shift: int
    sample_rate_hz: float
    windowed: bool = False

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    def times_s(self) -> np.ndarray:
        """Centre time of each frame."""
        return (np.arange(self.n_frames) * self.shift + self.frame_len / 2.0) / self.sample_rate_hz


def _block_rms(x: np.ndarray, block: int) -> np.ndarray:
    n_blocks = int(math.ceil(x.size / block))
    padded = np.zeros(n_blocks * block)
    padded[: x.size] = x
    sq = (padded ** 2).reshape(n_blocks, block).sum(axis=1)
    counts = np.full(n_blocks, block, dtype=float)
    counts[-1] = x.size - (n_blocks - 1) * block
    return np.sqrt(sq / counts)


def trim_silence(clip: AudioClip, threshold_db: float = -40.0) -> AudioClip:
    """Drop leading and trailing 10 ms blocks quieter than ``threshold_db`` re. the clip peak."""
    x = clip.samples
    if x.size == 0:
        raise EmptyInputError("cannot trim an empty clip")
    peak = float(np.max(np.abs(x)))
    if peak == 0.0:
        raise EmptyInputError("clip is entirely silent")
    block = max(1, int(round(BLOCK_S * clip.sample_rate_hz)))
    rms = _block_rms(x, block)
    loud = np.flatnonzero(rms >= peak * 10.0 ** (threshold_db / 20.0))
    if loud.size == 0:
        raise EmptyInputError("no block above the silence threshold")
    start = loud[0] * block
    stop = min(x.size, (loud[-1] + 1) * block)
    return clip.with_samples(x[start:stop])


def select_noise_profile(clip: AudioClip, duration_s: float = 0.05,
                         min_contrast_db: float = 15.0):
    """Quietest ``duration_s`` stretch of the clip, if it is plausibly noise only.

    The candidate is accepted when its RMS lies at least ``min_contrast_db``
    below the 90th percentile of 10 ms block levels; otherwise ``None``.
    """
    x = clip.samples
    fs = clip.sample_rate_hz
    block = max(1, int(round(BLOCK_S * fs)))
    n_prof = int(round(duration_s * fs))
    if x.size < 2 * n_prof:
        return None
    n_blocks = x.size // block
    energy = (x[: n_blocks * block] ** 2).reshape(n_blocks, block).sum(axis=1)
    span = int(math.ceil(n_prof / block))
    if n_blocks < span:
        return None
    window_energy = np.convolve(energy, np.ones(span), mode="valid")
    best = int(np.argmin(window_energy))
    profile = x[best * block: best * block + n_prof]
    prof_rms = math.sqrt(float(np.mean(profile ** 2)))
    ref = float(np.percentile(np.sqrt(energy / block), 90))
    if ref == 0.0:
        return None
    if prof_rms > ref * 10.0 ** (-min_contrast_db / 20.0):
        return None
    return clip.with_samples(profile)


def gate_frame_length(sample_rate_hz: float) -> int:
    """Largest power of two not exceeding 50 ms of samples."""
    return 1 << int(math.floor(math.log2(max(2.0, 0.05 * sample_rate_hz))))


def _stft(x: np.ndarray, n: int):
    hop = n // 2
    window = np.hanning(n + 1)[:n]  # periodic Hann: sums to 1 at 50% overlap
    n_frames = int(math.ceil((x.size + hop) / hop)) + 1
    padded = np.zeros((n_frames - 1) * hop + n)
    padded[hop: hop + x.size] = x
    idx = np.arange(n)[None, :] + hop * np.arange(n_frames)[:, None]
    return np.fft.rfft(padded[idx] * window, axis=1), padded.size


def _istft(X: np.ndarray, n: int, total: int, length: int) -> np.ndarray:
    hop = n // 2
    frames = np.fft.irfft(X, n, axis=1)
    out = np.zeros(total)
    for i, frame in enumerate(frames):
        out[i * hop: i * hop + n] += frame
    return out[hop: hop + length]


def noise_gate(clip: AudioClip, noise_profile: AudioClip, cfg: PreprocessConfig = PreprocessConfig()) -> AudioClip:
    """Single-pass spectral gate (Hann frames, 50 % overlap, overlap-add).

    Each bin's level (power averaged over the frame and its two neighbours
    in time) is compared with the noise-profile mean power of that bin plus
    a margin of ``gate_sensitivity / 2`` dB.  Bins below are attenuated by
    ``noise_reduction_db``; the gain mask is smoothed across
    ``freq_smoothing_bins`` frequency bins.
    """
    n = gate_frame_length(clip.sample_rate_hz)
    if noise_profile.samples.size < n:
        raise ValueError(f"noise profile ({noise_profile.samples.size} samples) shorter "
                         f"than one gate frame ({n})")
    x = clip.samples
    if cfg.noise_reduction_db == 0.0:
        return clip.with_samples(x)

    P, _ = _stft(noise_profile.samples, n)
    # only frames lying fully inside the profile
    hop = n // 2
    inner = P[1: 1 + max(1, (noise_profile.samples.size - n) // hop + 1)]
    noise_power = np.mean(np.abs(inner) ** 2, axis=0)
    margin = 10.0 ** (cfg.gate_sensitivity / 2.0 / 10.0)
    threshold = noise_power * margin

    X, total = _stft(x, n)
    power = np.abs(X) ** 2
    padded = np.vstack([power[:1], power, power[-1:]])
    level = (padded[:-2] + padded[1:-1] + padded[2:]) / 3.0
    floor_gain = 10.0 ** (-cfg.noise_reduction_db / 20.0)
    mask = np.where(level < threshold, floor_gain, 1.0)
    width = int(cfg.freq_smoothing_bins)
    if width > 1:
        kernel = np.ones(width) / width
        edge = width // 2
        padded_mask = np.pad(mask, ((0, 0), (edge, edge)), mode="edge")
        mask = np.apply_along_axis(lambda row: np.convolve(row, kernel, mode="valid"), 1, padded_mask)
    return clip.with_samples(_istft(X * mask, n, total, x.size))


def pre_emphasize(clip: AudioClip, alpha: float = 0.98) -> AudioClip:
    """y[0] = x[0], y[n] = x[n] - alpha x[n-1]."""
    if not 0.9 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0.9, 1], got {alpha}")
    x = clip.samples
    y = x.copy()
    y[1:] -= alpha * x[:-1]
    return clip.with_samples(y)


def z_normalize(clip: AudioClip) -> AudioClip:
    """Zero mean, unit population standard deviation."""
    x = clip.samples
    if x.size < 2:
        raise DegenerateInputError("need at least two samples to normalise")
    mu = x.mean()
    sigma = x.std()
    if not sigma > 0 or sigma < 1e-12 * max(1.0, abs(mu)):
        raise DegenerateInputError("clip has zero variance")
    y = (x - mu) / sigma
    # second pass removes the O(eps) residual mean/scale error
    y = (y - y.mean()) / y.std()
    return clip.with_samples(y)


def frame_signal(clip: AudioClip, cfg: PreprocessConfig = PreprocessConfig()) -> FrameSequence:
    """Cut into ``frame_len_s`` frames every ``frame_shift_s``; the partial tail is dropped."""
    fs = clip.sample_rate_hz
    n = int(round(cfg.frame_len_s * fs))
    shift = int(round(cfg.frame_shift_s * fs))
    return frame_samples(clip.samples, n, shift, fs)


def frame_samples(x: np.ndarray, frame_len: int, shift: int, sample_rate_hz: float) -> FrameSequence:
    x = np.asarray(x, dtype=np.float64)
    if x.size < frame_len:
        raise TooShortError(f"{x.size} samples is shorter than one frame ({frame_len})")
    n_frames = (x.size - frame_len) // shift + 1
    idx = np.arange(frame_len)[None, :] + shift * np.arange(n_frames)[:, None]
    return FrameSequence(x[idx], frame_len, shift, float(sample_rate_hz), False)


def hamming(n: int) -> np.ndarray:
    """w(n) = 0.54 - 0.46 cos(2 pi n / (N - 1)), made exactly symmetric."""
    if n == 1:
        return np.ones(1)
    k = np.arange(n)
    w = 0.54 - 0.46 * np.cos(2.0 * np.pi * k / (n - 1))
    half = (n + 1) // 2
    w[n - half:] = w[:half][::-1]
    return w


def apply_hamming(fs: FrameSequence) -> FrameSequence:
    if fs.windowed:
        raise StateError("frames are already windowed")
    return FrameSequence(fs.frames * hamming(fs.frame_len), fs.frame_len, fs.shift,
                         fs.sample_rate_hz, True)


def overlap_add(fs: FrameSequence) -> np.ndarray:
    """Inverse of framing for rectangular frames (sums overlapping samples)."""
    total = (fs.n_frames - 1) * fs.shift + fs.frame_len
    out = np.zeros(total)
    for i, frame in enumerate(fs.frames):
        out[i * fs.shift: i * fs.shift + fs.frame_len] += frame
    return out
