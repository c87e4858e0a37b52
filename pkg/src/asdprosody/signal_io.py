"""Audio clips: WAV input/output, resampling and ground-truth voice synthesis."""

from __future__ import annotations

import dataclasses
import math
import wave
from fractions import Fraction
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.io.wavfile
from scipy.signal import lfilter, resample_poly

from .errors import EmptyInputError, FormatError

RESAMPLE_TAPS = 64
RESAMPLE_KAISER_BETA = 8.0
RESAMPLE_CUTOFF = 0.45
RESAMPLE_MAX_FACTOR = 1000


@dataclass(frozen=True, eq=False)
class AudioClip:
    """A mono waveform with its sample rate.

    ``samples`` is stored as a read-only float64 array so clips can be
    shared freely between threads.
    """

    samples: np.ndarray
    sample_rate_hz: float
    source_id: str = ""

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64, copy=True).reshape(-1)
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        if not (self.sample_rate_hz > 0 and math.isfinite(self.sample_rate_hz)):
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if not np.all(np.isfinite(x)):
            raise ValueError("clip contains non-finite samples")

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def with_samples(self, samples) -> "AudioClip":
        return AudioClip(samples, self.sample_rate_hz, self.source_id)


def load_wav(path, source_id: Optional[str] = None) -> AudioClip:
    """Read a PCM (8/16/24/32-bit int) or float WAV file as a mono clip.

    Integer samples are scaled to [-1, 1) and channels are averaged.
    """
    path = Path(path)
    try:
        rate, data = scipy.io.wavfile.read(path)
    except FileNotFoundError:
        raise
    except (ValueError, EOFError, OSError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if data.size == 0:
        raise EmptyInputError(f"{path}: no audio data")
    if data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        # scipy left-justifies 24-bit samples inside int32
        x = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        x = data.astype(np.float64)
    else:
        raise FormatError(f"{path}: unsupported sample type {data.dtype}")
    if x.ndim == 2:
        x = x.mean(axis=1)
    return AudioClip(x, float(rate), source_id if source_id is not None else path.stem)


def save_wav(clip: AudioClip, path, bit_depth: int = 16) -> None:
    """Write ``clip`` as little-endian PCM (8/16/24/32-bit) or 32-bit float (``bit_depth=-32``)."""
    path = Path(path)
    x = np.asarray(clip.samples)
    rate = int(round(clip.sample_rate_hz))
    if bit_depth == -32:
        scipy.io.wavfile.write(path, rate, x.astype(np.float32))
        return
    if bit_depth not in (8, 16, 24, 32):
        raise ValueError(f"unsupported bit depth {bit_depth}")
    full = 2 ** (bit_depth - 1)
    q = np.clip(np.round(x * full), -full, full - 1).astype(np.int64)
    if bit_depth == 8:
        raw = (q + 128).astype(np.uint8).tobytes()
    elif bit_depth == 24:
        b = q.astype("<i4").view(np.uint8).reshape(-1, 4)
        raw = b[:, :3].tobytes()
    else:
        raw = q.astype(f"<i{bit_depth // 8}").tobytes()
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(bit_depth // 8)
        fh.setframerate(rate)
        fh.writeframes(raw)


def lowpass_kernel(cutoff_hz: float, sample_rate_hz: float,
                   n_taps: int = RESAMPLE_TAPS, beta: float = RESAMPLE_KAISER_BETA) -> np.ndarray:
    """Kaiser-windowed sinc low-pass with unit DC gain."""
    fc = cutoff_hz / sample_rate_hz
    n = np.arange(n_taps) - (n_taps - 1) / 2.0
    h = 2.0 * fc * np.sinc(2.0 * fc * n) * np.kaiser(n_taps, beta)
    return h / h.sum()


def resample_factors(source_hz: float, target_hz: float):
    """Rational up/down factors with target/source ~= up/down."""
    ratio = (Fraction(target_hz) / Fraction(source_hz)).limit_denominator(RESAMPLE_MAX_FACTOR)
    return ratio.numerator, ratio.denominator


def resample(clip: AudioClip, target_hz: float) -> AudioClip:
    """Band-limit at 0.45 * min(rates) and interpolate with a polyphase filter.

    The low-pass is designed on the up-sampled grid, so the interpolation
    between input samples is band-limited too.
    """
    if not (isinstance(target_hz, (int, float)) and math.isfinite(target_hz) and target_hz > 0):
        raise ValueError(f"target rate must be a positive finite number, got {target_hz!r}")
    source_hz = clip.sample_rate_hz
    if target_hz == source_hz:
        return AudioClip(clip.samples, source_hz, clip.source_id)
    x = clip.samples
    n_out = int(round(x.size * target_hz / source_hz))
    if n_out < 1:
        raise EmptyInputError("resampled clip would be empty")
    up, down = resample_factors(source_hz, target_hz)
    # RESAMPLE_TAPS input samples of support, odd length for an integer delay
    h = lowpass_kernel(RESAMPLE_CUTOFF * min(source_hz, target_hz), source_hz * up,
                       n_taps=RESAMPLE_TAPS * up + 1)
    y = resample_poly(x, up, down, window=h)
    out = np.zeros(n_out)
    out[: min(n_out, y.size)] = y[:n_out]
    return AudioClip(out, float(target_hz), clip.source_id)


@dataclass
class SynthesisSpec:
    """Ground-truth parameters of a synthetic sustained vowel.

    ``noise_db`` is the white-noise level relative to the voiced signal RMS;
    ``None`` means no noise.  Leading/trailing silences carry noise only.
    """

    f0_hz: float
    f0_jitter_pct: float = 0.0
    amp_shimmer_db: float = 0.0
    formants_hz: Sequence[tuple] = field(default_factory=list)
    duration_s: float = 1.0
    noise_db: Optional[float] = None
    seed: int = 0
    lead_silence_s: float = 0.0
    tail_silence_s: float = 0.0
    glottal_tilt: float = 0.0

    def validate(self, sample_rate_hz: float) -> None:
        nyquist = sample_rate_hz / 2.0
        if not (0 < self.f0_hz < nyquist):
            raise ValueError(f"f0_hz={self.f0_hz} outside (0, {nyquist})")
        if self.f0_jitter_pct < 0 or self.amp_shimmer_db < 0:
            raise ValueError("jitter and shimmer must be non-negative")
        if not self.duration_s > 0:
            raise ValueError("duration_s must be positive")
        if self.lead_silence_s < 0 or self.tail_silence_s < 0:
            raise ValueError("silence durations must be non-negative")
        if not 0.0 <= self.glottal_tilt < 1.0:
            raise ValueError("glottal_tilt must lie in [0, 1)")
        prev = 0.0
        for centre, bandwidth in self.formants_hz:
            if not (prev < centre < nyquist):
                raise ValueError(f"formant {centre} Hz not increasing or above Nyquist")
            if bandwidth <= 0:
                raise ValueError(f"formant bandwidth must be positive, got {bandwidth}")
            prev = centre

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["formants_hz"] = [list(map(float, f)) for f in self.formants_hz]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthesisSpec":
        d = dict(d)
        d["formants_hz"] = [tuple(f) for f in d.get("formants_hz", [])]
        return cls(**d)


def _fractional_impulse(buf: np.ndarray, t: float, amp: float, half_width: int = 16) -> None:
    centre = int(math.floor(t))
    frac = t - centre
    if frac == 0.0:
        if 0 <= centre < buf.size:
            buf[centre] += amp
        return
    n = np.arange(centre - half_width + 1, centre + half_width + 1)
    w = np.kaiser(2 * half_width, 6.0)
    k = np.sinc(n - t) * w
    ok = (n >= 0) & (n < buf.size)
    buf[n[ok]] += amp * k[ok]


def resonator_coefficients(centre_hz: float, bandwidth_hz: float, sample_rate_hz: float):
    """Second-order all-pole resonator with unit gain at DC."""
    r = math.exp(-math.pi * bandwidth_hz / sample_rate_hz)
    theta = 2.0 * math.pi * centre_hz / sample_rate_hz
    a = np.array([1.0, -2.0 * r * math.cos(theta), r * r])
    return np.array([a.sum()]), a


def synthesize_voice(spec: SynthesisSpec, sample_rate_hz: float) -> AudioClip:
    """Impulse-train excitation through a cascade of formant resonators.

    Periods are ``round(fs/f0) * (1 + u)`` with ``u ~ U(-j, j)``; pulse gains
    are ``10 ** (v / 20)`` with ``v ~ U(-s, s)`` dB.  Unperturbed pulses sit on
    exact sample indices; jittered ones are placed with a windowed-sinc
    fractional delay.  A non-zero ``glottal_tilt`` g shapes each pulse with
    the one-pole low-pass (1 - g) / (1 - g z^-1), i.e. a -6 dB/octave source
    slope.  The result is peak-normalised to 0.9.
    """
    spec.validate(sample_rate_hz)
    rng = np.random.default_rng(spec.seed)
    fs = float(sample_rate_hz)
    n_lead = int(round(spec.lead_silence_s * fs))
    n_voice = int(round(spec.duration_s * fs))
    n_tail = int(round(spec.tail_silence_s * fs))
    period = float(round(fs / spec.f0_hz))
    jit = spec.f0_jitter_pct / 100.0
    shim = spec.amp_shimmer_db

    excitation = np.zeros(n_voice)
    t = 0.0
    while t < n_voice:
        gain = 10.0 ** (rng.uniform(-shim, shim) / 20.0) if shim > 0 else 1.0
        _fractional_impulse(excitation, t, gain)
        step = period * (1.0 + rng.uniform(-jit, jit)) if jit > 0 else period
        t += step

    voiced = excitation
    if spec.glottal_tilt > 0:
        g = spec.glottal_tilt
        voiced = lfilter([1.0 - g], [1.0, -g], voiced)
    for centre, bandwidth in spec.formants_hz:
        b, a = resonator_coefficients(centre, bandwidth, fs)
        voiced = lfilter(b, a, voiced)

    signal = np.concatenate([np.zeros(n_lead), voiced, np.zeros(n_tail)])
    if spec.noise_db is not None:
        rms = math.sqrt(float(np.mean(voiced ** 2)))
        signal = signal + rng.standard_normal(signal.size) * rms * 10.0 ** (spec.noise_db / 20.0)
    peak = float(np.max(np.abs(signal)))
    if peak > 0:
        signal = signal * (0.9 / peak)
    return AudioClip(signal, fs, f"synth-f0{spec.f0_hz:g}-s{spec.seed}")
