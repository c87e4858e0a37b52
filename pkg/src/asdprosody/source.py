"""Excitation-source features: SRH pitch tracking, glottal cycles, jitter and shimmer."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateInputError, InsufficientVoicingError, TooShortError
from .lp import lp_analysis
from .preprocess import frame_samples, hamming
from .spectral import dft, next_power_of_two
from .signal_io import AudioClip

F0_MIN_HZ = 70.0
F0_MAX_HZ = 400.0
PITCH_FRAME_S = 0.100
PITCH_SHIFT_S = 0.010
SRH_LP_ORDER = 12
MAX_GRID_HZ = 2.5
# band over which the voicing threshold was calibrated (16 kHz audio)
REFERENCE_NYQUIST_HZ = 8000.0


@dataclass(frozen=True)
class SrhConfig:
    f0_min_hz: float = F0_MIN_HZ
    f0_max_hz: float = F0_MAX_HZ
    n_harm: int = 5
    frame_s: float = PITCH_FRAME_S
    shift_s: float = PITCH_SHIFT_S
    lp_order: int = SRH_LP_ORDER
    f0_step_hz: float = 0.5
    voicing_threshold: float = 0.07
    tie_tolerance: float = 0.05
    srh_variant: str = "subtractive"  # or "paper-literal"

    def __post_init__(self):
        if self.srh_variant not in ("subtractive", "paper-literal"):
            raise ValueError(f"unknown srh_variant {self.srh_variant!r}")
        if not 0 < self.f0_min_hz < self.f0_max_hz:
            raise ValueError("need 0 < f0_min_hz < f0_max_hz")
        if self.n_harm < 1:
            raise ValueError("n_harm must be >= 1")


@dataclass(frozen=True)
class PitchFrame:
    f0_hz: Optional[float]
    srh_peak: float
    amplitude: float
    voiced: bool
    time_s: float = 0.0


@dataclass
class PitchTrack:
    """Per-frame pitch records.

    The same container holds a glottal-cycle track, in which every record
    is one detected cycle instead of one analysis frame.
    """

    frames: list
    f0_min_hz: float = F0_MIN_HZ
    f0_max_hz: float = F0_MAX_HZ
    residual: Optional[np.ndarray] = field(default=None, repr=False)
    sample_rate_hz: float = 0.0
    signal: Optional[np.ndarray] = field(default=None, repr=False)
    models: Optional[list] = field(default=None, repr=False)  # inverse filters per frame
    shift: int = 0

    def __len__(self):
        return len(self.frames)

    @property
    def voiced_mask(self) -> np.ndarray:
        return np.array([f.voiced for f in self.frames], dtype=bool)

    def voiced_runs(self):
        """Lists of indices of maximal runs of consecutive voiced records."""
        runs, cur = [], []
        for i, f in enumerate(self.frames):
            if f.voiced:
                cur.append(i)
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        return runs


@dataclass(frozen=True)
class SourceStats:
    mean_f0_hz: float
    jitter_abs_s: Optional[float]
    shimmer_db: Optional[float]
    voiced_fraction: float


def _interp(E: np.ndarray, freqs: np.ndarray, resolution: float) -> np.ndarray:
    pos = freqs / resolution
    return np.interp(pos, np.arange(E.size), E, right=0.0)


def srh_curve(E: np.ndarray, resolution_hz: float, candidates: np.ndarray,
              n_harm: int = 5, variant: str = "subtractive") -> np.ndarray:
    """Summation of residual harmonics over candidate fundamentals.

    ``subtractive``: E(f) + sum_{k=2..n} [E(kf) - E((k - 1/2) f)]
    ``paper-literal``: E(f) + sum_{k=2..n} E(kf) * E((k - 1/2) f)
    """
    total = _interp(E, candidates, resolution_hz)
    for k in range(2, n_harm + 1):
        harm = _interp(E, k * candidates, resolution_hz)
        inter = _interp(E, (k - 0.5) * candidates, resolution_hz)
        total = total + (harm - inter if variant == "subtractive" else harm * inter)
    return total


def pick_f0_index(curve: np.ndarray, tie_tolerance: float = 0.0) -> int:
    """Index of the lowest-frequency maximum scoring within tolerance of the best."""
    best = int(np.argmax(curve))
    top = curve[best]
    if tie_tolerance <= 0 or top <= 0:
        return best
    bar = top - tie_tolerance * abs(top)
    for idx in range(best):
        left = curve[idx - 1] if idx > 0 else -np.inf
        if curve[idx] >= bar and curve[idx] > left and curve[idx] >= curve[idx + 1]:
            return idx
    return best


def srh_pitch(clip: AudioClip, cfg: SrhConfig = SrhConfig()) -> PitchTrack:
    """Frame-wise F0 by summation of residual harmonics.

    Each pitch frame is inverse-filtered with its own order-12 LP model; the
    Blackman-windowed residual's amplitude spectrum (grid <= 2.5 Hz) is
    normalised to unit energy density (sum E^2 * df = 1) so the voicing
    threshold does not depend on the zero-padding.  Local maxima of the SRH
    curve within ``tie_tolerance`` (relative) of the global maximum count as
    ties and the lowest frequency wins.  ``amplitude`` is the un-normalised
    residual amplitude at the chosen F0.
    """
    fs = clip.sample_rate_hz
    n = int(round(cfg.frame_s * fs))
    shift = int(round(cfg.shift_s * fs))
    x = clip.samples
    if x.size < n:
        raise TooShortError(f"clip ({x.size} samples) shorter than one pitch frame ({n})")
    frames = frame_samples(x, n, shift, fs).frames
    n_fft = next_power_of_two(max(n, int(math.ceil(fs / MAX_GRID_HZ))))
    resolution = fs / n_fft
    candidates = np.arange(cfg.f0_min_hz, cfg.f0_max_hz + 1e-9, cfg.f0_step_hz)
    lp_window = hamming(n)
    res_window = np.blackman(n)
    residual = np.zeros(x.size)
    records = []
    models = []
    for i, frame in enumerate(frames):
        t = (i * shift + n / 2.0) / fs
        inverse = _frame_model(frame, lp_window, cfg.lp_order)
        models.append(inverse)
        if inverse is None:
            records.append(PitchFrame(None, 0.0, 0.0, False, t))
            continue
        # zero initial state: the first samples carry a start-up transient
        e = np.convolve(frame, inverse)[: frame.size]
        centre = i * shift + (n - shift) // 2
        residual[centre: centre + shift] = e[(n - shift) // 2: (n - shift) // 2 + shift]
        E = dft(e * res_window, n_fft).amplitude()
        norm = float(np.sqrt(np.sum(E ** 2) * resolution * REFERENCE_NYQUIST_HZ / (fs / 2.0)))
        if norm == 0.0:
            records.append(PitchFrame(None, 0.0, 0.0, False, t))
            continue
        curve = srh_curve(E / norm, resolution, candidates, cfg.n_harm, cfg.srh_variant)
        best = pick_f0_index(curve, cfg.tie_tolerance)
        peak = float(curve[best])
        f0 = float(candidates[best])
        amp = float(_interp(E, np.array([f0]), resolution)[0])
        voiced = peak > cfg.voicing_threshold
        records.append(PitchFrame(f0 if voiced else None, peak, amp, voiced, t))
    return PitchTrack(records, cfg.f0_min_hz, cfg.f0_max_hz, residual, fs, x, models, shift)


def _frame_model(frame: np.ndarray, lp_window: np.ndarray, order: int) -> Optional[np.ndarray]:
    try:
        model = lp_analysis(frame * lp_window, order)
    except DegenerateInputError:
        return None
    if model.ill_conditioned:
        return None
    return model.inverse_filter()


def glottal_cycles(track: PitchTrack, search: float = 0.25) -> PitchTrack:
    """Cycle-level track from residual peaks inside voiced stretches.

    Within every run of voiced pitch frames the strongest residual peak
    anchors a chain of glottal epochs, each searched for within
    ``(1 +/- search)`` local periods of its neighbour.  Each resulting record
    is one epoch: ``f0_hz`` is the inverse of the following period and
    ``amplitude`` is a pulse amplitude (root residual energy between the
    midpoints to the neighbouring epochs).  Consecutive amplitudes are
    compared under one LP model, that of the pitch frame nearest the pair,
    and chained, so only their ratios are meaningful.  Runs are separated by
    unvoiced records.
    """
    if track.residual is None or track.signal is None or track.sample_rate_hz <= 0:
        raise ValueError("track carries no residual; build it with srh_pitch")
    e = track.residual
    fs = track.sample_rate_hz
    half_shift = track.shift / fs / 2.0
    records = []
    for run in track.voiced_runs():
        t0 = track.frames[run[0]].time_s - half_shift
        t1 = track.frames[run[-1]].time_s + half_shift
        lo, hi = max(0, int(math.floor(t0 * fs))), min(e.size, int(math.ceil(t1 * fs)))
        if hi - lo < 3:
            continue
        times = np.array([track.frames[i].time_s for i in run])
        f0s = np.array([track.frames[i].f0_hz for i in run])

        def nearest(sample):
            return int(np.argmin(np.abs(times - sample / fs)))

        seg = e[lo:hi]
        polarity = 1.0 if seg.max() >= -seg.min() else -1.0
        y = polarity * e
        anchor = lo + int(np.argmax(y[lo:hi]))
        epochs = [anchor]
        for direction in (1, -1):
            cur = anchor
            while True:
                p = fs / f0s[nearest(cur)]
                a = int(round(cur + direction * (1 - search) * p))
                b = int(round(cur + direction * (1 + search) * p))
                a, b = min(a, b), max(a, b)
                if a < lo or b >= hi:
                    break
                nxt = a + int(np.argmax(y[a: b + 1]))
                if direction > 0:
                    epochs.append(nxt)
                else:
                    epochs.insert(0, nxt)
                cur = nxt
        if len(epochs) < 4:
            continue
        pos = np.array([_refine(y, k) for k in epochs])
        amp = 1.0
        for j in range(1, len(pos) - 1):
            if j > 1:
                model = track.models[run[nearest(0.5 * (pos[j - 1] + pos[j]))]]
                amp *= _pulse_ratio(track.signal, model, pos[j - 2: j + 2])
            period = (pos[j + 1] - pos[j]) / fs
            f0 = 1.0 / period
            ok = track.f0_min_hz <= f0 <= track.f0_max_hz and amp > 0
            records.append(PitchFrame(f0 if ok else None, 0.0, amp, ok, pos[j] / fs))
        records.append(PitchFrame(None, 0.0, 0.0, False, pos[-1] / fs))
    return PitchTrack(records, track.f0_min_hz, track.f0_max_hz, sample_rate_hz=fs)


def _pulse_ratio(x: np.ndarray, inverse_filter: np.ndarray, epochs: np.ndarray) -> float:
    """Amplitude ratio of the pulses at epochs[2] and epochs[1] under one model.

    ``epochs`` holds four consecutive epoch positions; each pulse spans the
    midpoints to its neighbours.
    """
    order = inverse_filter.size - 1
    start = max(0, int(math.floor(0.5 * (epochs[0] + epochs[1]))) - 1)
    stop = min(x.size, int(math.ceil(0.5 * (epochs[2] + epochs[3]))) + 2)
    pre = max(0, start - order)
    e = np.convolve(x[pre:stop], inverse_filter)[: stop - pre]
    offset = pre
    mids = 0.5 * (epochs[:-1] + epochs[1:]) - offset
    first = _segment_energy(e, mids[0], mids[1])
    second = _segment_energy(e, mids[1], mids[2])
    if first <= 0:
        return 0.0
    return math.sqrt(second / first)


def _refine(y: np.ndarray, k: int) -> float:
    if 0 < k < y.size - 1:
        a, b, c = y[k - 1], y[k], y[k + 1]
        denom = a - 2 * b + c
        if denom < 0:
            return k + 0.5 * (a - c) / denom
    return float(k)


def _segment_energy(e: np.ndarray, left: float, right: float) -> float:
    """Energy of e over [left, right) with fractional edge weights."""
    i0, i1 = int(math.ceil(left)), int(math.floor(right))
    total = float(np.sum(e[i0:i1] ** 2))
    if i0 > 0:
        total += (i0 - left) * e[i0 - 1] ** 2
    if i1 < e.size:
        total += (right - i1) * e[i1] ** 2
    return total


def _consecutive_pairs(track: PitchTrack):
    for run in track.voiced_runs():
        for a, b in zip(run[:-1], run[1:]):
            yield track.frames[a], track.frames[b]


def jitter_abs(track: PitchTrack) -> float:
    """Mean |T_i - T_{i-1}| (seconds) over consecutive voiced records."""
    diffs = [abs(1.0 / b.f0_hz - 1.0 / a.f0_hz) for a, b in _consecutive_pairs(track)]
    if not diffs:
        raise InsufficientVoicingError("jitter needs at least two consecutive voiced frames")
    return float(np.mean(diffs))


def shimmer_db(track: PitchTrack) -> float:
    """Mean |20 log10(A_{i+1} / A_i)| over consecutive voiced records.

    Pairs involving a zero amplitude are skipped.
    """
    diffs = [abs(20.0 * math.log10(b.amplitude / a.amplitude))
             for a, b in _consecutive_pairs(track) if a.amplitude > 0 and b.amplitude > 0]
    if not diffs:
        raise InsufficientVoicingError("shimmer needs at least one valid consecutive voiced pair")
    return float(np.mean(diffs))


def aggregate_source(track: PitchTrack, cycles: Optional[PitchTrack] = None) -> SourceStats:
    """Mean F0 over voiced frames plus jitter and shimmer.

    Jitter and shimmer come from ``cycles`` when given, otherwise from the
    frame track itself; an insufficient-voicing failure maps to ``None``.
    """
    voiced = [f.f0_hz for f in track.frames if f.voiced]
    if not voiced:
        raise InsufficientVoicingError("no voiced frames")
    source = cycles if cycles is not None else track
    try:
        jit = jitter_abs(source)
    except InsufficientVoicingError:
        jit = None
    try:
        shim = shimmer_db(source)
    except InsufficientVoicingError:
        shim = None
    return SourceStats(float(np.mean(voiced)), jit, shim, len(voiced) / len(track.frames))
