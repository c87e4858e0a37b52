"""Shared spectral numerics: DFT, autocorrelation and peak picking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Spectrum:
    bins: np.ndarray  # complex, length n_fft
    sample_rate_hz: float

    @property
    def n_fft(self) -> int:
        return self.bins.size

    @property
    def freq_resolution_hz(self) -> float:
        return self.sample_rate_hz / self.bins.size

    def power(self) -> np.ndarray:
        """|X(k)|^2 for k = 0 .. n_fft/2."""
        half = self.bins[: self.n_fft // 2 + 1]
        return half.real ** 2 + half.imag ** 2

    def amplitude(self) -> np.ndarray:
        return np.abs(self.bins[: self.n_fft // 2 + 1])

    def frequencies(self) -> np.ndarray:
        return np.arange(self.n_fft // 2 + 1) * self.freq_resolution_hz


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def dft(frame, n_fft: int, sample_rate_hz: float = 1.0) -> Spectrum:
    """Zero-padded DFT ``X[k] = sum_n x[n] exp(-2j pi n k / n_fft)``."""
    x = np.asarray(frame, dtype=np.float64)
    if not is_power_of_two(n_fft):
        raise ValueError(f"n_fft must be a power of two, got {n_fft}")
    if n_fft < x.size:
        raise ValueError(f"n_fft={n_fft} shorter than frame ({x.size})")
    return Spectrum(np.fft.fft(x, n_fft), float(sample_rate_hz))


def idft(spectrum: Spectrum, length: int | None = None) -> np.ndarray:
    x = np.fft.ifft(spectrum.bins).real
    return x if length is None else x[:length]


def power_spectrum(frames: np.ndarray, n_fft: int) -> np.ndarray:
    """Row-wise one-sided power spectra of a frame matrix."""
    if not is_power_of_two(n_fft):
        raise ValueError(f"n_fft must be a power of two, got {n_fft}")
    X = np.fft.rfft(np.atleast_2d(frames), n_fft, axis=-1)
    return X.real ** 2 + X.imag ** 2


def autocorrelation(frame, max_lag: int) -> np.ndarray:
    """Biased autocorrelation r[l] = sum_n x[n] x[n+l] for l = 0 .. max_lag."""
    x = np.asarray(frame, dtype=np.float64)
    if max_lag >= x.size:
        raise ValueError(f"max_lag={max_lag} must be below frame length {x.size}")
    n = x.size
    if n > 256:
        nfft = next_power_of_two(2 * n)
        X = np.fft.rfft(x, nfft)
        r = np.fft.irfft(X.real ** 2 + X.imag ** 2, nfft)[: max_lag + 1]
        return r
    return np.array([np.dot(x[: n - lag], x[lag:]) for lag in range(max_lag + 1)])


def pick_peaks(values, max_peaks: int):
    """Strict interior local maxima in ascending index order.

    A flat-topped maximum is reported at the first index of the plateau.
    Only the ``max_peaks`` lowest-index peaks are returned.
    """
    v = np.asarray(values, dtype=np.float64)
    peaks = []
    i = 1
    n = v.size
    while i < n - 1 and len(peaks) < max_peaks:
        if v[i - 1] < v[i]:
            j = i
            while j + 1 < n and v[j + 1] == v[i]:
                j += 1
            if j + 1 < n and v[j + 1] < v[i]:
                peaks.append((i, float(v[i])))
            i = j + 1
        else:
            i += 1
    return peaks


def refine_peak(values, index: int):
    """Parabolic interpolation around ``index``; returns (fractional index, value)."""
    v = np.asarray(values, dtype=np.float64)
    if index <= 0 or index >= v.size - 1:
        return float(index), float(v[index])
    a, b, c = v[index - 1], v[index], v[index + 1]
    denom = a - 2.0 * b + c
    if denom >= 0:
        return float(index), float(b)
    delta = 0.5 * (a - c) / denom
    return index + delta, b - 0.25 * (a - c) * delta
