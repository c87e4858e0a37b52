"""Mel filter bank, Mel spectrum and cepstral coefficients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .spectral import is_power_of_two, power_spectrum

N_FILTERS = 40
N_COEFFS = 12
MFCC_NFFT = 512
LOG_FLOOR = 1e-10


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True, eq=False)
class MelFilterBank:
    """Triangular filters over the bins 0 .. n_fft/2.

    ``boundaries`` holds the M + 2 bin indices; filter m rises from
    ``boundaries[m]`` to its centre ``boundaries[m + 1]`` and falls back to
    zero at ``boundaries[m + 2]``.
    """

    n_filters: int
    n_fft: int
    sample_rate_hz: float
    boundaries: np.ndarray
    weights: np.ndarray  # (n_filters, n_fft // 2 + 1)

    @property
    def center_bins(self) -> np.ndarray:
        return self.boundaries[1:-1]


def triangle_weight(k: int, lo: int, centre: int, hi: int) -> float:
    """One filter evaluated at integer bin ``k``, branch by branch."""
    if k < lo:
        return 0.0
    if lo <= k < centre:
        return (k - lo) / (centre - lo)
    if k == centre:
        return 1.0
    if centre < k <= hi:
        return (hi - k) / (hi - centre)
    return 0.0


def build_filterbank(sample_rate_hz: float = 10000.0, n_fft: int = MFCC_NFFT,
                     n_filters: int = N_FILTERS) -> MelFilterBank:
    """Filters with edges uniformly spaced on the Mel scale from 0 Hz to Nyquist."""
    if not 4 <= n_filters <= 160:
        raise ValueError(f"n_filters must lie in [4, 160], got {n_filters}")
    if not is_power_of_two(n_fft):
        raise ValueError(f"n_fft must be a power of two, got {n_fft}")
    nyquist = sample_rate_hz / 2.0
    mels = np.linspace(0.0, float(hz_to_mel(nyquist)), n_filters + 2)
    bins = np.round(mel_to_hz(mels) * n_fft / sample_rate_hz).astype(int)
    if np.any(np.diff(bins) < 1):
        raise ValueError(f"n_fft={n_fft} too small to resolve {n_filters} Mel filters")
    n_bins = n_fft // 2 + 1
    k = np.arange(n_bins)
    weights = np.zeros((n_filters, n_bins))
    for m in range(n_filters):
        lo, centre, hi = bins[m], bins[m + 1], bins[m + 2]
        rise = (k >= lo) & (k < centre)
        fall = (k > centre) & (k <= hi)
        weights[m, rise] = (k[rise] - lo) / (centre - lo)
        weights[m, centre] = 1.0
        weights[m, fall] = (hi - k[fall]) / (hi - centre)
    weights.setflags(write=False)
    bins.setflags(write=False)
    return MelFilterBank(n_filters, n_fft, float(sample_rate_hz), bins, weights)


def mel_spectrum(power_bins, bank: MelFilterBank) -> np.ndarray:
    """s[m] = sum_k |X(k)|^2 H_m(k)."""
    p = np.asarray(power_bins, dtype=np.float64)
    if p.shape[-1] != bank.weights.shape[1]:
        raise ValueError(f"expected {bank.weights.shape[1]} power bins, got {p.shape[-1]}")
    if np.any(p < 0):
        raise ValueError("power spectrum must be non-negative")
    return p @ bank.weights.T


def cepstral_basis(n_filters: int, n_coeffs: int, index_origin: int = 1) -> np.ndarray:
    """cos(pi n (m - 0.5) / M) for m = origin .. origin + M - 1.

    With origin 1 (default) the rows for n >= 1 are orthogonal to constants,
    so a gain change moves only c(0).  Origin 0 keeps the half-sample shift
    of the other convention and is available for comparison.
    """
    if index_origin not in (0, 1):
        raise ValueError("index_origin must be 0 or 1")
    n = np.arange(n_coeffs)[:, None]
    m = np.arange(index_origin, index_origin + n_filters)[None, :]
    return np.cos(np.pi * n * (m - 0.5) / n_filters)


def mfcc_from_mel(mel, n_coeffs: int = N_COEFFS, index_origin: int = 1) -> np.ndarray:
    """Cosine projection of log10 Mel energies (floored at 1e-10)."""
    s = np.asarray(mel, dtype=np.float64)
    logs = np.log10(np.maximum(s, LOG_FLOOR))
    return logs @ cepstral_basis(s.shape[-1], n_coeffs, index_origin).T


def mfcc(frame, bank: MelFilterBank, n_coeffs: int = N_COEFFS) -> Optional[np.ndarray]:
    """c(0) .. c(n_coeffs - 1) of one windowed frame; ``None`` for an all-zero frame."""
    x = np.asarray(frame, dtype=np.float64)
    if not np.any(x):
        return None
    return mfcc_from_mel(mel_spectrum(power_spectrum(x, bank.n_fft)[0], bank), n_coeffs)


def mfcc_frames(frames: np.ndarray, bank: MelFilterBank, n_coeffs: int = N_COEFFS):
    """Coefficients for every row plus a mask of silent (all-zero) rows."""
    frames = np.atleast_2d(frames)
    silent = ~np.any(frames != 0, axis=1)
    coeffs = mfcc_from_mel(mel_spectrum(power_spectrum(frames, bank.n_fft), bank), n_coeffs)
    return coeffs, silent
