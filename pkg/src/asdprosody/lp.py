"""Linear prediction: Levinson-Durbin, envelopes, formants, residual, LPCC.

Sign convention: A(z) = 1 - sum_k a_k z^-k, so a frame is predicted as
x[n] ~ sum_k a_k x[n-k] and the synthesis filter is gain / A(z).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .errors import DegenerateInputError
from .spectral import autocorrelation, pick_peaks, refine_peak

FORMANT_ORDER = 10
DOMINANT_ORDER = 5
LPCC_ORDER = 12
ENVELOPE_NFFT = 1024


@dataclass(frozen=True, eq=False)
class LpModel:
    order: int
    coefficients: np.ndarray  # a_1 .. a_p
    gain: float
    reflection: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ill_conditioned: bool = False

    def inverse_filter(self) -> np.ndarray:
        """Polynomial [1, -a_1, ..., -a_p] of A(z)."""
        return np.concatenate([[1.0], -np.asarray(self.coefficients)])


@dataclass
class FormantSet:
    frequencies: list  # ascending Hz, at most five
    frame_index: int = -1

    def get(self, i: int) -> Optional[float]:
        """1-based access; ``None`` when the formant is absent."""
        return self.frequencies[i - 1] if i <= len(self.frequencies) else None

    @property
    def f1(self):
        return self.get(1)

    @property
    def f2(self):
        return self.get(2)

    @property
    def f3(self):
        return self.get(3)

    @property
    def f4(self):
        return self.get(4)

    @property
    def f5(self):
        return self.get(5)


@dataclass
class DominantSet:
    frequencies: list  # ascending Hz, at most two

    @property
    def fd1(self):
        return self.frequencies[0] if len(self.frequencies) > 0 else None

    @property
    def fd2(self):
        return self.frequencies[1] if len(self.frequencies) > 1 else None


def levinson_durbin(autocorr, order: int) -> LpModel:
    """Solve the normal equations for the order-``order`` predictor.

    ``gain ** 2`` equals the final prediction-error energy.  A reflection
    coefficient with magnitude >= 1 marks the model ill-conditioned and stops
    the recursion at the previous order.
    """
    r = np.asarray(autocorr, dtype=np.float64)
    if r.size < order + 1:
        raise ValueError(f"need {order + 1} autocorrelation lags, got {r.size}")
    if not r[0] > 0:
        raise DegenerateInputError("zero-energy frame (r[0] <= 0)")
    a = np.zeros(order)
    k = np.zeros(order)
    err = r[0]
    ill = False
    for i in range(order):
        acc = r[i + 1] - np.dot(a[:i], r[i:0:-1])
        ki = acc / err
        if not np.isfinite(ki) or abs(ki) >= 1.0:
            ill = True
            break
        k[i] = ki
        prev = a[:i].copy()
        a[:i] = prev - ki * prev[::-1]
        a[i] = ki
        err *= 1.0 - ki * ki
    return LpModel(order, a, float(np.sqrt(max(err, 0.0))), k, ill)


def lp_analysis(frame, order: int) -> LpModel:
    x = np.asarray(frame, dtype=np.float64)
    return levinson_durbin(autocorrelation(x, order), order)


def lp_envelope(model: LpModel, n_points: int, sample_rate_hz: float) -> np.ndarray:
    """20 log10 |gain / A(e^jw)| at ``n_points`` frequencies uniform on [0, Nyquist]."""
    w = np.linspace(0.0, np.pi, n_points)
    k = np.arange(1, model.order + 1)
    A = 1.0 - np.exp(-1j * np.outer(w, k)) @ np.asarray(model.coefficients)
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(model.gain / np.abs(A))


def envelope_peaks(model: LpModel, sample_rate_hz: float, max_peaks: int,
                   n_fft: int = ENVELOPE_NFFT) -> list:
    """Peak frequencies of the LP envelope on an ``n_fft``-point grid, ascending."""
    n_points = n_fft // 2 + 1
    env = lp_envelope(model, n_points, sample_rate_hz)
    step = sample_rate_hz / n_fft
    nyquist = sample_rate_hz / 2.0
    out = []
    for idx, _ in pick_peaks(env, max_peaks):
        pos, _ = refine_peak(env, idx)
        f = pos * step
        if 0.0 < f < nyquist:
            out.append(f)
    return out


def extract_formants(frame, sample_rate_hz: float = 10000.0, order: int = FORMANT_ORDER,
                     frame_index: int = -1) -> FormantSet:
    """Up to five peaks of the order-10 LP envelope (empty for ill-conditioned frames)."""
    try:
        model = lp_analysis(frame, order)
    except DegenerateInputError:
        return FormantSet([], frame_index)
    if model.ill_conditioned:
        return FormantSet([], frame_index)
    return FormantSet(envelope_peaks(model, sample_rate_hz, 5), frame_index)


def extract_dominants(frame, sample_rate_hz: float = 10000.0, order: int = DOMINANT_ORDER) -> DominantSet:
    """Up to two peaks of the order-5 LP envelope."""
    try:
        model = lp_analysis(frame, order)
    except DegenerateInputError:
        return DominantSet([])
    if model.ill_conditioned:
        return DominantSet([])
    return DominantSet(envelope_peaks(model, sample_rate_hz, 2))


def lp_residual(signal, model: LpModel) -> np.ndarray:
    """e[n] = x[n] - sum_k a_k x[n-k], with zero initial conditions."""
    x = np.asarray(signal, dtype=np.float64)
    if model.order == 0:
        return x.copy()
    return lfilter(model.inverse_filter(), [1.0], x)


def lpcc(model: LpModel, n_coeffs: int = LPCC_ORDER, expected_order: Optional[int] = LPCC_ORDER) -> np.ndarray:
    """Cepstrum c_1 .. c_n of the all-pole model 1/A(z) by recursion.

    For n > p only the last p terms contribute (a_{n-k} = 0 beyond order p).
    """
    p = model.order
    if expected_order is not None and p != expected_order:
        raise ValueError(f"LPCC expects an order-{expected_order} model, got order {p}")
    a = np.concatenate([[0.0], np.asarray(model.coefficients, dtype=np.float64)])
    c = np.zeros(n_coeffs + 1)
    for n in range(1, n_coeffs + 1):
        acc = a[n] if n <= p else 0.0
        for k in range(max(1, n - p), n):
            acc += (k / n) * c[k] * a[n - k]
        c[n] = acc
    return c[1:]


def step_up(reflection) -> np.ndarray:
    """Predictor coefficients from reflection coefficients (same recursion as Levinson)."""
    a = np.zeros(0)
    for ki in reflection:
        a = np.concatenate([a - ki * a[::-1], [ki]])
    return a
