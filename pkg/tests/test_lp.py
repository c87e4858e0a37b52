import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.signal import lfilter

from asdprosody.errors import DegenerateInputError
from asdprosody.lp import (LpModel, envelope_peaks, extract_dominants, extract_formants,
                           levinson_durbin, lp_analysis, lp_envelope, lp_residual, lpcc, step_up)
from asdprosody.preprocess import hamming
from asdprosody.signal_io import resonator_coefficients
from asdprosody.spectral import autocorrelation

from conftest import vowel

FS = 10000.0


def _ar2(rng, n=20000):
    e = rng.standard_normal(n)
    return lfilter([1.0], [1.0, -1.5, 0.7], e), e


def _frame(clip, start_s=0.3, n=250, alpha=0.98):
    x = clip.samples
    i = int(start_s * clip.sample_rate_hz)
    seg = x[i - 1: i + n]
    seg = seg[1:] - alpha * seg[:-1]
    return seg * hamming(n)


def _resonated(freqs, rng, n=4000):
    x = rng.standard_normal(n)
    for f in freqs:
        b, a = resonator_coefficients(f, 80.0, FS)
        x = lfilter(b, a, x)
    return x


def test_ar2_recovery(rng):
    x, _ = _ar2(rng)
    m = lp_analysis(x, 2)
    assert np.allclose(m.coefficients, [1.5, -0.7], atol=0.05)


def test_white_noise_coefficients_small(rng):
    m = lp_analysis(rng.standard_normal(20000), 10)
    assert np.all(np.abs(m.coefficients) < 0.1)


def test_order_zero():
    m = levinson_durbin([4.0, 1.0], 0)
    assert m.coefficients.size == 0 and m.gain ** 2 == pytest.approx(4.0)
    assert np.allclose(lp_envelope(LpModel(0, np.zeros(0), 1.0), 17, FS), 0.0)
    x = np.arange(5.0)
    assert np.array_equal(lp_residual(x, m), x)


def test_levinson_errors():
    with pytest.raises(DegenerateInputError):
        levinson_durbin([0.0, 0.0, 0.0], 2)
    with pytest.raises(ValueError):
        levinson_durbin([1.0, 0.5], 3)
    # not positive definite: |k_1| >= 1
    assert levinson_durbin([1.0, 1.5, 0.2], 2).ill_conditioned


def test_gain_is_prediction_error_energy(rng):
    x = rng.standard_normal(500)
    r = autocorrelation(x, 8)
    m = levinson_durbin(r, 8)
    err = r[0] - np.dot(m.coefficients, r[1:])
    assert m.gain ** 2 == pytest.approx(err, rel=1e-10)


def test_envelope_dc_closed_form(rng):
    m = lp_analysis(rng.standard_normal(400), 6)
    env = lp_envelope(m, 33, FS)
    assert env[0] == pytest.approx(20 * np.log10(m.gain / (1 - m.coefficients.sum())))


def test_envelope_resonator_peak(rng):
    m = lp_analysis(_resonated([700.0], rng), 10)
    env = lp_envelope(m, 2049, FS)
    f = np.argmax(env) * (FS / 2) / 2048
    assert abs(f - 700) <= 20


def test_formants_of_vowel():
    fr = extract_formants(_frame(vowel(150.0, FS)), FS)
    assert abs(fr.f1 - 700) <= 50 and abs(fr.f2 - 1200) <= 100


def test_formants_of_sine():
    t = np.arange(250) / FS
    fr = extract_formants(np.sin(2 * np.pi * 1000 * t) * hamming(250), FS)
    assert abs(fr.f1 - 1000) <= 30


def test_white_noise_formants_in_range(rng):
    fr = extract_formants(rng.standard_normal(250) * hamming(250), FS)
    assert len(fr.frequencies) <= 5
    assert all(0 < f < FS / 2 for f in fr.frequencies)


def test_dominants(rng):
    x = _resonated([800.0, 2200.0], rng)[1000:1250] * hamming(250)
    d = extract_dominants(x, FS)
    assert abs(d.fd1 - 800) <= 100 and abs(d.fd2 - 2200) <= 200
    single = extract_dominants(_resonated([1500.0], rng)[1000:1250] * hamming(250), FS)
    assert 1 <= len(single.frequencies) <= 2
    assert len(extract_formants(x, FS).frequencies) >= len(d.frequencies) or len(d.frequencies) <= 2


def test_silent_frame_gives_empty_sets():
    assert extract_formants(np.zeros(250), FS).frequencies == []
    assert extract_dominants(np.zeros(250), FS).frequencies == []


def test_residual_of_true_model(rng):
    x, e = _ar2(rng)
    m = LpModel(2, np.array([1.5, -0.7]), 1.0)
    r = lp_residual(x, m)
    assert np.allclose(r, e, atol=1e-9)
    assert 0.8 <= r.var() / e.var() <= 1.2
    assert np.array_equal(lp_residual(np.zeros(10), m), np.zeros(10))


def test_lpcc_first_terms():
    a = np.linspace(0.3, -0.2, 12)
    c = lpcc(LpModel(12, a, 1.0))
    assert c[0] == a[0]
    assert c[1] == pytest.approx(a[1] + 0.5 * a[0] ** 2)
    with pytest.raises(ValueError):
        lpcc(LpModel(10, np.zeros(10), 1.0))


def _random_stable(rng, p=12, max_radius=0.98):
    """Real-coefficient model with p/2 conjugate pole pairs inside ``max_radius``."""
    r = rng.uniform(0.3, max_radius, p // 2)
    w = rng.uniform(0.05, np.pi - 0.05, p // 2)
    poles = np.concatenate([r * np.exp(1j * w), r * np.exp(-1j * w)])
    return -np.real(np.poly(poles))[1:]


def cepstrum_oracle(a, n_coeffs, grid=8192):
    """Cepstrum of 1/A(z) from the inverse DFT of the log magnitude response."""
    A = np.fft.rfft(np.concatenate([[1.0], -a]), grid)
    c = np.fft.irfft(-np.log(np.abs(A)), grid)
    # real cepstrum is half the complex cepstrum for a minimum-phase system
    return 2.0 * c[1: n_coeffs + 1]


def test_lpcc_matches_log_spectrum_oracle(rng):
    for _ in range(100):
        a = _random_stable(rng)
        c = lpcc(LpModel(12, a, 1.0), 16)
        assert np.max(np.abs(c - cepstrum_oracle(a, 16))) < 1e-4


def test_lpcc_near_unit_circle_dense_grid(rng):
    # poles this close to the unit circle alias on a short grid
    for _ in range(30):
        a = step_up(rng.uniform(-0.9, 0.9, 12))
        c = lpcc(LpModel(12, a, 1.0))
        assert np.max(np.abs(c - cepstrum_oracle(a, 12, 2 ** 20))) < 1e-4


@given(st.lists(st.floats(-0.95, 0.95), min_size=1, max_size=14))
def test_minimum_phase_from_levinson(ks):
    a = step_up(ks)
    # autocorrelation of the all-pole impulse response
    h = lfilter([1.0], np.concatenate([[1.0], -a]), np.r_[1.0, np.zeros(4095)])
    m = lp_analysis(h, len(ks))
    assert not m.ill_conditioned
    assert np.all(np.abs(m.reflection) < 1)
    poles = np.roots(m.inverse_filter())
    assert np.all(np.abs(poles) < 1)


@given(st.integers(0, 2 ** 32 - 1))
def test_peak_counts_and_ordering(seed):
    x = np.random.default_rng(seed).standard_normal(250) * hamming(250)
    f = extract_formants(x, FS).frequencies
    d = extract_dominants(x, FS).frequencies
    assert len(f) <= 5 and len(d) <= 2
    assert all(b > a for a, b in zip(f, f[1:]))
    assert all(b > a for a, b in zip(d, d[1:]))
    assert len(envelope_peaks(lp_analysis(x, 5), FS, 5)) <= 2
