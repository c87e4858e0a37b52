import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asdprosody.errors import InsufficientVoicingError, TooShortError
from asdprosody.preprocess import z_normalize
from asdprosody.signal_io import AudioClip
from asdprosody.source import (PitchFrame, PitchTrack, SrhConfig, aggregate_source, glottal_cycles,
                               jitter_abs, pick_f0_index, shimmer_db, srh_curve, srh_pitch)

from conftest import vowel

FS = 10000.0


def _track(f0s, amps=None):
    amps = amps if amps is not None else [1.0] * len(f0s)
    return PitchTrack([PitchFrame(f, 1.0, a, f is not None) for f, a in zip(f0s, amps)])


def _pitch(clip, cfg=SrhConfig()):
    return srh_pitch(z_normalize(clip), cfg)


def _interior(track):
    return track.frames[1:-1]


def test_pulse_train_150():
    tr = _pitch(vowel(150.0, FS))
    f0 = [f.f0_hz for f in tr.frames if f.voiced]
    assert abs(np.mean(f0) - 150) <= 5
    assert all(f.voiced for f in _interior(tr))


def test_octave_errors_suppressed():
    tr = _pitch(vowel(100.0, FS))
    f0 = np.array([f.f0_hz for f in tr.frames if f.voiced])
    assert np.mean(np.abs(f0 - 100) < 5) >= 0.9


def test_white_noise_mostly_unvoiced(rng):
    tr = _pitch(AudioClip(rng.standard_normal(int(FS)), FS))
    assert np.mean(tr.voiced_mask) < 0.2


def test_track_invariants():
    tr = _pitch(vowel(220.0, FS, noise_db=-20.0, f0_jitter_pct=2.0, seed=3))
    for f in tr.frames:
        if f.voiced:
            assert 70 <= f.f0_hz <= 400
        else:
            assert f.f0_hz is None
        assert f.amplitude >= 0


def test_too_short():
    with pytest.raises(TooShortError):
        srh_pitch(AudioClip(np.ones(999), FS))


def test_config_validation():
    with pytest.raises(ValueError):
        SrhConfig(srh_variant="product")
    with pytest.raises(ValueError):
        SrhConfig(f0_min_hz=400, f0_max_hz=70)


def test_literal_product_variant_runs():
    tr = _pitch(vowel(150.0, FS), SrhConfig(srh_variant="paper-literal", voicing_threshold=0.0))
    assert len(tr) > 0


def test_tie_break_prefers_lower_frequency():
    curve = np.array([0.0, 1.0, 0.0, 0.0, 1.0, 0.0])
    assert pick_f0_index(curve) == 1
    curve = np.array([0.0, 0.97, 0.0, 0.0, 1.0, 0.0])
    assert pick_f0_index(curve, 0.05) == 1
    assert pick_f0_index(curve, 0.0) == 4


@pytest.mark.parametrize("f0", [80, 120, 180, 250, 350])
def test_srh_of_flat_harmonic_spectrum(f0):
    # residual of a periodic pulse train: flat line spectrum at multiples of f0
    res = 0.5
    freqs = np.arange(0, 5000 + res, res)
    E = np.zeros_like(freqs)
    for k in range(1, int(5000 / f0) + 1):
        E[np.abs(freqs - k * f0) < 3] = 1.0
    cand = np.arange(70, 400.5, 0.5)
    curve = srh_curve(E, res, cand)
    assert abs(cand[pick_f0_index(curve, 0.05)] - f0) <= 2


def test_jitter_examples():
    assert jitter_abs(_track([150.0] * 10)) == 0.0
    tr = _track([100.0, 101.0] * 5)
    assert jitter_abs(tr) == pytest.approx(abs(1 / 100 - 1 / 101))
    assert jitter_abs(tr) == pytest.approx(9.901e-5, rel=1e-3)


def test_jitter_counts_only_consecutive_voiced():
    tr = _track([100.0, None, 200.0, 200.0])
    assert jitter_abs(tr) == 0.0
    with pytest.raises(InsufficientVoicingError):
        jitter_abs(_track([100.0, None, 200.0]))


def test_shimmer_examples():
    assert shimmer_db(_track([150.0] * 6, [0.3] * 6)) == 0.0
    tr = _track([150.0] * 6, [1.0, 2.0] * 3)
    assert shimmer_db(tr) == pytest.approx(20 * math.log10(2))
    # zero amplitude pairs are excluded
    assert shimmer_db(_track([150.0] * 3, [0.0, 1.0, 2.0])) == pytest.approx(20 * math.log10(2))
    with pytest.raises(InsufficientVoicingError):
        shimmer_db(_track([150.0] * 2, [0.0, 1.0]))


def test_aggregate_examples():
    s = aggregate_source(_track([None, 200.0, None]))
    assert s.mean_f0_hz == 200 and s.jitter_abs_s is None and s.shimmer_db is None
    s = aggregate_source(_track([150.0] * 8))
    assert (s.mean_f0_hz, s.jitter_abs_s, s.shimmer_db, s.voiced_fraction) == (150, 0, 0, 1.0)
    s = aggregate_source(_track([150.0, None] * 5))
    assert s.voiced_fraction == 0.5
    with pytest.raises(InsufficientVoicingError):
        aggregate_source(_track([None] * 4))


def _cycle_stats(clip):
    tr = _pitch(clip)
    return aggregate_source(tr, glottal_cycles(tr))


def expected_jitter_s(f0, jitter_pct, fs, n=200000, seed=0):
    """Monte-Carlo E|T_i - T_{i-1}| for the synthesizer's uniform period perturbation."""
    u = np.random.default_rng(seed).uniform(-jitter_pct / 100, jitter_pct / 100, n)
    period = round(fs / f0) * (1 + u) / fs
    return float(np.mean(np.abs(np.diff(period))))


def test_jitter_recovered_from_synthesis():
    s = _cycle_stats(vowel(150.0, FS, f0_jitter_pct=2.0, seed=7))
    ref = expected_jitter_s(150.0, 2.0, FS)
    assert 0.5 * ref <= s.jitter_abs_s <= 2.0 * ref


def test_shimmer_recovered_from_synthesis():
    s = _cycle_stats(vowel(150.0, FS, amp_shimmer_db=1.0, seed=7))
    assert 0.5 <= s.shimmer_db <= 2.0


def test_zero_perturbation_identities():
    s = _cycle_stats(vowel(150.0, FS))
    assert s.jitter_abs_s < 1e-4 and s.shimmer_db < 0.1


def test_cycles_need_residual():
    with pytest.raises(ValueError):
        glottal_cycles(_track([150.0] * 4))


@settings(max_examples=5)
@given(st.sampled_from([120.0, 180.0, 240.0]), st.integers(0, 100))
def test_scale_invariance(f0, seed):
    clip = vowel(f0, FS, f0_jitter_pct=1.0, amp_shimmer_db=0.5, seed=seed)
    tr_a = srh_pitch(clip)
    tr_b = srh_pitch(clip.with_samples(0.3 * clip.samples))
    a = aggregate_source(tr_a, glottal_cycles(tr_a))
    b = aggregate_source(tr_b, glottal_cycles(tr_b))
    assert abs(a.jitter_abs_s - b.jitter_abs_s) < 1e-6
    assert abs(a.shimmer_db - b.shimmer_db) < 1e-6
