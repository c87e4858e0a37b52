import numpy as np
import pytest
from hypothesis import settings

from asdprosody.signal_io import AudioClip, SynthesisSpec, synthesize_voice

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

VOWEL = [(700.0, 80.0), (1200.0, 90.0), (2600.0, 120.0)]


def vowel(f0=150.0, fs=10000.0, **kw):
    kw.setdefault("formants_hz", VOWEL)
    kw.setdefault("glottal_tilt", 0.95)
    return synthesize_voice(SynthesisSpec(f0_hz=f0, **kw), fs)


def tone(freq, fs, duration_s, amp=0.5):
    t = np.arange(int(round(duration_s * fs))) / fs
    return AudioClip(amp * np.sin(2 * np.pi * freq * t), fs)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def two_gaussians(n=200, d=8, separation=4.0, seed=0):
    """Balanced two-class Gaussian set, unit variance, class means ``separation`` apart.

    The Bayes-optimal accuracy is Phi(separation / 2), about 0.977 at 4 sigma.
    """
    from asdprosody.features import FEATURE_NAMES, LabeledDataset

    rng = np.random.default_rng(seed)
    direction = np.ones(d) / np.sqrt(d)
    half = n // 2
    X = rng.standard_normal((n, d))
    X[:half] += 0.5 * separation * direction
    X[half:] -= 0.5 * separation * direction
    labels = ["ASD"] * half + ["TD"] * (n - half)
    return LabeledDataset(X, labels, [f"g{i:03d}" for i in range(n)], FEATURE_NAMES[:d])


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
