import numpy as np
import pytest

from asdprosody.errors import DegenerateInputError, InsufficientVoicingError, ParseError, SchemaError
from asdprosody.features import (CLASS_LABELS, FEATURE_NAMES, N_FEATURES, FeatureVector,
                                 LabeledDataset, dataset_from_vectors, extract_features,
                                 frame_energy, frame_zcr, read_csv, subset_names, write_csv)
from asdprosody.preprocess import PIPELINE_ORDER, frame_samples
from asdprosody.signal_io import AudioClip

from conftest import vowel


def _frames(x, n=250, shift=100):
    return frame_samples(np.asarray(x, dtype=float), n, shift, 10000.0)


def test_feature_names():
    assert N_FEATURES == 36 and len(set(FEATURE_NAMES)) == 36
    assert FEATURE_NAMES[:3] == ("f0", "zcr", "energy")
    assert FEATURE_NAMES[-2:] == ("shimmer_db", "jitter_s")


def test_energy_examples():
    assert np.allclose(frame_energy(_frames(np.ones(1000))), 1.0)
    x = np.full(1000, 0.1)
    x[400:650] = 1.0
    e = frame_energy(_frames(x, 250, 250))
    assert np.count_nonzero(e == 1.0) == 1 and e.max() == 1.0
    y = np.random.default_rng(0).standard_normal(1000)
    assert np.allclose(frame_energy(_frames(y)), frame_energy(_frames(2 * y)), atol=1e-9)
    with pytest.raises(DegenerateInputError):
        frame_energy(_frames(np.zeros(1000)))


def test_zcr_examples():
    assert np.allclose(frame_zcr(_frames((-1.0) ** np.arange(500))), 1.0)
    assert np.allclose(frame_zcr(_frames(np.ones(500))), 0.0)
    # zero counts as positive
    assert np.allclose(frame_zcr(_frames(np.zeros(500))), 0.0)
    t = np.arange(2500) / 10000.0
    z = frame_zcr(_frames(np.sin(2 * np.pi * 100 * t + 0.3)))
    assert np.all(np.abs(z - 0.02) <= 0.005)


def _vowel_clip():
    return vowel(150.0, 16000.0, formants_hz=[(700.0, 80.0), (1200.0, 90.0)],
                 noise_db=-40.0, lead_silence_s=0.15, tail_silence_s=0.15, seed=2)


def test_vowel_features():
    res = extract_features(_vowel_clip())
    fv = res.features
    assert len(fv.values) == 36 and np.all(np.isfinite(fv.values))
    assert abs(fv["f0"] - 150) <= 5
    assert abs(fv["f1"] - 700) <= 50
    assert 0 <= fv["zcr"] <= 1 and 0 < fv["energy"] <= 1
    assert tuple(res.stages) == PIPELINE_ORDER
    for family in ("all", "non_silent", "voiced", "mfcc", "lpcc", "f1", "fd1"):
        assert res.frame_counts[family] > 0


def test_extraction_deterministic():
    a = extract_features(_vowel_clip()).features.values
    b = extract_features(_vowel_clip()).features.values
    assert np.array_equal(a, b)


def test_silence_is_degenerate():
    with pytest.raises(DegenerateInputError) as exc:
        extract_features(AudioClip(np.zeros(16000), 16000.0, "quiet"))
    assert exc.value.recording_id == "quiet"


def test_unvoiced_noise_fails_with_id(rng):
    clip = AudioClip(rng.standard_normal(16000), 16000.0, "hiss")
    with pytest.raises(InsufficientVoicingError) as exc:
        extract_features(clip)
    assert "hiss" in str(exc.value)


def test_feature_vector_access():
    fv = FeatureVector(np.arange(36.0))
    assert fv["energy"] == 2.0 and list(fv.as_dict())[0] == "f0"
    with pytest.raises(ValueError):
        FeatureVector(np.arange(35.0))


def _dataset(n_asd=46, n_td=38, seed=0):
    rng = np.random.default_rng(seed)
    n = n_asd + n_td
    X = rng.standard_normal((n, 36)) * np.logspace(-5, 3, 36)
    labels = ["ASD"] * n_asd + ["TD"] * n_td
    return LabeledDataset(X, labels, [f"r{i:03d}" for i in range(n)])


def test_csv_round_trip(tmp_path):
    ds = _dataset()
    p = tmp_path / "f.csv"
    write_csv(ds, p)
    back = read_csv(p)
    assert len(back) == 84 and back.class_counts() == {"ASD": 46, "TD": 38}
    assert np.allclose(back.X, ds.X, rtol=1e-9, atol=0)
    assert back.ids == ds.ids and back.feature_names == FEATURE_NAMES


def test_csv_column_order_is_canonicalised(tmp_path):
    ds = _dataset(3, 3)
    p = tmp_path / "f.csv"
    write_csv(ds, p)
    rows = [line.split(",") for line in p.read_text().splitlines()]
    perm = [37, 36] + list(range(35, -1, -1))
    p.write_text("\n".join(",".join(r[i] for i in perm) for r in rows) + "\n")
    assert np.allclose(read_csv(p).X, ds.X, rtol=1e-11)


def _rewrite(p, fn):
    lines = p.read_text().splitlines()
    p.write_text("\n".join(fn(lines)) + "\n")


def test_csv_schema_errors(tmp_path):
    p = tmp_path / "f.csv"
    write_csv(_dataset(2, 2), p)
    original = p.read_text()
    _rewrite(p, lambda ls: [",".join(l.split(",")[:-2] + [l.split(",")[-1]]) for l in ls])
    with pytest.raises(SchemaError, match="label"):
        read_csv(p)
    p.write_text(original.replace("f0,", "pitch,", 1))
    with pytest.raises(SchemaError, match="unknown"):
        read_csv(p)
    p.write_text("")
    with pytest.raises(SchemaError):
        read_csv(p)


def test_csv_parse_error_location(tmp_path):
    p = tmp_path / "f.csv"
    write_csv(_dataset(2, 2), p)
    lines = p.read_text().splitlines()
    cells = lines[2].split(",")
    cells[4] = "abc"
    lines[2] = ",".join(cells)
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(ParseError) as exc:
        read_csv(p)
    assert exc.value.row == 3 and exc.value.column == FEATURE_NAMES[4]
    cells[4] = "nan"
    lines[2] = ",".join(cells)
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(ParseError):
        read_csv(p)


def test_dataset_helpers():
    ds = _dataset(4, 3)
    assert ds.classes == list(CLASS_LABELS)
    sub = ds.columns(["f1", "f0"])
    assert sub.feature_names == ("f1", "f0") and np.array_equal(sub.X[:, 1], ds.column("f0"))
    assert len(ds.rows([0, 5])) == 2
    vecs = [FeatureVector(r) for r in ds.X]
    assert np.array_equal(dataset_from_vectors(vecs, ds.labels, ds.ids).X, ds.X)
    assert subset_names(["jitter_s", "f0"]) == ("f0", "jitter_s")
    with pytest.raises(SchemaError):
        subset_names(["nope"])
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((2, 36)), ["ASD"], ["a", "b"])
