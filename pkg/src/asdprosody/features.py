"""Per-recording feature vectors, labelled datasets and CSV persistence."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (DegenerateInputError, InsufficientVoicingError, ParseError,
                     ProsodyError, SchemaError)
from .lp import (DOMINANT_ORDER, FORMANT_ORDER, LPCC_ORDER, envelope_peaks,
                 lp_analysis, lpcc)
from .mfcc import N_COEFFS, build_filterbank, mfcc_frames
from .preprocess import (PIPELINE_ORDER, FrameSequence, PreprocessConfig, apply_hamming,
                         frame_signal, gate_frame_length, noise_gate, pre_emphasize,
                         select_noise_profile, trim_silence, z_normalize)
from .signal_io import AudioClip, resample
from .source import PitchTrack, SrhConfig, aggregate_source, glottal_cycles, srh_pitch

log = logging.getLogger(__name__)

FEATURE_NAMES = (
    ("f0", "zcr", "energy")
    + tuple(f"f{i}" for i in range(1, 6))
    + ("fd1", "fd2")
    + tuple(f"mfcc_{i}" for i in range(1, 13))
    + tuple(f"lpcc_{i}" for i in range(1, 13))
    + ("shimmer_db", "jitter_s")
)
N_FEATURES = len(FEATURE_NAMES)
LABEL_COLUMN = "label"
ID_COLUMN = "id"
CLASS_LABELS = ("ASD", "TD")
MFCC_NOTE = "mfcc_k holds c(k-1): coefficients c(0)..c(11), c(0) included"


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    names: tuple = FEATURE_NAMES

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if v.size != len(self.names):
            raise ValueError(f"expected {len(self.names)} values, got {v.size}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def as_dict(self) -> dict:
        return dict(zip(self.names, map(float, self.values)))


@dataclass
class LabeledDataset:
    """Feature matrix with one label and recording id per row."""

    X: np.ndarray
    labels: list
    ids: list
    feature_names: tuple = FEATURE_NAMES

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64).reshape(len(self.labels), -1) \
            if len(self.labels) else np.zeros((0, len(self.feature_names)))
        self.labels = list(self.labels)
        self.ids = list(self.ids)
        self.feature_names = tuple(self.feature_names)
        if not (self.X.shape[0] == len(self.labels) == len(self.ids)):
            raise ValueError("rows, labels and ids must have equal lengths")
        if self.X.shape[1] != len(self.feature_names):
            raise ValueError("column count does not match feature names")

    def __len__(self):
        return len(self.labels)

    @property
    def classes(self) -> list:
        return sorted(set(self.labels))

    def class_counts(self) -> dict:
        return {c: self.labels.count(c) for c in self.classes}

    def rows(self, index) -> "LabeledDataset":
        index = np.asarray(index, dtype=int)
        return LabeledDataset(self.X[index], [self.labels[i] for i in index],
                              [self.ids[i] for i in index], self.feature_names)

    def columns(self, names: Sequence[str]) -> "LabeledDataset":
        idx = [self.feature_names.index(n) for n in names]
        return LabeledDataset(self.X[:, idx], self.labels, self.ids, tuple(names))

    def with_labels(self, labels) -> "LabeledDataset":
        return LabeledDataset(self.X, list(labels), self.ids, self.feature_names)

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.feature_names.index(name)]


def frame_energy(fs: FrameSequence) -> np.ndarray:
    """Mean-square energy per frame, divided by its maximum over frames."""
    if fs.n_frames < 1:
        raise ValueError("need at least one frame")
    e = np.mean(fs.frames ** 2, axis=1)
    top = e.max()
    if not top > 0:
        raise DegenerateInputError("all frames are silent")
    return e / top


def frame_zcr(fs: FrameSequence) -> np.ndarray:
    """Fraction of adjacent-sample sign changes per frame (zero counts as positive)."""
    if fs.n_frames < 1:
        raise ValueError("need at least one frame")
    if fs.frame_len < 2:
        return np.zeros(fs.n_frames)
    sign = fs.frames >= 0
    return np.count_nonzero(sign[:, 1:] != sign[:, :-1], axis=1) / (fs.frame_len - 1)


@dataclass
class ExtractionResult:
    """Feature vector plus the intermediate products worth inspecting."""

    features: FeatureVector
    pitch: PitchTrack
    frame_counts: dict
    stages: list
    config_hash: str
    gated: bool
    notes: list = field(default_factory=list)


def _peak_mean(values: list, what: str, notes: list) -> float:
    # a peak missing from every frame is reported as 0 Hz
    if not values:
        notes.append(f"{what} absent in all frames")
        return 0.0
    return float(np.mean(values))


def extract_features(clip: AudioClip, cfg: PreprocessConfig = PreprocessConfig(),
                     srh_cfg: SrhConfig = SrhConfig()) -> ExtractionResult:
    """Extract the 36 features; toolkit errors are re-raised tagged with the clip id."""
    try:
        return _extract(clip, cfg, srh_cfg)
    except ProsodyError as exc:
        if getattr(exc, "recording_id", None) is None:
            exc.recording_id = clip.source_id
            if exc.args and clip.source_id:
                exc.args = (f"{clip.source_id}: {exc.args[0]}",) + exc.args[1:]
        raise


def _extract(clip: AudioClip, cfg: PreprocessConfig, srh_cfg: SrhConfig) -> ExtractionResult:
    """Run preprocessing and every extractor on one recording.

    Frame-level values are averaged per recording: voiced frames for F0,
    non-silent frames for MFCC, LPCC, formants and dominants, all frames
    for energy and ZCR.  Formants or dominants missing in a frame are
    skipped for that attribute only.  Jitter and shimmer are measured on
    glottal cycles found inside voiced stretches.
    """
    if not np.any(clip.samples):
        raise DegenerateInputError("recording is pure silence")
    stages = []
    profile = select_noise_profile(clip, max(cfg.noise_profile_s, 0.05))
    x = trim_silence(clip, cfg.silence_threshold_db)
    stages.append("trim")
    gated = profile is not None and profile.samples.size >= gate_frame_length(clip.sample_rate_hz)
    if gated:
        x = noise_gate(x, profile, cfg)
    stages.append("gate")
    x = resample(x, cfg.analysis_rate_hz)
    stages.append("resample")

    # source branch: pitch is tracked before pre-emphasis
    track = srh_pitch(z_normalize(x), srh_cfg)
    cycles = glottal_cycles(track)

    x = pre_emphasize(x, cfg.pre_emphasis_alpha)
    stages.append("pre_emphasis")
    x = z_normalize(x)
    stages.append("normalize")
    raw = frame_signal(x, cfg)
    stages.append("frame")
    win = apply_hamming(raw)
    stages.append("window")
    if tuple(stages) != PIPELINE_ORDER:
        raise AssertionError(f"pipeline order violated: {stages}")

    energy = frame_energy(win)
    zcr = frame_zcr(raw)
    active = energy >= 10.0 ** (cfg.silence_threshold_db / 10.0)
    fs_hz = win.sample_rate_hz
    formants = [[] for _ in range(5)]
    dominants = [[], []]
    cepstra = []
    for frame in win.frames[active]:
        m10 = lp_analysis(frame, FORMANT_ORDER)
        if not m10.ill_conditioned:
            for i, f in enumerate(envelope_peaks(m10, fs_hz, 5)):
                formants[i].append(f)
        m5 = lp_analysis(frame, DOMINANT_ORDER)
        if not m5.ill_conditioned:
            for i, f in enumerate(envelope_peaks(m5, fs_hz, 2)):
                dominants[i].append(f)
        m12 = lp_analysis(frame, LPCC_ORDER)
        if not m12.ill_conditioned:
            cepstra.append(lpcc(m12, LPCC_ORDER))
    bank = build_filterbank(fs_hz)
    mf, silent = mfcc_frames(win.frames[active], bank, N_COEFFS)
    mf = mf[~silent]
    if mf.shape[0] == 0 or not cepstra:
        raise DegenerateInputError("no non-silent frames")

    stats = aggregate_source(track, cycles)
    if stats.jitter_abs_s is None or stats.shimmer_db is None:
        raise InsufficientVoicingError("too few consecutive voiced cycles for jitter/shimmer")

    values = [stats.mean_f0_hz, float(zcr.mean()), float(energy.mean())]
    notes = []
    if not formants[0] or not dominants[0]:
        raise DegenerateInputError("no frame yields an LP envelope peak")
    values += [_peak_mean(formants[i], f"F{i + 1}", notes) for i in range(5)]
    values += [_peak_mean(dominants[i], f"FD{i + 1}", notes) for i in range(2)]
    values += list(mf.mean(axis=0))
    values += list(np.mean(cepstra, axis=0))
    values += [stats.shimmer_db, stats.jitter_abs_s]
    counts = {
        "all": int(win.n_frames),
        "non_silent": int(active.sum()),
        "voiced": int(track.voiced_mask.sum()),
        "cycles": int(cycles.voiced_mask.sum()),
        "mfcc": int(mf.shape[0]),
        "lpcc": len(cepstra),
        **{f"f{i + 1}": len(formants[i]) for i in range(5)},
        **{f"fd{i + 1}": len(dominants[i]) for i in range(2)},
    }
    log.debug("%s frame counts: %s", clip.source_id, counts)
    for n in notes:
        log.debug("%s: %s", clip.source_id, n)
    vec = FeatureVector(values)
    if not np.all(np.isfinite(vec.values)):
        raise DegenerateInputError("non-finite feature value")
    return ExtractionResult(vec, track, counts, stages, cfg.config_hash(), gated, notes)


# ---------------------------------------------------------------- CSV

def _fmt(v: float) -> str:
    return format(v, ".12g")


def write_csv(ds: LabeledDataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(ds.feature_names) + [LABEL_COLUMN, ID_COLUMN])
        for row, label, rid in zip(ds.X, ds.labels, ds.ids):
            w.writerow([_fmt(v) for v in row] + [label, rid])


def read_csv(path) -> LabeledDataset:
    """Load a feature table; columns must be canonical feature names plus label and id."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        unknown = [h for h in header if h not in FEATURE_NAMES and h not in (LABEL_COLUMN, ID_COLUMN)]
        if unknown:
            raise SchemaError(f"{path}: unknown column(s) {unknown}")
        if LABEL_COLUMN not in header:
            raise SchemaError(f"{path}: missing '{LABEL_COLUMN}' column")
        if ID_COLUMN not in header:
            raise SchemaError(f"{path}: missing '{ID_COLUMN}' column")
        if len(set(header)) != len(header):
            raise SchemaError(f"{path}: duplicate columns")
        names = tuple(n for n in FEATURE_NAMES if n in header)
        missing = [n for n in FEATURE_NAMES if n not in header]
        if missing:
            raise SchemaError(f"{path}: missing feature column(s) {missing}")
        col = {h: i for i, h in enumerate(header)}
        X, labels, ids = [], [], []
        for r, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{r}: expected {len(header)} cells, got {len(row)}", row=r)
            vals = []
            for name in names:
                cell = row[col[name]]
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(f"{path}:{r}: column '{name}' is not numeric: {cell!r}",
                                     row=r, column=name) from None
                if not math.isfinite(v):
                    raise ParseError(f"{path}:{r}: column '{name}' is not finite", row=r, column=name)
                vals.append(v)
            X.append(vals)
            labels.append(row[col[LABEL_COLUMN]].strip())
            ids.append(row[col[ID_COLUMN]].strip())
    return LabeledDataset(np.array(X).reshape(len(labels), len(names)), labels, ids, names)


def dataset_from_vectors(vectors: Sequence[FeatureVector], labels: Sequence[str],
                         ids: Sequence[str]) -> LabeledDataset:
    X = np.array([v.values for v in vectors]).reshape(len(vectors), N_FEATURES)
    return LabeledDataset(X, list(labels), list(ids), FEATURE_NAMES)


def feature_vector_from_dataset(ds: LabeledDataset, i: int) -> FeatureVector:
    return FeatureVector(ds.X[i], ds.feature_names)


def subset_names(names: Optional[Sequence[str]]) -> tuple:
    """Canonical-order tuple of the requested names, validated."""
    if names is None:
        return FEATURE_NAMES
    bad = [n for n in names if n not in FEATURE_NAMES]
    if bad:
        raise SchemaError(f"unknown feature(s) {bad}")
    return tuple(n for n in FEATURE_NAMES if n in names)
