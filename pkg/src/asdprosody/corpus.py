"""Seeded two-class corpus of synthetic sustained vowels with ground-truth sidecars."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ConfigDoc
from .errors import ConfigError
from .signal_io import SynthesisSpec, save_wav, synthesize_voice

DEFAULT_CORPUS = {
    "corpus": {
        "seed": 0,
        "sample_rate_hz": 16000,
        "duration_s": 1.0,
        "lead_silence_s": 0.15,
        "tail_silence_s": 0.15,
        "noise_db": -35.0,
        "glottal_tilt": 0.95,
        "bit_depth": 16,
    },
    "classes": {
        "ASD": {
            "count": 40,
            "f0_mean": 280.0, "f0_sd": 15.0,
            "formants_mean": [900.0, 2000.0, 2900.0, 3500.0, 4100.0],
            "formants_sd": [40.0, 80.0, 80.0, 80.0, 80.0],
            "bandwidths": [80.0, 100.0, 120.0, 150.0, 180.0],
            "jitter_pct_mean": 1.0, "jitter_pct_sd": 0.3,
            "shimmer_db_mean": 0.6, "shimmer_db_sd": 0.15,
        },
        "TD": {
            "count": 40,
            "f0_mean": 210.0, "f0_sd": 15.0,
            "formants_mean": [780.0, 1800.0, 2700.0, 3350.0, 4000.0],
            "formants_sd": [40.0, 80.0, 80.0, 80.0, 80.0],
            "bandwidths": [80.0, 100.0, 120.0, 150.0, 180.0],
            "jitter_pct_mean": 0.6, "jitter_pct_sd": 0.2,
            "shimmer_db_mean": 0.4, "shimmer_db_sd": 0.1,
        },
    },
}

CORPUS_KEYS = set(DEFAULT_CORPUS["corpus"])
CLASS_KEYS = set(DEFAULT_CORPUS["classes"]["ASD"])


@dataclass
class ClassSpec:
    label: str
    count: int
    f0_mean: float
    f0_sd: float
    formants_mean: list
    formants_sd: list
    bandwidths: list
    jitter_pct_mean: float = 0.0
    jitter_pct_sd: float = 0.0
    shimmer_db_mean: float = 0.0
    shimmer_db_sd: float = 0.0


@dataclass
class CorpusSpec:
    seed: int = 0
    sample_rate_hz: float = 16000.0
    duration_s: float = 1.0
    lead_silence_s: float = 0.15
    tail_silence_s: float = 0.15
    noise_db: Optional[float] = -35.0
    glottal_tilt: float = 0.95
    bit_depth: int = 16
    classes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "corpus": {k: getattr(self, k) for k in sorted(CORPUS_KEYS)},
            "classes": {c.label: {k: getattr(c, k) for k in sorted(CLASS_KEYS)} for c in self.classes},
        }


def _merge_defaults(data: dict) -> dict:
    out = {"corpus": dict(DEFAULT_CORPUS["corpus"]), "classes": {}}
    out["corpus"].update(data.get("corpus", {}))
    classes = data.get("classes")
    # overriding some of the default classes keeps the others
    if classes is None or set(classes) <= set(DEFAULT_CORPUS["classes"]):
        classes = {label: dict(values, **(classes or {}).get(label, {}))
                   for label, values in DEFAULT_CORPUS["classes"].items()}
    for label, values in classes.items():
        base = dict(DEFAULT_CORPUS["classes"].get(label, DEFAULT_CORPUS["classes"]["ASD"]))
        base.update(values)
        out["classes"][label] = base
    return out


def parse_corpus_spec(doc: ConfigDoc) -> CorpusSpec:
    """Validate a corpus description; unspecified keys take the built-in defaults."""
    for top in doc.data:
        if top not in ("corpus", "classes"):
            raise doc.error(f"unknown section [{top}]", top)
    for key in doc.section("corpus"):
        if key not in CORPUS_KEYS:
            raise doc.error(f"unknown key '{key}'", "corpus", key)
    for label, values in doc.section("classes").items():
        if not isinstance(values, dict):
            raise doc.error("class entries must be tables", "classes", label)
        for key in values:
            if key not in CLASS_KEYS:
                raise doc.error(f"unknown key '{key}'", f"classes.{label}", key)
    data = _merge_defaults(doc.data)
    c = data["corpus"]
    for key in CORPUS_KEYS:
        v = c[key]
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise doc.error(f"'{key}' must be a number", "corpus", key)
    fs = float(c["sample_rate_hz"])
    if fs <= 0:
        raise doc.error("sample_rate_hz must be positive", "corpus", "sample_rate_hz")
    if c["duration_s"] <= 0:
        raise doc.error("duration_s must be positive", "corpus", "duration_s")
    if not 0 <= c["glottal_tilt"] < 1:
        raise doc.error("glottal_tilt must lie in [0, 1)", "corpus", "glottal_tilt")
    if c["bit_depth"] not in (8, 16, 24, 32, -32):
        raise doc.error("bit_depth must be 8, 16, 24, 32 or -32", "corpus", "bit_depth")
    nyquist = fs / 2.0
    spec = CorpusSpec(int(c["seed"]), fs, float(c["duration_s"]), float(c["lead_silence_s"]),
                      float(c["tail_silence_s"]), float(c["noise_db"]), float(c["glottal_tilt"]),
                      int(c["bit_depth"]))
    if len(data["classes"]) != 2:
        raise doc.error("exactly two classes are required", "classes")
    for label in sorted(data["classes"]):
        v = data["classes"][label]
        sec = f"classes.{label}"
        if not isinstance(v["count"], int) or v["count"] < 1:
            raise doc.error("count must be a positive integer", sec, "count")
        if not 0 < v["f0_mean"] < nyquist:
            raise doc.error(f"f0_mean {v['f0_mean']} Hz outside (0, {nyquist:g})", sec, "f0_mean")
        fm = list(v["formants_mean"])
        if len(v["formants_sd"]) != len(fm) or len(v["bandwidths"]) != len(fm):
            raise doc.error("formants_mean, formants_sd and bandwidths need equal lengths", sec, "formants_sd")
        if any(not 0 < f < nyquist for f in fm) or any(b >= a for a, b in zip(fm[1:], fm)):
            raise doc.error("formant means must increase and stay below Nyquist", sec, "formants_mean")
        if any(b <= 0 for b in v["bandwidths"]):
            raise doc.error("bandwidths must be positive", sec, "bandwidths")
        for key in ("f0_sd", "jitter_pct_mean", "jitter_pct_sd", "shimmer_db_mean", "shimmer_db_sd"):
            if v[key] < 0:
                raise doc.error(f"{key} must be non-negative", sec, key)
        spec.classes.append(ClassSpec(label, v["count"], float(v["f0_mean"]), float(v["f0_sd"]),
                                      [float(f) for f in fm], [float(s) for s in v["formants_sd"]],
                                      [float(b) for b in v["bandwidths"]],
                                      float(v["jitter_pct_mean"]), float(v["jitter_pct_sd"]),
                                      float(v["shimmer_db_mean"]), float(v["shimmer_db_sd"])))
    return spec


def default_corpus_spec(**overrides) -> CorpusSpec:
    doc = ConfigDoc(_merge_defaults({}), "", "<default corpus>")
    spec = parse_corpus_spec(doc)
    for k, v in overrides.items():
        setattr(spec, k, v)
    return spec


def load_corpus_spec(path) -> CorpusSpec:
    return parse_corpus_spec(ConfigDoc.load(path))


def draw_recording(spec: CorpusSpec, cls: ClassSpec, class_index: int, i: int) -> SynthesisSpec:
    """Ground-truth parameters of recording ``i`` of a class, from its own seeded stream."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, class_index, i]))
    nyquist = spec.sample_rate_hz / 2.0
    f0 = float(np.clip(rng.normal(cls.f0_mean, cls.f0_sd), 75.0, min(390.0, 0.45 * nyquist)))
    formants = []
    prev = 0.0
    for m, s, b in zip(cls.formants_mean, cls.formants_sd, cls.bandwidths):
        f = float(rng.normal(m, s))
        f = min(max(f, prev + 2.0 * b), 0.95 * nyquist)
        formants.append((f, b))
        prev = f
    jitter = max(0.0, float(rng.normal(cls.jitter_pct_mean, cls.jitter_pct_sd)))
    shimmer = max(0.0, float(rng.normal(cls.shimmer_db_mean, cls.shimmer_db_sd)))
    seed = int(rng.integers(0, 2 ** 31 - 1))
    return SynthesisSpec(f0_hz=f0, f0_jitter_pct=jitter, amp_shimmer_db=shimmer, formants_hz=formants,
                         duration_s=spec.duration_s, noise_db=spec.noise_db, seed=seed,
                         lead_silence_s=spec.lead_silence_s, tail_silence_s=spec.tail_silence_s,
                         glottal_tilt=spec.glottal_tilt)


def recording_id(label: str, i: int) -> str:
    return f"{label.lower()}_{i:03d}"


def generate_corpus(spec: CorpusSpec, out_dir) -> list:
    """Write one WAV and one JSON sidecar per recording plus ``labels.csv``.

    Returns the written (id, label) pairs in file order.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for ci, cls in enumerate(spec.classes):
        for i in range(cls.count):
            rid = recording_id(cls.label, i)
            syn = draw_recording(spec, cls, ci, i)
            try:
                clip = synthesize_voice(syn, spec.sample_rate_hz)
            except ValueError as exc:
                raise ConfigError(f"class {cls.label}: {exc}", key=f"classes.{cls.label}") from exc
            save_wav(clip, out / f"{rid}.wav", spec.bit_depth)
            side = {"id": rid, "label": cls.label, "sample_rate_hz": spec.sample_rate_hz,
                    "synthesis": syn.to_dict()}
            (out / f"{rid}.json").write_text(json.dumps(side, indent=1, sort_keys=True) + "\n")
            rows.append((rid, cls.label))
    with (out / "labels.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "label"])
        w.writerows(rows)
    return rows
