"""Command-line entry point: synth, extract, rank, evaluate, train, predict."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, classifiers
from .config import ConfigDoc, RunConfig, load_run_config
from .corpus import default_corpus_spec, generate_corpus, parse_corpus_spec
from .errors import ConfigError, ProsodyError, RecordingError
from .evaluation import cross_validate, format_report, plot_rows
from .features import (FEATURE_NAMES, MFCC_NOTE, FeatureVector, LabeledDataset, dataset_from_vectors,
                       extract_features, read_csv, write_csv)
from .signal_io import load_wav
from .stats import NormalizationParams, class_statistics, format_class_statistics, minmax_fit, rank_features

log = logging.getLogger("asdprosody")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
MANIFEST = "manifest.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- helpers

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = _dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc) if epoch else _dt.datetime.now(_dt.timezone.utc)
    return t.isoformat(timespec="seconds")


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n")


def write_manifest(out: Path, command: str, cfg: RunConfig, inputs, outputs, started: str,
                   extra=None) -> None:
    """The single manifest of an output directory; timestamps make it run-specific."""
    manifest = {
        "command": command,
        "tool": "asdprosody",
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.snapshot(),
        "inputs": {str(p): sha256_file(p) for p in inputs if Path(p).is_file()},
        "outputs": {str(Path(p).name): sha256_file(p) for p in outputs},
        "started": started,
        "finished": _timestamp(),
    }
    if extra:
        manifest.update(extra)
    write_json(out / MANIFEST, manifest)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def read_labels(path) -> dict:
    """Two-column id,label CSV (a header row 'id,label' is optional)."""
    labels = {}
    with open(path, newline="") as fh:
        for n, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise ProsodyError(f"{path}:{n}: expected 'id,label'")
            rid, label = row[0].strip(), row[1].strip()
            if n == 1 and rid.lower() == "id" and label.lower() == "label":
                continue
            labels[rid] = label
    return labels


def find_audio(path) -> list:
    p = Path(path)
    if p.is_file():
        return [p]
    if not p.is_dir():
        raise FileNotFoundError(f"{p} does not exist")
    return sorted(p.rglob("*.wav"))


def _extract_one(task):
    path, cfg_pre, cfg_pitch = task
    try:
        clip = load_wav(path)
        res = extract_features(clip, cfg_pre, cfg_pitch)
        pitch = [(f.time_s, f.f0_hz, f.srh_peak, f.voiced) for f in res.pitch.frames]
        return path.stem, res.features.values, pitch, res.frame_counts, res.notes, None
    except ProsodyError as exc:
        return path.stem, None, None, None, None, f"{type(exc).__name__}: {exc}"
    except (ValueError, OSError) as exc:
        return path.stem, None, None, None, None, f"{type(exc).__name__}: {exc}"


def write_pitch_csv(path, frames) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame_index", "time_s", "f0_hz", "srh_peak", "voiced"])
        for i, (t, f0, peak, voiced) in enumerate(frames):
            w.writerow([i, format(t, ".6f"), "" if f0 is None else format(f0, ".12g"),
                        format(peak, ".12g"), int(voiced)])


# ---------------------------------------------------------------- commands

def cmd_synth(args, cfg: RunConfig) -> int:
    started = _timestamp()
    if args.spec:
        doc = ConfigDoc.load(args.spec)
        if args.seed is not None:
            doc.data.setdefault("corpus", {})["seed"] = args.seed
        spec = parse_corpus_spec(doc)
    else:
        spec = default_corpus_spec()
        if args.seed is not None:
            spec.seed = args.seed
    out = _out_dir(args)
    rows = generate_corpus(spec, out)
    outputs = sorted(p for p in out.iterdir() if p.name != MANIFEST and p.is_file())
    cfg.seed = spec.seed
    write_manifest(out, "synth", cfg, [args.spec] if args.spec else [], outputs, started,
                   {"corpus_spec": spec.to_dict(), "recordings": len(rows)})
    print(f"wrote {len(rows)} recordings to {out}")
    return EXIT_OK


def cmd_extract(args, cfg: RunConfig) -> int:
    started = _timestamp()
    files = find_audio(args.audio)
    if not files:
        raise UsageError(f"no .wav files under {args.audio}")
    labels_path = args.labels
    if labels_path is None:
        guess = Path(args.audio) / "labels.csv"
        if not guess.is_file():
            raise UsageError("--labels is required (no labels.csv next to the audio)")
        labels_path = guess
    labels = read_labels(labels_path)
    todo, status = [], {}
    for p in files:
        if p.stem not in labels:
            log.warning("%s: no label, skipped", p.name)
            status[p.stem] = "skipped: no label"
        else:
            todo.append(p)
    tasks = [(p, cfg.preprocess, cfg.pitch) for p in todo]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            results = list(pool.map(_extract_one, tasks, chunksize=1))
    else:
        results = [_extract_one(t) for t in tasks]
    out = _out_dir(args)
    vectors, ids, labs, failures = [], [], [], []
    pitch_dir = out / "pitch"
    for rid, values, pitch, counts, notes, err in results:
        if err:
            log.error("%s: %s", rid, err)
            status[rid] = f"failed: {err}"
            failures.append(rid)
            continue
        status[rid] = "ok"
        for n in notes:
            log.info("%s: %s", rid, n)
        vectors.append(values)
        ids.append(rid)
        labs.append(labels[rid])
        if args.dump_pitch:
            pitch_dir.mkdir(exist_ok=True)
            write_pitch_csv(pitch_dir / f"{rid}.csv", pitch)
    ds = LabeledDataset(np.array(vectors).reshape(len(ids), len(FEATURE_NAMES)), labs, ids)
    csv_path = out / "features.csv"
    write_csv(ds, csv_path)
    outputs = [csv_path]
    if args.dump_pitch and pitch_dir.exists():
        outputs += sorted(pitch_dir.glob("*.csv"))
    write_manifest(out, "extract", cfg, files + [Path(labels_path)], outputs, started,
                   {"config_hash": cfg.preprocess.config_hash(), "feature_names": list(FEATURE_NAMES),
                    "feature_note": MFCC_NOTE, "files": dict(sorted(status.items()))})
    print(f"extracted {len(ids)} of {len(files)} files to {csv_path}")
    if failures:
        print(f"{len(failures)} failed: {', '.join(failures)}", file=sys.stderr)
    if not ids:
        return EXIT_DATA
    return EXIT_OK


def cmd_rank(args, cfg: RunConfig) -> int:
    started = _timestamp()
    ds = read_csv(args.features)
    scaled = minmax_fit(ds).apply(ds)
    select = args.select if args.select is not None else cfg.select
    ranking = rank_features(scaled, min(select, len(ds.feature_names)), cfg.t_test)
    rows = class_statistics(ds, test=cfg.t_test)
    position = {name: r for r, name in enumerate(ranking.ranked_names, start=1)}
    out = _out_dir(args)
    text = format_class_statistics(rows, ds.classes)
    text += "\nranking by |t|: " + ", ".join(ranking.ranked_names) + "\n"
    text += f"selected (top {ranking.k}): " + ", ".join(ranking.selected) + "\n"
    (out / "rank.txt").write_text(text)
    with open(out / "rank.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        a, b = ds.classes
        w.writerow(["feature", f"mean_{a}", f"mean_{b}", "t", "p", "decision", "rank"])
        for r in rows:
            w.writerow([r.feature, format(r.mean_a, ".12g"), format(r.mean_b, ".12g"),
                        format(r.t, ".12g"), format(r.p, ".12g"), r.decision, position[r.feature]])
    write_manifest(out, "rank", cfg, [args.features], [out / "rank.txt", out / "rank.csv"], started)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_evaluate(args, cfg: RunConfig) -> int:
    started = _timestamp()
    ds = read_csv(args.features)
    rep = cross_validate(ds, cfg.classifiers, cfg.folds, min(cfg.select, len(ds.feature_names)),
                         cfg.seed, "fold" if cfg.strict_folds else "global", cfg.hyper,
                         jobs=cfg.jobs, test=cfg.t_test)
    out = _out_dir(args)
    text = format_report(rep)
    (out / "report.txt").write_text(text)
    write_json(out / "report.json", rep.to_dict())
    (out / "plot_metrics.csv").write_text(plot_rows(rep))
    with open(out / "predictions.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fold", "id", "classifier", "predicted", "score"])
        for f in rep.folds:
            for kind in rep.summaries:
                for rid, lab, s in zip(f.test_ids, f.predictions[kind], f.scores[kind]):
                    w.writerow([f.fold, rid, kind, lab, format(s, ".12g")])
    outputs = [out / n for n in ("report.txt", "report.json", "plot_metrics.csv", "predictions.csv")]
    write_manifest(out, "evaluate", cfg, [args.features], outputs, started)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    started = _timestamp()
    ds = read_csv(args.features)
    params = minmax_fit(ds)
    scaled = params.apply(ds)
    ranking = rank_features(scaled, min(cfg.select, len(ds.feature_names)), cfg.t_test)
    train = scaled.columns(ranking.selected)
    model = classifiers.fit(args.classifier, train, cfg.hyper.get(args.classifier), seed=cfg.seed,
                            jobs=cfg.jobs)
    model.info["normalization"] = params.to_dict()
    model.info["ranking"] = ranking.ranked_names
    out = _out_dir(args)
    path = out / f"model_{args.classifier}.json"
    classifiers.save_model(model, path)
    write_manifest(out, "train", cfg, [args.features], [path], started)
    print(f"trained {args.classifier} on {', '.join(ranking.selected)} -> {path}")
    return EXIT_OK


def cmd_predict(args, cfg: RunConfig) -> int:
    started = _timestamp()
    model = classifiers.load_model(args.model)
    src = Path(args.input)
    if src.suffix.lower() == ".csv":
        ds = read_csv(src)
    else:
        files = find_audio(src)
        if not files:
            raise UsageError(f"no .wav files under {src}")
        results = [_extract_one((p, cfg.preprocess, cfg.pitch)) for p in files]
        ok = [r for r in results if r[5] is None]
        for r in results:
            if r[5] is not None:
                log.error("%s: %s", r[0], r[5])
        if not ok:
            return EXIT_DATA
        ds = dataset_from_vectors([FeatureVector(r[1]) for r in ok], [""] * len(ok), [r[0] for r in ok])
    norm = model.info.get("normalization")
    if norm:
        ds = NormalizationParams.from_dict(norm).apply(ds)
    labels, scores = classifiers.predict_batch(model, ds.X, ds.feature_names)
    out = _out_dir(args)
    path = out / "predictions.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "predicted", "score"])
        for rid, lab, s in zip(ds.ids, labels, scores):
            w.writerow([rid, lab, format(float(s), ".12g")])
    write_manifest(out, "predict", cfg, [args.model] + ([src] if src.is_file() else []), [path], started)
    for rid, lab, s in zip(ds.ids, labels, scores):
        print(f"{rid},{lab},{float(s):.6g}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _preprocess_flags(s) -> None:
    g = s.add_argument_group("preprocessing")
    g.add_argument("--alpha", type=float, default=None, help="pre-emphasis coefficient (0.98)")
    g.add_argument("--frame-ms", type=float, default=None, help="analysis frame length (25)")
    g.add_argument("--shift-ms", type=float, default=None, help="frame shift (10)")
    g.add_argument("--gate-db", type=float, default=None, help="noise-gate attenuation in dB (6)")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="TOML configuration file")
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--jobs", type=int, default=None, help="worker count")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = _Parser(prog="asdprosody", description="Prosodic feature extraction and ASD/TD classification.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", parents=[common], help="generate the synthetic two-class corpus")
    s.add_argument("spec", nargs="?", help="corpus description (TOML); built-in default if omitted")

    s = sub.add_parser("extract", parents=[common], help="extract the 36 features from WAV files")
    s.add_argument("audio", help="WAV file or directory")
    s.add_argument("--labels", help="id,label CSV (default: labels.csv in the audio directory)")
    s.add_argument("--dump-pitch", action="store_true", help="write per-frame pitch CSVs")
    _preprocess_flags(s)

    s = sub.add_parser("rank", parents=[common], help="t-test report and feature ranking")
    s.add_argument("features", help="feature CSV")
    s.add_argument("--select", type=int, default=None)

    s = sub.add_parser("evaluate", parents=[common], help="k-fold cross-validation")
    s.add_argument("features", help="feature CSV")
    s.add_argument("--folds", type=int, default=None)
    s.add_argument("--select", type=int, default=None)
    s.add_argument("--classifiers", default=None, help="comma list from nb,lr,svm,rf")
    s.add_argument("--strict-folds", action="store_true", default=None,
                   help="fit min-max scaling on each training split")
    s.add_argument("--t-test", choices=("welch", "pooled"), default=None)

    s = sub.add_parser("train", parents=[common], help="fit one classifier on all rows")
    s.add_argument("features", help="feature CSV")
    s.add_argument("--classifier", default="svm", choices=classifiers.KINDS)
    s.add_argument("--select", type=int, default=None)

    s = sub.add_parser("predict", parents=[common], help="classify WAV files or a feature CSV")
    s.add_argument("model", help="model JSON written by train")
    s.add_argument("input", help="WAV file, directory, or feature CSV")
    _preprocess_flags(s)
    return p


def _apply_overrides(args, cfg: RunConfig) -> RunConfig:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.jobs is not None:
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        cfg.jobs = args.jobs
    if getattr(args, "folds", None) is not None:
        if args.folds < 2:
            raise UsageError("--folds must be >= 2")
        cfg.folds = args.folds
    if getattr(args, "select", None) is not None:
        if args.select < 1:
            raise UsageError("--select must be >= 1")
        cfg.select = args.select
    if getattr(args, "classifiers", None):
        try:
            cfg.classifiers = tuple(classifiers.parse_kinds(args.classifiers))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if getattr(args, "strict_folds", None):
        cfg.strict_folds = True
    if getattr(args, "t_test", None):
        cfg.t_test = args.t_test
    pre = {}
    for flag, key, scale in (("alpha", "pre_emphasis_alpha", 1.0), ("frame_ms", "frame_len_s", 1e-3),
                             ("shift_ms", "frame_shift_s", 1e-3), ("gate_db", "noise_reduction_db", 1.0)):
        v = getattr(args, flag, None)
        if v is not None:
            pre[key] = v * scale
    if pre:
        try:
            cfg.preprocess = dataclasses.replace(cfg.preprocess, **pre)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return cfg


COMMANDS = {"synth": cmd_synth, "extract": cmd_extract, "rank": cmd_rank,
            "evaluate": cmd_evaluate, "train": cmd_train, "predict": cmd_predict}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _apply_overrides(args, load_run_config(args.config))
        return COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ProsodyError, RecordingError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
