"""TOML configuration files with key/line-located validation errors."""

from __future__ import annotations

import dataclasses
import re
from pathlib import Path
from typing import Optional

import tomli

from .classifiers import DEFAULT_HYPER, KINDS
from .errors import ConfigError
from .preprocess import PreprocessConfig
from .source import SrhConfig

EXTRA_HYPER = {"svm": {"gamma"}, "rf": {"max_features"}}
EVALUATION_KEYS = {"folds", "select", "classifiers", "strict_folds", "t_test"}
RUN_KEYS = {"seed", "jobs"}


def read_toml(path) -> tuple:
    """Parse a TOML file; returns (data, text).  Syntax errors become ConfigError."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"{path}: {exc}", line=int(m.group(1)) if m else None) from exc
    return data, text


def key_line(text: str, section: str, key: Optional[str]) -> Optional[int]:
    """1-based line where ``key`` is set inside ``[section]``.

    Falls back to the section header, then to the first ``[section.sub]`` header.
    """
    current = ""
    header_line = child_line = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[\s*([^\]]+?)\s*\]$", line)
        if m:
            current = m.group(1).replace('"', "").replace(" ", "")
            if current == section:
                header_line = n
            elif child_line is None and current.startswith(section + "."):
                child_line = n
            continue
        if current == section and key is not None:
            if re.match(rf"^{re.escape(key)}\s*=", line) or re.match(rf'^"{re.escape(key)}"\s*=', line):
                return n
    return header_line if header_line is not None else child_line


class ConfigDoc:
    """Parsed config with its source text, for locating errors."""

    def __init__(self, data: dict, text: str = "", path: str = "<config>"):
        self.data = data
        self.text = text
        self.path = path

    @classmethod
    def load(cls, path) -> "ConfigDoc":
        data, text = read_toml(path)
        return cls(data, text, str(path))

    def error(self, message: str, section: str, key: Optional[str] = None) -> ConfigError:
        full = f"{section}.{key}" if key else section
        return ConfigError(f"{self.path}: {message}", key=full, line=key_line(self.text, section, key))

    def section(self, name: str) -> dict:
        node = self.data
        for part in name.split("."):
            node = node.get(part, {})
            if not isinstance(node, dict):
                raise self.error("expected a table", name)
        return node


def _dataclass_from(doc: ConfigDoc, section: str, cls):
    values = doc.section(section)
    names = {f.name: f for f in dataclasses.fields(cls)}
    for key, v in values.items():
        if key not in names:
            raise doc.error(f"unknown key '{key}'", section, key)
        default = names[key].default
        if isinstance(default, (int, float)) and not isinstance(default, bool):
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise doc.error(f"'{key}' must be a number", section, key)
        if isinstance(default, str) and not isinstance(v, str):
            raise doc.error(f"'{key}' must be a string", section, key)
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        key = next(iter(values), None)
        for k in values:
            if k in str(exc):
                key = k
                break
        raise doc.error(str(exc), section, key) from exc


@dataclasses.dataclass
class RunConfig:
    preprocess: PreprocessConfig = PreprocessConfig()
    pitch: SrhConfig = SrhConfig()
    hyper: dict = dataclasses.field(default_factory=dict)
    folds: int = 5
    select: int = 8
    classifiers: tuple = KINDS
    strict_folds: bool = False
    t_test: str = "welch"
    seed: int = 0
    jobs: int = 1

    def snapshot(self) -> dict:
        return {
            "preprocess": dataclasses.asdict(self.preprocess),
            "pitch": dataclasses.asdict(self.pitch),
            "classifiers": {k: dict(DEFAULT_HYPER[k], **self.hyper.get(k, {})) for k in KINDS},
            "evaluation": {"folds": self.folds, "select": self.select,
                           "classifiers": list(self.classifiers),
                           "strict_folds": self.strict_folds, "t_test": self.t_test},
            "run": {"seed": self.seed, "jobs": self.jobs},
        }


def load_run_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    doc = ConfigDoc.load(path)
    known = {"preprocess", "pitch", "classifiers", "evaluation", "run"}
    for top in doc.data:
        if top not in known:
            raise doc.error(f"unknown section [{top}]", top)
    cfg = RunConfig()
    if "preprocess" in doc.data:
        cfg.preprocess = _dataclass_from(doc, "preprocess", PreprocessConfig)
    if "pitch" in doc.data:
        cfg.pitch = _dataclass_from(doc, "pitch", SrhConfig)
    for kind, values in doc.section("classifiers").items():
        sec = f"classifiers.{kind}"
        if kind not in KINDS:
            raise doc.error(f"unknown classifier '{kind}'", sec)
        allowed = set(DEFAULT_HYPER[kind]) | EXTRA_HYPER.get(kind, set())
        for key in values:
            if key not in allowed:
                raise doc.error(f"unknown hyperparameter '{key}'", sec, key)
        if kind == "svm" and values.get("kernel", "linear") not in ("linear", "rbf"):
            raise doc.error("kernel must be 'linear' or 'rbf'", sec, "kernel")
        cfg.hyper[kind] = dict(values)
    ev = doc.section("evaluation")
    for key, v in ev.items():
        if key not in EVALUATION_KEYS:
            raise doc.error(f"unknown key '{key}'", "evaluation", key)
    if "folds" in ev:
        if not isinstance(ev["folds"], int) or ev["folds"] < 2:
            raise doc.error("folds must be an integer >= 2", "evaluation", "folds")
        cfg.folds = ev["folds"]
    if "select" in ev:
        if not isinstance(ev["select"], int) or ev["select"] < 1:
            raise doc.error("select must be a positive integer", "evaluation", "select")
        cfg.select = ev["select"]
    if "classifiers" in ev:
        v = ev["classifiers"]
        items = v.split(",") if isinstance(v, str) else v
        items = [str(s).strip().lower() for s in items]
        if not items or any(s not in KINDS for s in items):
            raise doc.error(f"classifiers must be drawn from {list(KINDS)}", "evaluation", "classifiers")
        cfg.classifiers = tuple(items)
    if "strict_folds" in ev:
        cfg.strict_folds = bool(ev["strict_folds"])
    if "t_test" in ev:
        if ev["t_test"] not in ("welch", "pooled"):
            raise doc.error("t_test must be 'welch' or 'pooled'", "evaluation", "t_test")
        cfg.t_test = ev["t_test"]
    run = doc.section("run")
    for key, v in run.items():
        if key not in RUN_KEYS:
            raise doc.error(f"unknown key '{key}'", "run", key)
        if not isinstance(v, int) or isinstance(v, bool):
            raise doc.error(f"{key} must be an integer", "run", key)
    cfg.seed = run.get("seed", cfg.seed)
    cfg.jobs = run.get("jobs", cfg.jobs)
    if cfg.jobs < 1:
        raise doc.error("jobs must be >= 1", "run", "jobs")
    return cfg
