"""Declarative run configuration.

One YAML (or JSON) file describes one experiment: inputs, the packing mode,
the global-attention setting and where outputs go. Relative paths are
resolved against the directory holding the config file. Example::

    model_id: entmarkers-last3
    reviews: data/reviews.jsonl
    spans: data/spans.jsonl          # or `lexicon:` to tag on the fly
    generated: runs/entmarkers-last3/generated.jsonl
    directions: runs/entmarkers-last3/directions.jsonl
    annotations: annotations.jsonl
    output_dir: out/entmarkers-last3
    pack: {budget: 4096, input_mode: last3, k: 3, marking: true}
    attention: {setting: EntMarkers, window: 512, replace_padded_ids: false}
    report_formats: [csv, json, txt]
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import yaml

from picosum.attention import ENTITY_SETTINGS, AttentionConfig
from picosum.packing import PackConfig

WORKERS_ENV = "PICOSUM_WORKERS"
REPORT_FORMATS = ("csv", "json", "txt")
_PATH_KEYS = ("reviews", "spans", "lexicon", "generated", "directions", "bertscore", "annotations", "cleaning_rules")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    output_dir: Path
    reviews: Path | None = None
    spans: Path | None = None
    lexicon: Path | None = None
    generated: Path | None = None
    directions: Path | None = None
    bertscore: Path | None = None
    annotations: Path | None = None
    cleaning_rules: Path | None = None
    model_id: str = "model"
    pack: PackConfig = field(default_factory=PackConfig)
    attention: AttentionConfig = field(default_factory=AttentionConfig)
    replace_padded_ids: bool = False
    report_formats: tuple[str, ...] = REPORT_FORMATS
    stem: bool = False
    distance: str = "total_variation"
    workers: int | None = None

    @classmethod
    def from_dict(cls, data: Mapping, base_dir: str | Path = ".") -> "RunConfig":
        base = Path(base_dir)
        data = dict(data)
        known = set(_PATH_KEYS) | {
            "output_dir", "model_id", "pack", "attention", "report_formats", "stem", "distance", "workers",
        }
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        if "output_dir" not in data:
            raise ConfigError("config needs an output_dir")

        def resolve(value):
            return None if value is None else (base / value)

        attention = dict(data.get("attention") or {})
        replace_ids = bool(attention.pop("replace_padded_ids", False))
        formats = tuple(data.get("report_formats") or REPORT_FORMATS)
        bad = sorted(set(formats) - set(REPORT_FORMATS))
        if bad:
            raise ConfigError(f"unknown report formats: {bad}")
        try:
            pack = PackConfig(**(data.get("pack") or {}))
            att = AttentionConfig(**attention)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        return cls(
            output_dir=resolve(data["output_dir"]),
            model_id=str(data.get("model_id", "model")),
            pack=pack,
            attention=att,
            replace_padded_ids=replace_ids,
            report_formats=formats,
            stem=bool(data.get("stem", False)),
            distance=str(data.get("distance", "total_variation")),
            workers=data.get("workers"),
            **{key: resolve(data.get(key)) for key in _PATH_KEYS},
        )

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        if not isinstance(data, Mapping):
            raise ConfigError(f"{path}: config must be a mapping")
        return cls.from_dict(data, path.parent)

    @property
    def needs_entities(self) -> bool:
        return self.pack.marking or self.attention.setting in ENTITY_SETTINGS

    def worker_count(self) -> int:
        if self.workers is not None:
            return max(int(self.workers), 1)
        return max(int(os.environ.get(WORKERS_ENV, "1")), 1)

    def check_inputs(self, required: tuple[str, ...], optional: tuple[str, ...]) -> None:
        """Fail fast: required keys must be set, and every set path must exist."""
        for key in required:
            if getattr(self, key) is None:
                raise ConfigError(f"config does not set {key!r}")
        for key in required + optional:
            path = getattr(self, key)
            if path is not None and not path.is_file():
                raise ConfigError(f"{key} file not found: {path}")

    def check_pipeline_inputs(self) -> None:
        self.check_inputs(("reviews",), ("spans", "lexicon", "cleaning_rules"))
        if self.attention.setting in ENTITY_SETTINGS and not self.pack.marking:
            raise ConfigError(f"attention setting {self.attention.setting.value} requires pack.marking: true")
        if self.needs_entities and self.spans is None and self.lexicon is None:
            raise ConfigError("entity marking needs a spans file or a lexicon")

    def check_eval_inputs(self) -> None:
        self.check_inputs(("reviews", "generated"), ("directions", "bertscore", "annotations", "cleaning_rules"))

    def describe(self) -> dict:
        """Experiment settings as recorded in the manifest."""
        return {
            "model_id": self.model_id,
            "pack": {
                "budget": self.pack.budget,
                "input_mode": self.pack.input_mode.value,
                "k": self.pack.k,
                "marking": self.pack.marking,
            },
            "attention": {
                "setting": self.attention.setting.value,
                "window": self.attention.window,
                "replace_padded_ids": self.replace_padded_ids,
            },
        }
