"""Pipeline configuration: a JSON file selecting workspace location,
adapters, and training defaults.

The config path comes from ``--config`` on the CLI or the
``SKETCHSCENE_CONFIG`` environment variable; all values have working
defaults so no file is required for desk runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import adapters
from .errors import ConfigError
from .training import TrainConfig

CONFIG_ENV_VAR = "SKETCHSCENE_CONFIG"

_ADAPTER_KINDS = {"stub", "replay", "record", "http"}


@dataclass(slots=True)
class AdapterSpec:
    kind: str = "stub"
    url: str = ""
    directory: str = ""

    def validate(self, role: str) -> None:
        if self.kind not in _ADAPTER_KINDS:
            raise ConfigError(f"{role}.kind must be one of {sorted(_ADAPTER_KINDS)}")
        if self.kind == "http" and not self.url:
            raise ConfigError(f"{role}.url required for http adapters")
        if self.kind in ("replay", "record") and not self.directory:
            raise ConfigError(f"{role}.directory required for {self.kind} adapters")


@dataclass(slots=True)
class PipelineConfig:
    project_root: str = "sketchscene-project"
    object_canvas: int = 64
    max_retries: int = 1
    workers: int = 2
    train: TrainConfig = field(default_factory=TrainConfig)
    generator: AdapterSpec = field(default_factory=AdapterSpec)
    segmenter: AdapterSpec = field(default_factory=AdapterSpec)

    def __post_init__(self) -> None:
        if isinstance(self.train, dict):
            self.train = TrainConfig(**self.train)
        if isinstance(self.generator, dict):
            self.generator = AdapterSpec(**self.generator)
        if isinstance(self.segmenter, dict):
            self.segmenter = AdapterSpec(**self.segmenter)

    def validate(self) -> None:
        if self.object_canvas < 1:
            raise ConfigError(f"object_canvas must be positive, got {self.object_canvas}")
        if self.max_retries < 0:
            raise ConfigError(f"max_retries must be >= 0, got {self.max_retries}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        self.train.validate()
        self.generator.validate("generator")
        self.segmenter.validate("segmenter")


def _adapter_spec(doc: dict, role: str) -> AdapterSpec:
    if not isinstance(doc, dict):
        raise ConfigError(f"{role} must be an object")
    unknown = set(doc) - {"kind", "url", "directory"}
    if unknown:
        raise ConfigError(f"unknown {role} keys: {sorted(unknown)}")
    return AdapterSpec(
        kind=doc.get("kind", "stub"),
        url=doc.get("url", ""),
        directory=doc.get("directory", ""),
    )


def load_config(path: str | Path | None) -> PipelineConfig:
    """Load the JSON config; ``None`` returns pure defaults."""
    cfg = PipelineConfig()
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config root must be a JSON object")
        known = {
            "project_root", "object_canvas", "max_retries", "workers",
            "train", "generator", "segmenter",
        }
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.project_root = doc.get("project_root", cfg.project_root)
        cfg.object_canvas = doc.get("object_canvas", cfg.object_canvas)
        cfg.max_retries = doc.get("max_retries", cfg.max_retries)
        cfg.workers = doc.get("workers", cfg.workers)
        if "train" in doc:
            tdoc = doc["train"]
            if not isinstance(tdoc, dict):
                raise ConfigError("train must be an object")
            unknown = set(tdoc) - {"steps", "lr", "seed", "window"}
            if unknown:
                raise ConfigError(f"unknown train keys: {sorted(unknown)}")
            base = TrainConfig()
            cfg.train = TrainConfig(
                steps=tdoc.get("steps", base.steps),
                lr=tdoc.get("lr", base.lr),
                seed=tdoc.get("seed", base.seed),
                window=tdoc.get("window", base.window),
            )
        if "generator" in doc:
            cfg.generator = _adapter_spec(doc["generator"], "generator")
        if "segmenter" in doc:
            cfg.segmenter = _adapter_spec(doc["segmenter"], "segmenter")
    cfg.validate()
    return cfg


def build_generator(spec: AdapterSpec):
    if spec.kind == "stub":
        return adapters.StubGenerator()
    if spec.kind == "replay":
        return adapters.ReplayGenerator(spec.directory)
    if spec.kind == "record":
        return adapters.RecordingGenerator(adapters.StubGenerator(), spec.directory)
    return adapters.HttpGenerator(spec.url)


def build_segmenter(spec: AdapterSpec):
    if spec.kind == "stub":
        return adapters.StubSegmenter()
    if spec.kind == "http":
        return adapters.HttpSegmenter(spec.url)
    if spec.kind in ("replay", "record"):
        # Segmentation of recorded imagery still uses the darkness stub:
        # recorded fixtures are generator outputs.
        return adapters.StubSegmenter()
    raise ConfigError(f"unsupported segmenter kind {spec.kind!r}")
