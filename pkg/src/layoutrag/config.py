"""Application configuration: one YAML document mirroring AppConfig fields.

Command-line flags override file values; the file path itself defaults to
the LAYOUTRAG_CONFIG environment variable.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .errors import LayoutRagError
from .model.flow import ModelConfig
from .pipeline import RetrievalPolicy

CONFIG_ENV_VAR = "LAYOUTRAG_CONFIG"


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8000


@dataclass
class AppConfig:
    data_dir: Path = Path("data")
    index_path: Path | None = None
    checkpoint_path: Path | None = None
    model: ModelConfig | None = None
    policy: RetrievalPolicy = field(default_factory=RetrievalPolicy)
    server: ServerConfig = field(default_factory=ServerConfig)

    @property
    def dataset_path(self) -> Path:
        return self.data_dir / "dataset.json"


def _filtered(cls, doc: dict) -> dict:
    allowed = {f.name for f in fields(cls)}
    unknown = set(doc) - allowed
    if unknown:
        raise LayoutRagError(f"unknown config keys for {cls.__name__}: {sorted(unknown)}")
    return doc


def load_app_config(path: str | Path | None = None) -> AppConfig:
    """Load AppConfig from `path`, the env var, or defaults when neither is set."""
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
    if path is None:
        return AppConfig()
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise LayoutRagError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise LayoutRagError(f"config {path} must be a mapping")

    cfg = AppConfig()
    if "data_dir" in doc:
        cfg.data_dir = Path(doc.pop("data_dir"))
    if "index_path" in doc:
        cfg.index_path = Path(doc.pop("index_path"))
    if "checkpoint_path" in doc:
        cfg.checkpoint_path = Path(doc.pop("checkpoint_path"))
    if "model" in doc:
        cfg.model = ModelConfig(**_filtered(ModelConfig, doc.pop("model") or {}))
    if "policy" in doc:
        cfg.policy = RetrievalPolicy(**_filtered(RetrievalPolicy, doc.pop("policy") or {}))
    if "server" in doc:
        cfg.server = ServerConfig(**_filtered(ServerConfig, doc.pop("server") or {}))
    if doc:
        raise LayoutRagError(f"unknown config keys: {sorted(doc)}")
    return cfg
