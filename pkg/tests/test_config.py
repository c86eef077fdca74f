"""Application config file loading."""
import pytest

from layoutrag.config import CONFIG_ENV_VAR, AppConfig, load_app_config
from layoutrag.errors import LayoutRagError


CONFIG_YAML = """
data_dir: /srv/layouts
index_path: /srv/layouts/index.lrix
checkpoint_path: /srv/layouts/model.lrck
model:
  n_categories: 5
  d_model: 32
  n_heads: 4
policy:
  k: 16
  tau_reuse: 0.9
  tau_ref: 0.1
server:
  host: 0.0.0.0
  port: 9100
"""


def test_defaults_without_file(monkeypatch):
    monkeypatch.delenv(CONFIG_ENV_VAR, raising=False)
    cfg = load_app_config()
    assert isinstance(cfg, AppConfig)
    assert cfg.policy.tau_reuse == 0.95
    assert cfg.dataset_path.name == "dataset.json"


def test_loads_all_sections(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(CONFIG_YAML)
    cfg = load_app_config(path)
    assert str(cfg.data_dir) == "/srv/layouts"
    assert cfg.model.d_model == 32
    assert cfg.policy.k == 16 and cfg.policy.tau_ref == 0.1
    assert cfg.server.port == 9100


def test_env_var_points_at_file(tmp_path, monkeypatch):
    path = tmp_path / "config.yaml"
    path.write_text("server: {port: 7777}\n")
    monkeypatch.setenv(CONFIG_ENV_VAR, str(path))
    assert load_app_config().server.port == 7777


def test_unknown_keys_rejected(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("mystery: 1\n")
    with pytest.raises(LayoutRagError):
        load_app_config(path)


def test_unknown_nested_keys_rejected(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("policy: {tau_mystery: 1}\n")
    with pytest.raises(LayoutRagError):
        load_app_config(path)


def test_unreadable_file(tmp_path):
    with pytest.raises(LayoutRagError):
        load_app_config(tmp_path / "missing.yaml")
