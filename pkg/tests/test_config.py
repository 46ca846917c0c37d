"""
Tests for config/run_config.py and config/settings.py.
"""

import pytest

from config.run_config import (
    RunConfig,
    class_names,
    load_class_table,
    load_run_config,
)
from config.settings import Settings
from models.errors import ConfigError
from models.grid import GridSpec


def test_default_config_is_omnihd():
    config = load_run_config()
    assert config.grid_spec == GridSpec.preset("omnihd")
    assert config.pseudolabel.stage2_radius == 2.0
    assert config.fusion.to_fusion_config().volume_shape == (8, 16, 24, 4)


def test_yaml_config_with_explicit_grid(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(
        "grid:\n  x_range: [0, 4]\n  y_range: [0, 2]\n  z_range: [0, 1]\n  voxel_size: 0.5\n"
        "pseudolabel:\n  noise_band: 0.2\n"
    )
    config = load_run_config(str(path))
    assert config.grid_spec.dims == (8, 4, 2)
    assert config.pseudolabel.noise_band == 0.2
    assert config.pseudolabel.knn == 16


def test_unknown_keys_are_rejected(tmp_path):
    path = tmp_path / "run.json"
    path.write_text('{"pseudolabel": {"noise_bnad": 0.2}}')
    with pytest.raises(ConfigError, match="pseudolabel.noise_bnad"):
        load_run_config(str(path))


def test_unknown_preset_is_rejected(tmp_path):
    path = tmp_path / "run.json"
    path.write_text('{"preset": "kitti"}')
    with pytest.raises(ConfigError, match="kitti"):
        load_run_config(str(path))


def test_fusion_heads_must_divide_channels(tmp_path):
    path = tmp_path / "run.json"
    path.write_text('{"fusion": {"channels": 6, "heads": 4}}')
    with pytest.raises(ConfigError):
        load_run_config(str(path))


def test_malformed_document_is_a_config_error(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("preset: [unclosed\n")
    with pytest.raises(ConfigError, match="not valid"):
        load_run_config(str(path))


def test_class_tables():
    omnihd = load_class_table("omnihd")
    assert len(omnihd) == 12
    assert omnihd[0].name == "free" and omnihd[1].name == "car"
    assert len(load_class_table("nuscenes")) == 17
    assert class_names(omnihd, 14)[12:] == ["class_12", "class_13"]
    with pytest.raises(ConfigError, match="waymo"):
        load_class_table("waymo")


def test_run_config_is_frozen():
    with pytest.raises(ValueError):
        RunConfig().seed = 3


def test_settings_read_the_environment(monkeypatch):
    monkeypatch.setenv("OCCUKIT_THREADS", "3")
    monkeypatch.setenv("OCCUKIT_VERBOSE", "TRUE")
    s = Settings()
    assert s.threads == 3
    assert s.verbose is True


def test_settings_clamp_threads_to_one(monkeypatch):
    monkeypatch.setenv("OCCUKIT_THREADS", "0")
    assert Settings().threads == 1
