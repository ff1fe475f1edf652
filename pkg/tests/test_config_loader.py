"""
Tests for configuration loading and validation
"""

import copy

import pytest
import yaml

from conftest import DISFA_CONFIG
from utils.config_loader import (
    create_output_paths,
    get_model_config,
    get_train_config,
    load_config,
    validate_config,
)
from utils.errors import ConfigError


@pytest.mark.parametrize("fixture", ["toy_config", "full_config"])
def test_shipped_configs_are_valid(fixture, request):
    assert validate_config(request.getfixturevalue(fixture))


def test_disfa_config():
    config = load_config(str(DISFA_CONFIG))
    assert validate_config(config)
    assert get_model_config(config).au_ids == [1, 2, 4, 6, 9, 12, 25, 26]


def test_full_size_model_values(full_config):
    model = get_model_config(full_config)
    assert model.backbone.H == 224 and model.backbone.d0 == 64
    assert model.sacl.D == 960
    assert model.sacl.L == [2, 2, 6, 2]
    assert model.sacl.K == 9
    assert model.geometry.N_ROI == 18


def test_toy_values(toy_model_cfg, toy_train_cfg):
    assert toy_model_cfg.au_ids == [1, 12, 25]
    assert toy_model_cfg.N_AU == 3
    assert toy_model_cfg.sacl.resolved_stage_dims() == [60, 120]
    assert toy_train_cfg.batch_size == 8
    assert toy_train_cfg.lr_max == pytest.approx(0.05)


def test_empty_file(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("", encoding='utf-8')
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(str(tmp_path / "absent.yaml"))


def test_n_au_must_match(toy_config):
    config = copy.deepcopy(toy_config)
    config['model']['N_AU'] = 4
    with pytest.raises(ConfigError, match="N_AU"):
        get_model_config(config)


def test_unknown_key(toy_config):
    config = copy.deepcopy(toy_config)
    config['train']['learning_rate'] = 0.1
    with pytest.raises(ConfigError, match="learning_rate"):
        get_train_config(config)


def test_model_and_sacl_d_disagree(toy_config):
    config = copy.deepcopy(toy_config)
    config['sacl']['D'] = 240
    with pytest.raises(ConfigError, match="disagrees"):
        get_model_config(config)


@pytest.mark.parametrize("section,key,value,match", [
    ('model', 'H', 48, "divisible by 32"),
    ('sacl', 'L', [1], "L lists"),
    ('sacl', 'metric', 'chebyshev', "metric"),
    ('sacl', 'graph_mode', 'full', "graph_mode"),
    ('model', 'N_land', 68, "N_land must be 49"),
    ('sacl', 'K', 6, "smaller than N_ROI"),
    ('model', 'interpolation', 'cubic', "interpolation"),
    ('model', 'drop_stages', [5], "drop_stages"),
    ('geometry', 'N_ROI', 8, "N_ROI"),
    ('geometry', 'index_base', 2, "index_base"),
    ('geometry', 'roi_source', 'manual', "roi_source"),
])
def test_validation_errors(toy_config, section, key, value, match):
    config = copy.deepcopy(toy_config)
    config[section][key] = value
    with pytest.raises(ConfigError, match=match):
        validate_config(config)


def test_d_must_be_fifteen_d0(toy_config):
    config = copy.deepcopy(toy_config)
    config['model']['d0'] = 16
    with pytest.raises(ConfigError, match="15\\*d0"):
        validate_config(config)


def test_missing_section(toy_config):
    config = copy.deepcopy(toy_config)
    del config['loss']
    with pytest.raises(ConfigError, match="loss"):
        validate_config(config)


def test_create_output_paths(tmp_path, toy_config):
    config = copy.deepcopy(toy_config)
    config['paths'] = {'output': 'ignored', 'dataset': 'data/faces', 'plots': 'plots'}
    paths = create_output_paths(config, str(tmp_path / "run"))
    assert paths['output'] == tmp_path / "run"
    assert paths['plots'].is_dir()
    assert 'dataset' not in paths
    assert not (tmp_path / "run" / "data").exists()


def test_round_trip_through_yaml(tmp_path, toy_config):
    path = tmp_path / "copy.yaml"
    path.write_text(yaml.safe_dump(toy_config), encoding='utf-8')
    assert load_config(str(path)) == toy_config


@pytest.mark.parametrize("mode", ["dynamic", "facs", "statistics"])
def test_graph_modes_accepted(toy_config, mode):
    config = copy.deepcopy(toy_config)
    config['sacl']['graph_mode'] = mode
    assert validate_config(config)
    assert get_model_config(config).sacl.graph_mode == mode
