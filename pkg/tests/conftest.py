"""
Shared pytest fixtures
"""

import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / 'src'))

from utils.config_loader import (  # noqa: E402
    get_augment_config,
    get_data_config,
    get_loss_config,
    get_model_config,
    get_synth_config,
    get_train_config,
    load_config,
)

TOY_CONFIG = ROOT / 'config' / 'toy.yaml'
FULL_CONFIG = ROOT / 'config' / 'config.yaml'
DISFA_CONFIG = ROOT / 'config' / 'disfa.yaml'


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def toy_config():
    return load_config(str(TOY_CONFIG))


@pytest.fixture
def full_config():
    return load_config(str(FULL_CONFIG))


@pytest.fixture
def toy_model_cfg(toy_config):
    return get_model_config(toy_config)


@pytest.fixture
def toy_loss_cfg(toy_config):
    return get_loss_config(toy_config)


@pytest.fixture
def toy_train_cfg(toy_config):
    return get_train_config(toy_config)


@pytest.fixture
def toy_augment_cfg(toy_config):
    return get_augment_config(toy_config)


@pytest.fixture
def toy_data_cfg(toy_config):
    return get_data_config(toy_config)


@pytest.fixture
def toy_synth_cfg(toy_config):
    return get_synth_config(toy_config)


@pytest.fixture
def tiny_dataset(toy_synth_cfg, toy_model_cfg):
    """12 синтетичних облич 40x40, 6 суб'єктів"""
    from data.synthetic import SyntheticFaceGenerator
    cfg = replace(toy_synth_cfg, noise=0.0)
    return SyntheticFaceGenerator(cfg, toy_model_cfg.au_ids, seed=7).generate(12)


def face_landmarks(size: float = 256.0) -> np.ndarray:
    """Канонічні лендмарки синтетичного обличчя (49, 2)"""
    from data.synthetic import template_landmarks
    return template_landmarks(size)
