"""
Utilities package for the AU detection pipeline
"""

from .config_loader import (
    AugmentConfig,
    BackboneConfig,
    DataConfig,
    GeometryConfig,
    HeadConfig,
    LossConfig,
    ModelConfig,
    MsflConfig,
    SaclConfig,
    SynthConfig,
    TrainConfig,
    create_output_paths,
    get_augment_config,
    get_data_config,
    get_loss_config,
    get_model_config,
    get_synth_config,
    get_train_config,
    load_config,
    validate_config,
)

from .errors import (
    ConfigError,
    DegenerateScaleError,
    DimensionError,
    ManifestError,
    NonFiniteGradientError,
)

from .logging_setup import LOG_FORMAT, log_banner, setup_logging

__all__ = [
    # Configuration
    'AugmentConfig',
    'BackboneConfig',
    'DataConfig',
    'GeometryConfig',
    'HeadConfig',
    'LossConfig',
    'ModelConfig',
    'MsflConfig',
    'SaclConfig',
    'SynthConfig',
    'TrainConfig',
    'create_output_paths',
    'get_augment_config',
    'get_data_config',
    'get_loss_config',
    'get_model_config',
    'get_synth_config',
    'get_train_config',
    'load_config',
    'validate_config',
    # Errors
    'ConfigError',
    'DegenerateScaleError',
    'DimensionError',
    'ManifestError',
    'NonFiniteGradientError',
    # Logging
    'LOG_FORMAT',
    'log_banner',
    'setup_logging',
]
