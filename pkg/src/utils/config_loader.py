"""
Configuration loader utility
Утиліта для завантаження конфігурації моделі, тренування та даних
"""

import yaml
from dataclasses import dataclass, field, fields
from typing import Dict, Any, List, Optional
from pathlib import Path

from .errors import ConfigError


@dataclass
class BackboneConfig:
    """Стем + чотири стадії піраміди + Landmarks Predictor"""
    d0: int = 64
    H: int = 224
    W: int = 224
    N_land: int = 49
    blocks_per_stage: List[int] = field(default_factory=lambda: [1, 1, 1, 1])
    lp_channels: List[int] = field(default_factory=lambda: [64, 64, 64])


@dataclass
class MsflConfig:
    interpolation: str = "nearest"
    drop_stages: List[int] = field(default_factory=list)


@dataclass
class SaclConfig:
    S: int = 4
    L: List[int] = field(default_factory=lambda: [2, 2, 6, 2])
    K: int = 9
    metric: str = "euclidean"
    D: int = 960
    stage_dims: Optional[List[int]] = None
    ffn_ratio: int = 4
    graph_mode: str = "dynamic"

    def resolved_stage_dims(self) -> List[int]:
        """Розклад розмірностей стадій: геометричне подвоєння до D"""
        if self.stage_dims:
            return list(self.stage_dims)
        return [self.D // (2 ** (self.S - 1 - s)) for s in range(self.S)]


@dataclass
class GeometryConfig:
    eta: float = 0.25
    xi: float = 0.14
    index_base: int = 1
    inner_eye_corners: List[int] = field(default_factory=lambda: [22, 25])
    roi_source: str = "predicted"
    N_ROI: Optional[int] = None


@dataclass
class HeadConfig:
    hidden: int = 0


@dataclass
class ModelConfig:
    """Гіперпараметри мережі: бекбон, MSFL, SACL, геометрія, голова"""
    au_ids: List[int]
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    msfl: MsflConfig = field(default_factory=MsflConfig)
    sacl: SaclConfig = field(default_factory=SaclConfig)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    head: HeadConfig = field(default_factory=HeadConfig)
    dtype: str = "float32"

    @property
    def N_AU(self) -> int:
        return len(self.au_ids)


@dataclass
class LossConfig:
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 0.5
    dice_eps: float = 1.0
    clamp_eps: float = 1e-7


@dataclass
class TrainConfig:
    batch_size: int = 16
    epochs: int = 12
    warmup_epochs: int = 1
    lr_max: float = 1e-3
    momentum: float = 0.9
    nesterov: bool = True
    weight_decay: float = 5e-4
    clip_norm: float = 5.0
    max_steps: Optional[int] = None
    seed: int = 0
    deterministic: bool = True
    num_workers: int = 0
    prefetch: int = 4
    threshold: float = 0.5
    fold: int = 1


@dataclass
class AugmentConfig:
    enabled: bool = True
    random_crop: bool = True
    flip_prob: float = 0.5
    brightness: float = 0.2
    contrast: float = 0.2
    flip_permutation: Optional[List[int]] = None


@dataclass
class DataConfig:
    aligned_size: int = 256
    label_threshold: Optional[float] = None
    num_folds: int = 3
    fold_table: Optional[str] = None


@dataclass
class SynthConfig:
    n: int = 512
    n_subjects: int = 12
    image_size: int = 256
    occurrence_rates: Optional[List[float]] = None
    au_magnitude: float = 0.6
    rotation_jitter: float = 0.0
    scale_jitter: float = 0.0
    shift_jitter: float = 0.0
    subject_variation: float = 0.03
    noise: float = 0.02


def load_config(config_path: str = None) -> Dict[str, Any]:
    """
    Завантажити конфігурацію з YAML файлу

    Parameters:
    -----------
    config_path : str, optional
        Шлях до конфігураційного файлу
        Якщо не вказано, шукає в ./config/config.yaml

    Returns:
    --------
    config : dict
        Словник з конфігурацією
    """
    if config_path is None:
        # Знайти корневу директорію проєкту
        current_dir = Path(__file__).parent
        project_root = current_dir.parent.parent
        config_path = project_root / "config" / "config.yaml"

    with open(config_path, 'r', encoding='utf-8') as f:
        config = yaml.safe_load(f)

    if not isinstance(config, dict):
        raise ConfigError(f"Config file {config_path} is empty or not a mapping")

    return config


def _build(cls, section: Dict[str, Any], name: str):
    """Створити dataclass з секції, відкидаючи невідомі ключі з помилкою"""
    section = section or {}
    known = {f.name for f in fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"Unknown keys in '{name}' section: {sorted(unknown)}")
    return cls(**section)


def get_model_config(config: Dict[str, Any]) -> ModelConfig:
    """
    Отримати конфігурацію моделі

    Parameters:
    -----------
    config : dict
        Конфігураційний словник

    Returns:
    --------
    model_config : ModelConfig
    """
    if 'model' not in config:
        raise ConfigError("No model section in config")

    model = dict(config['model'])
    au_ids = model.pop('au_ids', None)
    if not au_ids:
        raise ConfigError("model.au_ids must list at least one AU")

    n_au = model.pop('N_AU', None)
    if n_au is not None and n_au != len(au_ids):
        raise ConfigError(f"N_AU={n_au} does not match {len(au_ids)} listed AUs")

    backbone_keys = {f.name for f in fields(BackboneConfig)}
    msfl_keys = {f.name for f in fields(MsflConfig)}

    backbone = {k: model.pop(k) for k in list(model) if k in backbone_keys}
    msfl = {k: model.pop(k) for k in list(model) if k in msfl_keys}
    head = {}
    if 'head_hidden' in model:
        head['hidden'] = model.pop('head_hidden')
    dtype = model.pop('dtype', 'float32')

    # D дублюється у секції model
    D = model.pop('D', None)
    if model:
        raise ConfigError(f"Unknown keys in 'model' section: {sorted(model)}")

    sacl_section = dict(config.get('sacl', {}))
    if D is not None:
        sacl_section.setdefault('D', D)
        if sacl_section['D'] != D:
            raise ConfigError(f"model.D={D} disagrees with sacl.D={sacl_section['D']}")

    model_config = ModelConfig(
        au_ids=[int(a) for a in au_ids],
        backbone=_build(BackboneConfig, backbone, 'model'),
        msfl=_build(MsflConfig, msfl, 'model'),
        sacl=_build(SaclConfig, sacl_section, 'sacl'),
        geometry=_build(GeometryConfig, config.get('geometry'), 'geometry'),
        head=_build(HeadConfig, head, 'model'),
        dtype=dtype,
    )
    return model_config


def get_loss_config(config: Dict[str, Any]) -> LossConfig:
    """Отримати ваги та константи функції втрат"""
    return _build(LossConfig, config.get('loss'), 'loss')


def get_train_config(config: Dict[str, Any]) -> TrainConfig:
    """Отримати параметри оптимізатора та тренування"""
    if 'train' not in config:
        raise ConfigError("No train section in config")
    return _build(TrainConfig, config['train'], 'train')


def get_augment_config(config: Dict[str, Any]) -> AugmentConfig:
    """Отримати параметри аугментації"""
    return _build(AugmentConfig, config.get('augment'), 'augment')


def get_data_config(config: Dict[str, Any]) -> DataConfig:
    """Отримати параметри даних"""
    return _build(DataConfig, config.get('data'), 'data')


def get_synth_config(config: Dict[str, Any]) -> SynthConfig:
    """Отримати параметри синтетичного генератора"""
    return _build(SynthConfig, config.get('synth'), 'synth')


def create_output_paths(config: Dict[str, Any], out_dir: Optional[str] = None) -> Dict[str, Path]:
    """
    Створити вихідні директорії з конфігурації

    Parameters:
    -----------
    config : dict
        Конфігураційний словник
    out_dir : str, optional
        Перевизначення кореневої вихідної директорії (--out)

    Returns:
    --------
    paths : dict
        Словник з Path об'єктами
    """
    if 'paths' not in config and out_dir is None:
        raise ConfigError("No paths in config")

    root = Path(out_dir) if out_dir is not None else Path(config['paths'].get('output', './runs'))
    paths = {'output': root}
    for key, value in config.get('paths', {}).items():
        if key in ('output', 'dataset'):
            continue
        paths[key] = root / value

    for path in paths.values():
        path.mkdir(parents=True, exist_ok=True)

    return paths


def validate_config(config: Dict[str, Any]) -> bool:
    """
    Валідувати конфігурацію

    Parameters:
    -----------
    config : dict
        Конфігураційний словник

    Returns:
    --------
    valid : bool
        True якщо конфігурація валідна

    Raises:
    -------
    ConfigError: якщо конфігурація невалідна
    """
    # Імпорт тут, щоб уникнути циклу utils -> geometry -> utils
    from geometry.au_centers import N_LANDMARKS, unique_center_specs

    required_sections = ['model', 'sacl', 'geometry', 'loss', 'train']
    for section in required_sections:
        if section not in config:
            raise ConfigError(f"Missing required section: {section}")

    model = get_model_config(config)
    get_loss_config(config)
    get_train_config(config)

    bb = model.backbone
    if bb.H % 32 or bb.W % 32:
        raise ConfigError(f"H and W must be divisible by 32, got {bb.H}x{bb.W}")
    if bb.H != bb.W:
        raise ConfigError(f"Only square inputs are supported, got {bb.H}x{bb.W}")
    if len(bb.blocks_per_stage) != 4:
        raise ConfigError("blocks_per_stage must list four stages")
    if len(bb.lp_channels) != 3:
        raise ConfigError("lp_channels must list three LP blocks")
    if bb.N_land != N_LANDMARKS:
        raise ConfigError(f"N_land must be {N_LANDMARKS} for the AU center table, got {bb.N_land}")

    sacl = model.sacl
    if sacl.D != 15 * bb.d0:
        raise ConfigError(f"D must equal 15*d0 = {15 * bb.d0}, got {sacl.D}")
    if len(sacl.L) != sacl.S:
        raise ConfigError(f"L lists {len(sacl.L)} stages but S={sacl.S}")
    dims = sacl.resolved_stage_dims()
    if len(dims) != sacl.S or dims[-1] != sacl.D or min(dims) <= 0:
        raise ConfigError(f"Stage dims {dims} must have S={sacl.S} entries ending at D={sacl.D}")
    if sacl.metric not in ('euclidean', 'manhattan', 'cosine'):
        raise ConfigError(f"Unknown metric: {sacl.metric}")
    if sacl.graph_mode not in ('dynamic', 'facs', 'statistics'):
        raise ConfigError(f"Unknown graph_mode: {sacl.graph_mode}")
    if model.msfl.interpolation not in ('nearest', 'bilinear'):
        raise ConfigError(f"Unknown interpolation: {model.msfl.interpolation}")
    if any(s not in (1, 2, 3, 4) for s in model.msfl.drop_stages):
        raise ConfigError(f"drop_stages must be within 1..4, got {model.msfl.drop_stages}")

    geo = model.geometry
    if geo.roi_source not in ('predicted', 'ground_truth'):
        raise ConfigError(f"Unknown roi_source: {geo.roi_source}")
    if geo.index_base not in (0, 1):
        raise ConfigError(f"index_base must be 0 or 1, got {geo.index_base}")

    n_roi = 2 * len(unique_center_specs(model.au_ids))
    if geo.N_ROI is not None and geo.N_ROI != n_roi:
        raise ConfigError(
            f"N_ROI={geo.N_ROI} but AU set {model.au_ids} yields {n_roi} unique windows"
        )
    if sacl.K >= n_roi:
        raise ConfigError(f"K={sacl.K} must be smaller than N_ROI={n_roi}")

    return True
