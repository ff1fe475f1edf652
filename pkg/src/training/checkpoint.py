"""
Checkpoint I/O
Збереження та відновлення стану тренування у .npz

Ключі архіву:
  format_version      int
  model/<name>        параметри та буфери моделі
  momentum/<name>     буфери моменту SGD
  meta                JSON: крок, епоха, найкраща метрика, стан rng, конфігурація
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from autodiff import Module

from .optimizer import SGD

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def _little_endian(array: np.ndarray) -> np.ndarray:
    array = np.asarray(array)
    return array.astype(array.dtype.newbyteorder('<'), copy=False)


def save_checkpoint(path, model: Module, optimizer: Optional[SGD] = None,
                    meta: Optional[Dict[str, Any]] = None) -> Path:
    """
    Записати стан моделі, моменту та метадані

    Parameters:
    -----------
    path : str or Path
    model : Module
    optimizer : SGD, optional
    meta : dict, optional
        JSON-серіалізовні значення (step, epoch, best_metric, rng_state, ...)
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    arrays = {'format_version': np.array(FORMAT_VERSION, dtype='<i8')}
    for name, value in model.state_dict().items():
        arrays[f"model/{name}"] = _little_endian(value)
    meta = dict(meta or {})
    if optimizer is not None:
        for name, buf in optimizer.state_dict().items():
            arrays[f"momentum/{name}"] = _little_endian(buf)
        meta['optimizer_steps'] = optimizer.step_count
    arrays['meta'] = np.array(json.dumps(meta, sort_keys=True))

    with open(path, 'wb') as f:
        np.savez(f, **arrays)
    logger.debug(f"Checkpoint saved: {path}")
    return path


def load_checkpoint(path, model: Module, optimizer: Optional[SGD] = None) -> Dict[str, Any]:
    """
    Відновити модель (та момент) з архіву

    Returns:
    --------
    meta : dict
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found: {path}")

    with np.load(path, allow_pickle=False) as archive:
        version = int(archive['format_version'])
        if version != FORMAT_VERSION:
            raise ValueError(f"Unsupported checkpoint format {version} in {path}")
        model_state = {k[len('model/'):]: archive[k] for k in archive.files if k.startswith('model/')}
        momentum = {k[len('momentum/'):]: archive[k] for k in archive.files
                    if k.startswith('momentum/')}
        meta = json.loads(str(archive['meta']))

    model.load_state_dict(model_state, strict=True)
    if optimizer is not None:
        optimizer.load_state_dict(momentum, step_count=int(meta.get('optimizer_steps', 0)))

    logger.info(f"Checkpoint loaded: {path} (step {meta.get('step', '?')})")
    return meta
