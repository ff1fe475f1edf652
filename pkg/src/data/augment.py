"""
Training augmentation
Випадкове кадрування, горизонтальне віддзеркалення з перестановкою
лендмарків та колірний джитер (яскравість, контраст)
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from geometry.au_centers import N_LANDMARKS
from utils.config_loader import AugmentConfig
from utils.errors import ConfigError, DimensionError

logger = logging.getLogger(__name__)

# Пари ліво/право для 49-точкової схеми (1-based); точки середньої лінії
# (10-13, 16, 34, 40, 44, 47) відображаються самі в себе
FLIP_PAIRS: Tuple[Tuple[int, int], ...] = (
    # брови
    (49, 9), (1, 8), (2, 7), (3, 6), (4, 5),
    # низ носа
    (14, 18), (15, 17),
    # очі
    (19, 28), (20, 27), (21, 26), (22, 25), (23, 30), (24, 29),
    # зовнішній контур рота
    (31, 37), (32, 36), (33, 35), (38, 42), (39, 41),
    # внутрішній контур рота
    (43, 45), (46, 48),
)


def flip_permutation(pairs: Sequence[Tuple[int, int]] = FLIP_PAIRS,
                     n_landmarks: int = N_LANDMARKS) -> np.ndarray:
    """
    Перестановка рядків (0-based) для віддзеркаленого обличчя

    Returns:
    --------
    perm : np.ndarray (n_landmarks,)
        Після віддзеркалення рядок i бере точку perm[i]
    """
    perm = np.arange(n_landmarks)
    for a, b in pairs:
        if not (1 <= a <= n_landmarks and 1 <= b <= n_landmarks):
            raise ConfigError(f"Flip pair ({a}, {b}) outside 1..{n_landmarks}")
        perm[a - 1], perm[b - 1] = b - 1, a - 1
    return perm


def resolve_permutation(cfg: AugmentConfig, n_landmarks: int = N_LANDMARKS) -> np.ndarray:
    """
    Перестановка з конфігурації або таблиця за замовчуванням

    `augment.flip_permutation` перелічує для кожної точки 1..n номер її
    дзеркальної пари (1-based). Має бути інволюцією.
    """
    if cfg.flip_permutation is None:
        return flip_permutation(n_landmarks=n_landmarks)

    perm = np.asarray(cfg.flip_permutation, dtype=np.int64) - 1
    if perm.shape != (n_landmarks,) or sorted(perm.tolist()) != list(range(n_landmarks)):
        raise ConfigError(f"flip_permutation must be a permutation of 1..{n_landmarks}")
    if not np.array_equal(perm[perm], np.arange(n_landmarks)):
        raise ConfigError("flip_permutation must map every left/right pair both ways")
    return perm


def crop_image(image: np.ndarray, landmarks: np.ndarray, top: int, left: int,
               size: int) -> Tuple[np.ndarray, np.ndarray]:
    """Вирізати квадрат size x size з (top, left); лендмарки зсуваються"""
    h, w = image.shape[:2]
    if top < 0 or left < 0 or top + size > h or left + size > w:
        raise DimensionError(f"Crop ({top}, {left}) of size {size} leaves the {h}x{w} image")
    cropped = image[top:top + size, left:left + size]
    return cropped, landmarks - np.array([left, top], dtype=landmarks.dtype)


def center_crop(image: np.ndarray, landmarks: np.ndarray, size: int) -> Tuple[np.ndarray, np.ndarray]:
    h, w = image.shape[:2]
    return crop_image(image, landmarks, (h - size) // 2, (w - size) // 2, size)


def flip_sample(image: np.ndarray, landmarks: np.ndarray,
                permutation: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Горизонтальне віддзеркалення

    x' = W - 1 - x (центри пікселів на цілих координатах), потім
    перестановка ліво/право. Двічі застосоване дає вихідний зразок.
    """
    w = image.shape[1]
    flipped = image[:, ::-1]
    mirrored = landmarks.copy()
    mirrored[:, 0] = (w - 1) - mirrored[:, 0]
    return flipped, mirrored[permutation]


def color_jitter(image: np.ndarray, brightness: float, contrast: float) -> np.ndarray:
    """Множник яскравості, потім контраст навколо середнього; результат у [0, 1]"""
    out = image * brightness
    mean = out.mean()
    out = (out - mean) * contrast + mean
    return np.clip(out, 0.0, 1.0).astype(image.dtype)


def augment_sample(image: np.ndarray, landmarks: np.ndarray, rng: np.random.Generator,
                   cfg: AugmentConfig, input_size: int,
                   permutation: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Аугментувати вирівняний зразок

    Parameters:
    -----------
    image : np.ndarray (A, A, 3) float у [0, 1]
    landmarks : np.ndarray (N_land, 2)
    rng : np.random.Generator
        Окремий генератор зразка; результат - чиста функція (зразок, стан rng)
    cfg : AugmentConfig
    input_size : int
        Сторона кадру (H = W)

    Returns:
    --------
    image : np.ndarray (input_size, input_size, 3)
    landmarks : np.ndarray (N_land, 2)
    """
    if not cfg.enabled:
        return center_crop(image, landmarks, input_size)

    h, w = image.shape[:2]
    if cfg.random_crop:
        top = int(rng.integers(0, h - input_size + 1))
        left = int(rng.integers(0, w - input_size + 1))
        image, landmarks = crop_image(image, landmarks, top, left, input_size)
    else:
        image, landmarks = center_crop(image, landmarks, input_size)

    if cfg.flip_prob > 0 and rng.random() < cfg.flip_prob:
        if permutation is None:
            permutation = resolve_permutation(cfg, landmarks.shape[0])
        image, landmarks = flip_sample(image, landmarks, permutation)

    if cfg.brightness > 0 or cfg.contrast > 0:
        b = rng.uniform(1.0 - cfg.brightness, 1.0 + cfg.brightness)
        c = rng.uniform(1.0 - cfg.contrast, 1.0 + cfg.contrast)
        image = color_jitter(image, b, c)

    return np.ascontiguousarray(image), landmarks
