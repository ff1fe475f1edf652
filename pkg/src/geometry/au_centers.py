"""
AU center geometry
Обчислення центрів AU з 49 лендмарків та міжочної відстані

Номери лендмарків у таблиці нижче - 1-based (рядок масиву = номер - index_base).
Усі зміщення виражені в одиницях `scale` (відстань між внутрішніми кутиками очей).
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from utils.errors import DegenerateScaleError, DimensionError

logger = logging.getLogger(__name__)

N_LANDMARKS = 49

# Зміщення по y у частках scale (x не змінюється)
OFFSET_RULES: Dict[str, float] = {
    'y-scale/2': -1.0 / 2.0,
    'y-scale/3': -1.0 / 3.0,
    'y+scale/3': 1.0 / 3.0,
    'y+scale': 1.0,
    'identity': 0.0,
    'y+scale/2': 1.0 / 2.0,
}


@dataclass(frozen=True)
class AUCenterSpec:
    """Рядок таблиці центрів: AU, опис, пара лендмарків, правило зміщення"""
    au_id: int
    description: str
    landmarks: Tuple[int, int]
    rule: str

    @property
    def key(self) -> Tuple[Tuple[int, int], str]:
        return self.landmarks, self.rule


AU_CENTER_SPECS: Dict[int, AUCenterSpec] = {
    1: AUCenterSpec(1, "Inner brow raiser", (4, 5), 'y-scale/2'),
    2: AUCenterSpec(2, "Outer brow raiser", (1, 8), 'y-scale/3'),
    4: AUCenterSpec(4, "Brow lowerer", (2, 7), 'y+scale/3'),
    6: AUCenterSpec(6, "Cheek raiser", (24, 29), 'y+scale'),
    7: AUCenterSpec(7, "Lid tightener", (21, 26), 'identity'),
    9: AUCenterSpec(9, "Nose wrinkler", (15, 17), 'y-scale/2'),
    10: AUCenterSpec(10, "Upper lip raiser", (43, 45), 'identity'),
    12: AUCenterSpec(12, "Lip corner puller", (31, 37), 'identity'),
    14: AUCenterSpec(14, "Dimpler", (31, 37), 'identity'),
    15: AUCenterSpec(15, "Lip corner depressor", (31, 37), 'identity'),
    17: AUCenterSpec(17, "Chin raiser", (39, 41), 'y+scale/2'),
    23: AUCenterSpec(23, "Lip tightener", (34, 40), 'identity'),
    24: AUCenterSpec(24, "Lip pressor", (34, 40), 'identity'),
    25: AUCenterSpec(25, "Lips part", (34, 40), 'identity'),
    26: AUCenterSpec(26, "Jaw drop", (39, 41), 'y+scale/2'),
}

DATASET_AU_IDS: Dict[str, List[int]] = {
    'bp4d': [1, 2, 4, 6, 7, 10, 12, 14, 15, 17, 23, 24],
    'disfa': [1, 2, 4, 6, 9, 12, 25, 26],
}

DEFAULT_INNER_EYE_CORNERS = (22, 25)


@dataclass(frozen=True)
class CenterDefinition:
    """Унікальне визначення центру, спільне для кількох AU"""
    landmarks: Tuple[int, int]
    rule: str
    au_ids: Tuple[int, ...]

    def labels(self) -> List[str]:
        aus = "/".join(str(a) for a in self.au_ids)
        return [f"AU{aus}@{lm}" for lm in self.landmarks]


def get_spec(au_id: int) -> AUCenterSpec:
    if au_id not in AU_CENTER_SPECS:
        raise ValueError(f"No AU center definition for AU{au_id}; known: {sorted(AU_CENTER_SPECS)}")
    return AU_CENTER_SPECS[au_id]


def unique_center_specs(au_ids: Sequence[int]) -> List[CenterDefinition]:
    """
    Дедуплікувати визначення центрів у порядку AU

    Кілька AU з однаковою парою лендмарків та правилом (напр. 12/14/15)
    дають одне визначення; кожне визначення дає два вікна ROI.
    """
    order: List[Tuple[Tuple[int, int], str]] = []
    owners: Dict[Tuple[Tuple[int, int], str], List[int]] = {}
    for au in au_ids:
        spec = get_spec(int(au))
        if spec.key not in owners:
            owners[spec.key] = []
            order.append(spec.key)
        owners[spec.key].append(spec.au_id)
    return [CenterDefinition(landmarks=k[0], rule=k[1], au_ids=tuple(owners[k])) for k in order]


def num_rois(au_ids: Sequence[int]) -> int:
    return 2 * len(unique_center_specs(au_ids))


def node_owners(au_ids: Sequence[int]) -> List[Tuple[int, ...]]:
    """AU, до яких належить кожен вузол графа (два вузли на визначення центру)"""
    owners: List[Tuple[int, ...]] = []
    for definition in unique_center_specs(au_ids):
        owners.extend([definition.au_ids] * 2)
    return owners


def center_labels(au_ids: Sequence[int]) -> List[str]:
    """Мітки вузлів графа в канонічному порядку центрів, напр. 'AU12/14/15@31'"""
    labels = []
    for definition in unique_center_specs(au_ids):
        labels.extend(definition.labels())
    return labels


def _rows(numbers: Sequence[int], index_base: int) -> np.ndarray:
    rows = np.asarray(numbers, dtype=np.int64) - index_base
    if rows.min() < 0 or rows.max() >= N_LANDMARKS:
        raise ValueError(
            f"Landmark numbers {list(numbers)} out of range for index_base={index_base}"
        )
    return rows


def _check_landmarks(landmarks: np.ndarray) -> np.ndarray:
    landmarks = np.asarray(landmarks, dtype=np.float64)
    if landmarks.shape[-2:] != (N_LANDMARKS, 2):
        raise DimensionError(f"Expected (..., {N_LANDMARKS}, 2) landmarks, got {landmarks.shape}")
    if not np.all(np.isfinite(landmarks)):
        raise ValueError("Landmark coordinates must be finite")
    return landmarks


def interocular_scale(landmarks: np.ndarray,
                      inner_eye_corners: Sequence[int] = DEFAULT_INNER_EYE_CORNERS,
                      index_base: int = 1) -> np.ndarray:
    """
    Відстань між внутрішніми кутиками очей

    Parameters:
    -----------
    landmarks : np.ndarray
        (49, 2) або (B, 49, 2) у пікселях
    inner_eye_corners : pair of int
        Номери двох лендмарків

    Returns:
    --------
    scale : float або np.ndarray (B,)

    Raises:
    -------
    DegenerateScaleError: якщо точки збігаються
    """
    landmarks = _check_landmarks(landmarks)
    a, b = _rows(inner_eye_corners, index_base)
    scale = np.linalg.norm(landmarks[..., a, :] - landmarks[..., b, :], axis=-1)
    if np.any(scale <= 0):
        logger.error(f"Inner eye corners {tuple(inner_eye_corners)} coincide")
        raise DegenerateScaleError(
            f"Inner eye corners {tuple(inner_eye_corners)} coincide: inter-ocular distance is 0"
        )
    return scale if scale.ndim else float(scale)


def compute_au_centers(landmarks: np.ndarray, au_ids: Sequence[int],
                       inner_eye_corners: Sequence[int] = DEFAULT_INNER_EYE_CORNERS,
                       index_base: int = 1) -> np.ndarray:
    """
    Центри AU за таблицею визначень

    Два центри на кожне унікальне визначення (по одному на лендмарк),
    у порядку AU зі спільними визначеннями, виданими один раз.

    Parameters:
    -----------
    landmarks : np.ndarray
        (49, 2) або (B, 49, 2) у пікселях
    au_ids : list of int

    Returns:
    --------
    centers : np.ndarray
        (N_ROI, 2) або (B, N_ROI, 2), координати (x, y) у пікселях
    """
    landmarks = _check_landmarks(landmarks)
    scale = np.asarray(interocular_scale(landmarks, inner_eye_corners, index_base))

    centers = []
    for definition in unique_center_specs(au_ids):
        offset = OFFSET_RULES[definition.rule]
        for row in _rows(definition.landmarks, index_base):
            point = landmarks[..., row, :].copy()
            point[..., 1] = point[..., 1] + offset * scale
            centers.append(point)
    return np.stack(centers, axis=-2)
