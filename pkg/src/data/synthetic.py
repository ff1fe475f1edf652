"""
Synthetic face generator
Генератор процедурних облич з 49 лендмарками та мітками AU

Кожна AU детерміновано зсуває свої лендмарки (у частках міжочної відстані),
тому мітка видима на зображенні та в координатах.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml
from skimage import draw, io

from geometry.au_centers import N_LANDMARKS
from utils.config_loader import SynthConfig

from .augment import FLIP_PAIRS
from .dataset import FaceDataset, labels_frame, landmarks_frame

logger = logging.getLogger(__name__)

# Канонічне обличчя у нормованих координатах (x вправо, y вниз), номери 1-based.
# Брови: 49,1..4 ліва (зовнішня -> внутрішня), 5..9 права (внутрішня -> зовнішня)
# Ніс: спинка 10..13, низ 14..18
# Ліве око: 19 зовн., 20/21 верх, 22 внутр., 23/24 низ; праве: 25 внутр., 26/27 верх, 28 зовн., 29/30 низ
# Рот: 31..42 зовнішній контур (31 лівий кут, 34 верх центр, 37 правий кут, 40 низ центр),
#      43..48 внутрішній (44 верх центр, 47 низ центр)
TEMPLATE: Dict[int, Tuple[float, float]] = {
    49: (0.22, 0.31), 1: (0.27, 0.29), 2: (0.32, 0.28), 3: (0.37, 0.29), 4: (0.42, 0.30),
    5: (0.58, 0.30), 6: (0.63, 0.29), 7: (0.68, 0.28), 8: (0.73, 0.29), 9: (0.78, 0.31),
    10: (0.50, 0.42), 11: (0.50, 0.47), 12: (0.50, 0.52), 13: (0.50, 0.57),
    14: (0.44, 0.61), 15: (0.47, 0.625), 16: (0.50, 0.635), 17: (0.53, 0.625), 18: (0.56, 0.61),
    19: (0.26, 0.40), 20: (0.30, 0.375), 21: (0.36, 0.375), 22: (0.40, 0.40),
    23: (0.36, 0.425), 24: (0.30, 0.425),
    25: (0.60, 0.40), 26: (0.64, 0.375), 27: (0.70, 0.375), 28: (0.74, 0.40),
    29: (0.70, 0.425), 30: (0.64, 0.425),
    31: (0.38, 0.75), 32: (0.42, 0.725), 33: (0.46, 0.715), 34: (0.50, 0.72),
    35: (0.54, 0.715), 36: (0.58, 0.725), 37: (0.62, 0.75), 38: (0.58, 0.78),
    39: (0.54, 0.795), 40: (0.50, 0.80), 41: (0.46, 0.795), 42: (0.42, 0.78),
    43: (0.45, 0.74), 44: (0.50, 0.742), 45: (0.55, 0.74),
    46: (0.55, 0.755), 47: (0.50, 0.76), 48: (0.45, 0.755),
}

SYNTH_FOLDS = 3

FACE_CENTER = (0.50, 0.55)
FACE_RADII = (0.36, 0.44)

# Зсуви (dx, dy) у частках міжочної відстані для точок лівої половини та середньої лінії;
# праві дзеркальні точки отримують (-dx, dy)
AU_EFFECTS: Dict[int, Dict[int, Tuple[float, float]]] = {
    1: {3: (0.0, -0.35), 4: (0.0, -0.5)},
    2: {49: (0.0, -0.5), 1: (0.0, -0.4)},
    4: {49: (0.0, 0.15), 1: (0.0, 0.2), 2: (0.0, 0.25), 3: (0.05, 0.3), 4: (0.1, 0.3)},
    6: {23: (0.0, -0.12), 24: (0.0, -0.12), 31: (0.0, -0.08)},
    7: {20: (0.0, 0.08), 21: (0.0, 0.08), 23: (0.0, -0.08), 24: (0.0, -0.08)},
    9: {14: (0.0, -0.15), 15: (0.0, -0.15), 16: (0.0, -0.12), 4: (0.0, 0.1)},
    10: {32: (0.0, -0.15), 33: (0.0, -0.18), 34: (0.0, -0.18), 43: (0.0, -0.18), 44: (0.0, -0.18)},
    12: {31: (-0.25, -0.2), 32: (-0.08, -0.08), 42: (-0.08, -0.05)},
    14: {31: (-0.15, 0.0)},
    15: {31: (0.0, 0.22), 42: (0.0, 0.06)},
    17: {40: (0.0, -0.12), 41: (0.0, -0.12), 42: (0.0, -0.08), 47: (0.0, -0.1), 48: (0.0, -0.1)},
    23: {31: (0.08, 0.0), 33: (0.0, 0.05), 34: (0.0, 0.05), 41: (0.0, -0.05), 40: (0.0, -0.05)},
    24: {33: (0.0, 0.06), 34: (0.0, 0.06), 41: (0.0, -0.06), 40: (0.0, -0.06),
         43: (0.0, 0.03), 44: (0.0, 0.03), 48: (0.0, -0.03), 47: (0.0, -0.03)},
    25: {42: (0.0, 0.12), 41: (0.0, 0.15), 40: (0.0, 0.15), 48: (0.0, 0.18), 47: (0.0, 0.2)},
    26: {42: (0.0, 0.3), 41: (0.0, 0.35), 40: (0.0, 0.35), 48: (0.0, 0.35), 47: (0.0, 0.38),
         31: (0.0, 0.08)},
}

_MIRROR = {a: b for a, b in FLIP_PAIRS}
_MIRROR.update({b: a for a, b in FLIP_PAIRS})


def template_landmarks(size: float) -> np.ndarray:
    """Канонічні лендмарки (49, 2) у пікселях для сторони `size`"""
    points = np.array([TEMPLATE[n] for n in range(1, N_LANDMARKS + 1)], dtype=np.float64)
    return points * size


def template_interocular(size: float) -> float:
    return float((TEMPLATE[25][0] - TEMPLATE[22][0]) * size)


def sample_labels(n: int, rates: Sequence[float], rng: np.random.Generator) -> np.ndarray:
    """Незалежні мітки Бернуллі (n, N_AU) з заданими частотами"""
    rates = np.asarray(rates, dtype=np.float64)
    if np.any(rates < 0) or np.any(rates > 1):
        raise ValueError(f"Occurrence rates must lie in [0, 1], got {rates.tolist()}")
    return (rng.random((n, rates.size)) < rates).astype(np.int64)


def apply_au_effects(landmarks: np.ndarray, labels: Sequence[int], au_ids: Sequence[int],
                     magnitude: float, interocular: float) -> np.ndarray:
    """
    Зсунути лендмарки для активних AU

    Parameters:
    -----------
    landmarks : np.ndarray (49, 2), рядок = номер - 1
    labels : {0, 1} для кожної AU з au_ids
    """
    out = landmarks.copy()
    unit = magnitude * interocular
    for au, active in zip(au_ids, labels):
        if not active:
            continue
        for number, (dx, dy) in AU_EFFECTS.get(int(au), {}).items():
            out[number - 1] += (dx * unit, dy * unit)
            mirror = _MIRROR.get(number, number)
            if mirror != number:
                out[mirror - 1] += (-dx * unit, dy * unit)
    return out


def similarity_matrix(angle_deg: float, scale: float, shift: Tuple[float, float],
                      center: Tuple[float, float]) -> np.ndarray:
    """3x3 подібність навколо center: обертання, масштаб, зсув"""
    theta = np.deg2rad(angle_deg)
    c, s = scale * np.cos(theta), scale * np.sin(theta)
    cx, cy = center
    return np.array([
        [c, -s, cx - c * cx + s * cy + shift[0]],
        [s, c, cy - s * cx - c * cy + shift[1]],
        [0.0, 0.0, 1.0],
    ])


def transform_points(matrix: np.ndarray, points: np.ndarray) -> np.ndarray:
    homo = np.concatenate([points, np.ones((len(points), 1))], axis=1)
    return (homo @ matrix.T)[:, :2]


def _thick_polyline(points: np.ndarray, half_width: float) -> Tuple[np.ndarray, np.ndarray]:
    """Полігон (rows, cols) навколо ламаної заданої товщини"""
    upper = points + np.array([0.0, -half_width])
    lower = points[::-1] + np.array([0.0, half_width])
    poly = np.concatenate([upper, lower])
    return poly[:, 1], poly[:, 0]


def render_face(landmarks: np.ndarray, size: int, skin: np.ndarray, background: np.ndarray,
                face_matrix: np.ndarray, rng: np.random.Generator, noise: float) -> np.ndarray:
    """
    Намалювати обличчя за лендмарками (skimage.draw)

    Returns:
    --------
    image : np.ndarray (size, size, 3) float32 у [0, 1]
    """
    shape = (size, size)
    image = np.ones((size, size, 3), dtype=np.float64) * background

    # Овал обличчя трансформується тією ж подібністю, що й лендмарки
    center = transform_points(face_matrix, np.array([FACE_CENTER]) * size)[0]
    scale = np.hypot(face_matrix[0, 0], face_matrix[1, 0])
    angle = np.arctan2(face_matrix[1, 0], face_matrix[0, 0])
    rr, cc = draw.ellipse(center[1], center[0], FACE_RADII[1] * size * scale,
                          FACE_RADII[0] * size * scale, shape=shape, rotation=-angle)
    image[rr, cc] = skin

    lm = lambda numbers: landmarks[[n - 1 for n in numbers]]  # noqa: E731
    line_w = max(0.6, 0.012 * size * scale)
    dark = skin * 0.35
    lip = np.array([0.75, 0.3, 0.3])

    # Брови
    for numbers in ([49, 1, 2, 3, 4], [5, 6, 7, 8, 9]):
        rr, cc = draw.polygon(*_thick_polyline(lm(numbers), line_w), shape=shape)
        image[rr, cc] = dark

    # Очі та зіниці
    for numbers in ([19, 20, 21, 22, 23, 24], [25, 26, 27, 28, 29, 30]):
        pts = lm(numbers)
        rr, cc = draw.polygon(pts[:, 1], pts[:, 0], shape=shape)
        image[rr, cc] = (0.95, 0.95, 0.95)
        eye_c = pts.mean(axis=0)
        radius = max(0.5, 0.35 * np.ptp(pts[:, 1]))
        rr, cc = draw.disk((eye_c[1], eye_c[0]), radius, shape=shape)
        image[rr, cc] = (0.1, 0.1, 0.15)

    # Ніс
    rr, cc = draw.polygon(*_thick_polyline(lm([10, 11, 12, 13]), line_w * 0.5), shape=shape)
    image[rr, cc] = skin * 0.7
    rr, cc = draw.polygon(*_thick_polyline(lm([14, 15, 16, 17, 18]), line_w * 0.7), shape=shape)
    image[rr, cc] = skin * 0.55

    # Рот: губи, потім отвір
    outer = lm(range(31, 43))
    rr, cc = draw.polygon(outer[:, 1], outer[:, 0], shape=shape)
    image[rr, cc] = lip
    inner = lm(range(43, 49))
    rr, cc = draw.polygon(inner[:, 1], inner[:, 0], shape=shape)
    image[rr, cc] = (0.15, 0.05, 0.05)

    if noise > 0:
        image = image + rng.normal(0.0, noise, size=image.shape)
    return np.clip(image, 0.0, 1.0).astype(np.float32)


class SyntheticFaceGenerator:
    """
    Генератор синтетичного датасету AU

    Детермінований для фіксованого seed: мітки, параметри суб'єктів,
    джитер та шум виводяться з окремих потоків np.random.Generator.
    """

    def __init__(self, cfg: SynthConfig, au_ids: Sequence[int], seed: int = 0):
        """
        Parameters:
        -----------
        cfg : SynthConfig
            Розмір зображення, кількість суб'єктів, частоти AU, джитер
        au_ids : list of int
            AU, що генеруються (порядок = порядок колонок міток)
        seed : int
        """
        self.cfg = cfg
        self.au_ids = [int(a) for a in au_ids]
        self.seed = int(seed)
        rates = cfg.occurrence_rates if cfg.occurrence_rates is not None else [0.5] * len(self.au_ids)
        if len(rates) != len(self.au_ids):
            raise ValueError(f"{len(rates)} occurrence rates given for {len(self.au_ids)} AUs")
        self.rates = list(rates)

        logger.info("Synthetic face generator initialized")
        logger.info(f"  AUs: {self.au_ids}")
        logger.info(f"  Occurrence rates: {self.rates}")
        logger.info(f"  Image size: {cfg.image_size}, subjects: {cfg.n_subjects}, seed: {seed}")

    def _subject(self, index: int) -> Dict:
        """Форма та кольори суб'єкта (симетрична варіація шаблону)"""
        rng = np.random.default_rng([self.seed, 0, index])
        v = self.cfg.subject_variation
        return {
            'eye_spread': 1.0 + rng.uniform(-v, v),
            'mouth_drop': rng.uniform(-v, v),
            'skin': np.clip(np.array([0.85, 0.7, 0.6]) + rng.uniform(-0.1, 0.1, 3), 0, 1),
            'background': np.clip(np.array([0.2, 0.25, 0.3]) + rng.uniform(-0.1, 0.1, 3), 0, 1),
        }

    def face_landmarks(self, labels: Sequence[int], subject: Dict) -> np.ndarray:
        """Лендмарки без джитера: шаблон суб'єкта + зсуви активних AU"""
        size = self.cfg.image_size
        points = template_landmarks(size)
        midline = 0.5 * size
        points[:, 0] = midline + (points[:, 0] - midline) * subject['eye_spread']
        points[30:48, 1] += subject['mouth_drop'] * size
        interocular = template_interocular(size) * subject['eye_spread']
        return apply_au_effects(points, labels, self.au_ids, self.cfg.au_magnitude, interocular)

    def _jitter_matrix(self, rng: np.random.Generator) -> np.ndarray:
        cfg = self.cfg
        size = cfg.image_size
        angle = rng.uniform(-cfg.rotation_jitter, cfg.rotation_jitter) if cfg.rotation_jitter else 0.0
        scale = 1.0 + (rng.uniform(-cfg.scale_jitter, cfg.scale_jitter) if cfg.scale_jitter else 0.0)
        shift = rng.uniform(-cfg.shift_jitter, cfg.shift_jitter, 2) * size if cfg.shift_jitter \
            else np.zeros(2)
        return similarity_matrix(angle, scale, tuple(shift), (size / 2.0, size / 2.0))

    def render(self, labels: Sequence[int], subject_index: int, rng: np.random.Generator,
               matrix: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Одне обличчя: (image, landmarks) після подібності `matrix`"""
        subject = self._subject(subject_index)
        if matrix is None:
            matrix = self._jitter_matrix(rng)
        landmarks = transform_points(matrix, self.face_landmarks(labels, subject))
        image = render_face(landmarks, self.cfg.image_size, subject['skin'],
                            subject['background'], matrix, rng, self.cfg.noise)
        return image, landmarks

    def generate(self, n: Optional[int] = None) -> FaceDataset:
        """
        Згенерувати n облич

        Суб'єкти призначаються по колу: зразок i -> суб'єкт i mod n_subjects,
        суб'єкт s -> фолд (s mod 3) + 1.
        """
        n = int(n if n is not None else self.cfg.n)
        logger.info(f"Generating {n} synthetic faces...")
        labels = sample_labels(n, self.rates, np.random.default_rng([self.seed, 1]))

        size = self.cfg.image_size
        images = np.empty((n, size, size, 3), dtype=np.float32)
        landmarks = np.empty((n, N_LANDMARKS, 2), dtype=np.float64)
        subjects: List[str] = []
        folds = np.empty(n, dtype=np.int64)
        for i in range(n):
            subject_index = i % self.cfg.n_subjects
            rng = np.random.default_rng([self.seed, 2, i])
            images[i], landmarks[i] = self.render(labels[i], subject_index, rng)
            subjects.append(f"S{subject_index + 1:03d}")
            folds[i] = subject_index % SYNTH_FOLDS + 1

        empirical = labels.mean(axis=0) if n else np.zeros(len(self.au_ids))
        logger.info(f"Generated {n} faces, empirical AU rates {np.round(empirical, 3).tolist()}")
        return FaceDataset(
            image_ids=[f"img{i:05d}" for i in range(n)],
            subject_ids=subjects,
            images=images,
            landmarks=landmarks,
            labels=labels,
            au_ids=list(self.au_ids),
            folds=folds if self.cfg.n_subjects >= SYNTH_FOLDS else None,
            meta={'name': 'synthetic'},
        )

    def save(self, dataset: FaceDataset, root) -> Path:
        """
        Записати датасет у форматі маніфесту

        root/
          images/<image_id>.png
          labels.csv      image_id,subject_id,au<ID>...
          landmarks.csv   image_id,x1,y1,...,x49,y49
          manifest.yaml
        """
        root = Path(root)
        image_dir = root / "images"
        image_dir.mkdir(parents=True, exist_ok=True)

        for image_id, image in zip(dataset.image_ids, dataset.images):
            io.imsave(image_dir / f"{image_id}.png",
                      np.round(image * 255.0).astype(np.uint8), check_contrast=False)

        labels_frame(dataset).to_csv(root / "labels.csv", index=False)
        landmarks_frame(dataset).to_csv(root / "landmarks.csv", index=False, float_format='%.4f')

        manifest = {
            'name': 'synthetic',
            'au_ids': list(dataset.au_ids),
            'images': 'images',
            'labels': 'labels.csv',
            'landmarks': 'landmarks.csv',
            'image_size': int(self.cfg.image_size),
            'n': len(dataset),
            'seed': self.seed,
            'occurrence_rates': [float(r) for r in self.rates],
        }
        with open(root / "manifest.yaml", 'w', encoding='utf-8') as f:
            yaml.safe_dump(manifest, f, sort_keys=False)

        logger.info(f"Saved {len(dataset)} samples to {root}")
        return root


def synth_generate(n: int, cfg: SynthConfig, au_ids: Sequence[int], seed: int = 0) -> FaceDataset:
    """Згенерувати датасет у пам'яті"""
    return SyntheticFaceGenerator(cfg, au_ids, seed).generate(n)
