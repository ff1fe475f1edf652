"""
Dataset manifest, alignment and folds
Завантаження датасету за маніфестом, вирівнювання подібністю,
розбиття на фолди без перетину суб'єктів
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import yaml
from skimage import color, io, util
from skimage.transform import SimilarityTransform, warp
from sklearn.model_selection import GroupKFold

from geometry.au_centers import N_LANDMARKS
from utils.config_loader import DataConfig
from utils.errors import DimensionError, ManifestError

logger = logging.getLogger(__name__)

# Subject-exclusive 3-fold таблиці (fold -> суб'єкти)
FOLD_TABLES: Dict[str, Dict[int, List[str]]] = {
    'bp4d': {
        1: ['F001', 'F002', 'F008', 'F009', 'F010', 'F016', 'F018', 'F023',
            'M001', 'M004', 'M007', 'M008', 'M012', 'M014'],
        2: ['F003', 'F005', 'F011', 'F013', 'F020', 'F022',
            'M002', 'M005', 'M010', 'M011', 'M013', 'M016', 'M017', 'M018'],
        3: ['F004', 'F006', 'F007', 'F012', 'F014', 'F015', 'F017', 'F019', 'F021',
            'M003', 'M006', 'M009', 'M015'],
    },
    'disfa': {
        1: ['SN001', 'SN002', 'SN009', 'SN010', 'SN016', 'SN026', 'SN027', 'SN030', 'SN032'],
        2: ['SN006', 'SN011', 'SN012', 'SN013', 'SN018', 'SN021', 'SN024', 'SN028', 'SN031'],
        3: ['SN003', 'SN004', 'SN005', 'SN007', 'SN008', 'SN017', 'SN023', 'SN025', 'SN029'],
    },
}

# Якорі вирівнювання (частки сторони): центри лівого ока (19-24),
# правого ока (25-30) та зовнішнього контуру рота (31-42) канонічного обличчя
ANCHOR_GROUPS: Tuple[Tuple[int, ...], ...] = (
    tuple(range(19, 25)),
    tuple(range(25, 31)),
    tuple(range(31, 43)),
)
CANONICAL_ANCHORS = np.array([
    [0.33, 0.40],
    [0.67, 0.40],
    [0.50, 0.7541666666666667],
])


@dataclass
class FaceDataset:
    """
    Набір облич у пам'яті

    Attributes:
    -----------
    image_ids, subject_ids : list of str
    images : np.ndarray (M, A, A, 3) float32 у [0, 1]
    landmarks : np.ndarray (M, 49, 2) пікселі зображення
    labels : np.ndarray (M, N_AU) з {0, 1}
    au_ids : list of int
    folds : np.ndarray (M,) або None
    """
    image_ids: List[str]
    subject_ids: List[str]
    images: np.ndarray
    landmarks: np.ndarray
    labels: np.ndarray
    au_ids: List[int]
    folds: Optional[np.ndarray] = None
    meta: Dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.image_ids)

    def subset(self, indices: Sequence[int]) -> 'FaceDataset':
        idx = np.asarray(indices, dtype=np.int64)
        return FaceDataset(
            image_ids=[self.image_ids[i] for i in idx],
            subject_ids=[self.subject_ids[i] for i in idx],
            images=self.images[idx],
            landmarks=self.landmarks[idx],
            labels=self.labels[idx],
            au_ids=list(self.au_ids),
            folds=None if self.folds is None else self.folds[idx],
            meta=dict(self.meta),
        )


def au_column(au_id: int) -> str:
    return f"au{int(au_id)}"


def landmark_columns(n_landmarks: int = N_LANDMARKS) -> List[str]:
    cols = []
    for i in range(1, n_landmarks + 1):
        cols.extend([f"x{i}", f"y{i}"])
    return cols


def labels_frame(dataset: FaceDataset) -> pd.DataFrame:
    """image_id,subject_id,au<ID>... (+ fold, якщо призначено)"""
    df = pd.DataFrame({'image_id': dataset.image_ids, 'subject_id': dataset.subject_ids})
    for j, au in enumerate(dataset.au_ids):
        df[au_column(au)] = dataset.labels[:, j].astype(np.int64)
    if dataset.folds is not None:
        df['fold'] = dataset.folds.astype(np.int64)
    return df


def landmarks_frame(dataset: FaceDataset) -> pd.DataFrame:
    """image_id,x1,y1,...,x49,y49"""
    n = dataset.landmarks.shape[1]
    flat = dataset.landmarks.reshape(len(dataset), 2 * n)
    df = pd.DataFrame(flat, columns=landmark_columns(n))
    df.insert(0, 'image_id', dataset.image_ids)
    return df


def anchor_points(landmarks: np.ndarray) -> np.ndarray:
    """Центри груп якорів (3, 2) для лендмарків (49, 2)"""
    return np.stack([landmarks[[n - 1 for n in group]].mean(axis=0) for group in ANCHOR_GROUPS])


def align_face(image: np.ndarray, landmarks: np.ndarray,
               aligned_size: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Вирівняти обличчя подібністю (обертання + рівномірний масштаб + зсув)

    Трансформація - найменші квадрати між якорями зразка та канонічними
    якорями, помноженими на aligned_size.

    Parameters:
    -----------
    image : np.ndarray (h, w, 3)
    landmarks : np.ndarray (49, 2)
    aligned_size : int

    Returns:
    --------
    aligned : np.ndarray (aligned_size, aligned_size, 3) float32
    landmarks : np.ndarray (49, 2) у координатах вирівняного зображення
    """
    tform = SimilarityTransform()
    if not tform.estimate(anchor_points(landmarks), CANONICAL_ANCHORS * aligned_size):
        raise ManifestError("Similarity alignment failed: anchor points are degenerate")

    aligned = warp(image, tform.inverse, output_shape=(aligned_size, aligned_size),
                   order=1, mode='edge', preserve_range=True)
    return aligned.astype(np.float32), tform(landmarks)


def _read_image(path: Path) -> np.ndarray:
    image = io.imread(path)
    if image.ndim == 2:
        image = color.gray2rgb(image)
    elif image.shape[-1] == 4:
        image = color.rgba2rgb(image)
    return util.img_as_float32(image)


def _read_manifest(root: Path) -> Dict:
    path = root / "manifest.yaml"
    if not path.exists():
        logger.warning(f"No manifest.yaml in {root}, using default file names")
        return {}
    with open(path, 'r', encoding='utf-8') as f:
        manifest = yaml.safe_load(f) or {}
    if not isinstance(manifest, dict):
        raise ManifestError(f"{path} is not a mapping")
    return manifest


def _labels_matrix(labels_df: pd.DataFrame, au_ids: Sequence[int],
                   threshold: Optional[float]) -> np.ndarray:
    """Колонки au<ID> -> (M, N_AU); інтенсивності бінаризуються порогом"""
    cols = [au_column(a) for a in au_ids]
    for col in cols:
        if col not in labels_df.columns:
            raise ManifestError(f"Labels CSV has no column '{col}'")
    extra = [c for c in labels_df.columns
             if c.startswith('au') and c[2:].isdigit() and c not in cols]
    if extra:
        logger.warning(f"Ignoring label columns not in the AU list: {extra}")

    values = labels_df[cols].to_numpy(dtype=np.float64)
    if threshold is not None:
        return (values >= threshold).astype(np.int64)
    for j, col in enumerate(cols):
        bad = ~np.isin(values[:, j], (0.0, 1.0))
        if bad.any():
            row = labels_df['image_id'].iloc[int(np.argmax(bad))]
            raise ManifestError(
                f"Column '{col}' has non-binary value {values[bad, j][0]} for image '{row}'; "
                f"set data.label_threshold for intensity labels"
            )
    return values.astype(np.int64)


def load_dataset(root, au_ids: Optional[Sequence[int]] = None,
                 cfg: Optional[DataConfig] = None, align: bool = True) -> FaceDataset:
    """
    Завантажити датасет з директорії маніфесту

    root/
      manifest.yaml   (необов'язковий) au_ids, images, labels, landmarks
      images/<image_id>.png
      labels.csv      image_id,subject_id,au<ID>...[,fold]
      landmarks.csv   image_id,x1,y1,...,x49,y49

    Parameters:
    -----------
    root : str or Path
    au_ids : list of int, optional
        AU для завантаження; за замовчуванням з маніфесту
    cfg : DataConfig, optional
    align : bool
        Вирівнювати до cfg.aligned_size

    Returns:
    --------
    dataset : FaceDataset
    """
    cfg = cfg or DataConfig()
    root = Path(root)
    if not root.is_dir():
        raise ManifestError(f"Dataset directory not found: {root}")

    manifest = _read_manifest(root)
    if au_ids is None:
        au_ids = manifest.get('au_ids')
        if not au_ids:
            raise ManifestError(f"No AU list given and {root}/manifest.yaml has no 'au_ids'")
    au_ids = [int(a) for a in au_ids]

    logger.info(f"Loading dataset from {root} (AUs {au_ids})")
    labels_df = pd.read_csv(root / manifest.get('labels', 'labels.csv'), dtype={'image_id': str,
                                                                                 'subject_id': str})
    landmarks_df = pd.read_csv(root / manifest.get('landmarks', 'landmarks.csv'),
                               dtype={'image_id': str})
    image_dir = root / manifest.get('images', 'images')

    for col in ('image_id', 'subject_id'):
        if col not in labels_df.columns:
            raise ManifestError(f"Labels CSV has no column '{col}'")
    lm_cols = landmark_columns()
    for col in ['image_id'] + lm_cols:
        if col not in landmarks_df.columns:
            raise ManifestError(f"Landmarks CSV has no column '{col}'")

    duplicated = labels_df['image_id'][labels_df['image_id'].duplicated()]
    if len(duplicated):
        raise ManifestError(f"Duplicate image id in labels CSV: '{duplicated.iloc[0]}'")

    label_ids = set(labels_df['image_id'])
    landmark_ids = set(landmarks_df['image_id'])
    missing = [i for i in labels_df['image_id'] if i not in landmark_ids]
    if missing:
        raise ManifestError(f"Image '{missing[0]}' has labels but no landmark row")
    extra = [i for i in landmarks_df['image_id'] if i not in label_ids]
    if extra:
        raise ManifestError(f"Image '{extra[0]}' has a landmark row but no labels")

    labels = _labels_matrix(labels_df, au_ids, cfg.label_threshold)
    landmarks_df = landmarks_df.set_index('image_id').loc[labels_df['image_id']]
    landmarks = landmarks_df[lm_cols].to_numpy(dtype=np.float64).reshape(-1, N_LANDMARKS, 2)
    if not np.all(np.isfinite(landmarks)):
        bad = labels_df['image_id'].iloc[int(np.argmax(~np.isfinite(landmarks).all(axis=(1, 2))))]
        raise ManifestError(f"Non-finite landmark coordinates for image '{bad}'")

    images = []
    aligned_landmarks = []
    for image_id, lm in zip(labels_df['image_id'], landmarks):
        path = image_dir / f"{image_id}.png"
        if not path.exists():
            raise ManifestError(f"Image file missing for '{image_id}': {path}")
        image = _read_image(path)
        if align:
            image, lm = align_face(image, lm, cfg.aligned_size)
        elif image.shape[:2] != (cfg.aligned_size, cfg.aligned_size):
            raise DimensionError(
                f"Image '{image_id}' is {image.shape[:2]}, expected "
                f"{cfg.aligned_size}x{cfg.aligned_size} with alignment disabled"
            )
        images.append(image)
        aligned_landmarks.append(lm)

    folds = labels_df['fold'].to_numpy(dtype=np.int64) if 'fold' in labels_df.columns else None
    dataset = FaceDataset(
        image_ids=labels_df['image_id'].tolist(),
        subject_ids=labels_df['subject_id'].tolist(),
        images=np.stack(images).astype(np.float32) if images else
        np.zeros((0, cfg.aligned_size, cfg.aligned_size, 3), dtype=np.float32),
        landmarks=np.stack(aligned_landmarks) if aligned_landmarks else np.zeros((0, N_LANDMARKS, 2)),
        labels=labels,
        au_ids=au_ids,
        folds=folds,
        meta={'root': str(root), 'name': manifest.get('name', root.name)},
    )
    logger.info(f"Loaded {len(dataset)} samples from {dataset.meta['name']}, "
                f"{len(set(dataset.subject_ids))} subjects")
    return dataset


def assign_folds(dataset: FaceDataset, cfg: Optional[DataConfig] = None) -> np.ndarray:
    """
    Призначити фолди 1..num_folds без перетину суб'єктів

    Порядок: колонка fold у CSV, таблиця cfg.fold_table, GroupKFold по subject_id.
    """
    cfg = cfg or DataConfig()
    if dataset.folds is not None:
        folds = np.asarray(dataset.folds, dtype=np.int64)
        source = "labels CSV"
    elif cfg.fold_table is not None:
        if cfg.fold_table not in FOLD_TABLES:
            raise ManifestError(f"Unknown fold table '{cfg.fold_table}', "
                                f"known: {sorted(FOLD_TABLES)}")
        lookup = {s: k for k, subjects in FOLD_TABLES[cfg.fold_table].items() for s in subjects}
        unknown = [s for s in dataset.subject_ids if s not in lookup]
        if unknown:
            raise ManifestError(f"Subject '{unknown[0]}' is not in the {cfg.fold_table} fold table")
        folds = np.array([lookup[s] for s in dataset.subject_ids], dtype=np.int64)
        source = f"{cfg.fold_table} fold table"
    else:
        n_subjects = len(set(dataset.subject_ids))
        if n_subjects < cfg.num_folds:
            raise ManifestError(f"{n_subjects} subjects cannot fill {cfg.num_folds} folds")
        folds = np.zeros(len(dataset), dtype=np.int64)
        splitter = GroupKFold(n_splits=cfg.num_folds)
        for k, (_, test_idx) in enumerate(splitter.split(dataset.labels, groups=dataset.subject_ids)):
            folds[test_idx] = k + 1
        source = "GroupKFold"

    check_subject_exclusive(dataset.subject_ids, folds)
    dataset.folds = folds
    counts = {int(k): int(np.sum(folds == k)) for k in np.unique(folds)}
    logger.info(f"Folds from {source}: {counts}")
    return folds


def check_subject_exclusive(subject_ids: Sequence[str], folds: np.ndarray):
    """ManifestError, якщо суб'єкт з'являється у двох фолдах"""
    seen: Dict[str, int] = {}
    for subject, fold in zip(subject_ids, folds):
        fold = int(fold)
        if seen.setdefault(subject, fold) != fold:
            raise ManifestError(
                f"Subject '{subject}' appears in folds {seen[subject]} and {fold}"
            )


def split_fold(dataset: FaceDataset, fold: int) -> Tuple[FaceDataset, FaceDataset]:
    """(train, test): test = зразки фолду `fold`, train = решта"""
    if dataset.folds is None:
        raise ManifestError("Dataset has no fold assignment; call assign_folds first")
    available = sorted(int(k) for k in np.unique(dataset.folds))
    if fold not in available:
        raise ValueError(f"Fold {fold} not in {available}")
    test_mask = dataset.folds == fold
    return dataset.subset(np.flatnonzero(~test_mask)), dataset.subset(np.flatnonzero(test_mask))
