"""
Data: synthetic faces, manifests, augmentation and batching
"""

from .augment import (
    FLIP_PAIRS,
    augment_sample,
    center_crop,
    color_jitter,
    crop_image,
    flip_permutation,
    flip_sample,
    resolve_permutation,
)
from .dataset import (
    FOLD_TABLES,
    FaceDataset,
    align_face,
    anchor_points,
    assign_folds,
    check_subject_exclusive,
    labels_frame,
    landmarks_frame,
    load_dataset,
    split_fold,
)
from .loader import Batch, BatchLoader, to_input
from .synthetic import SyntheticFaceGenerator, synth_generate

__all__ = [
    'FLIP_PAIRS',
    'augment_sample',
    'center_crop',
    'color_jitter',
    'crop_image',
    'flip_permutation',
    'flip_sample',
    'resolve_permutation',
    'FOLD_TABLES',
    'FaceDataset',
    'align_face',
    'anchor_points',
    'assign_folds',
    'check_subject_exclusive',
    'labels_frame',
    'landmarks_frame',
    'load_dataset',
    'split_fold',
    'Batch',
    'BatchLoader',
    'to_input',
    'SyntheticFaceGenerator',
    'synth_generate',
]
