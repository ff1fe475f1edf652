"""
Multi-scale feature learning
A = Concat(F1, 2x F2, 4x F3, 8x F4), потім сплющення у токени
"""

import logging
from typing import Sequence

import numpy as np

from autodiff import Tensor, ops
from utils.errors import DimensionError

from .backbone import FeaturePyramid

logger = logging.getLogger(__name__)

UPSAMPLE_FACTORS = (1, 2, 4, 8)


def fuse(pyramid: FeaturePyramid, interpolation: str = "nearest",
         drop_stages: Sequence[int] = ()) -> Tensor:
    """
    Вирівняти стадії до H/4 та конкатенувати по каналах

    Parameters:
    -----------
    pyramid : FeaturePyramid
    interpolation : str
        'nearest' або 'bilinear'
    drop_stages : list of int
        Стадії (1..4), канали яких обнуляються (абляція, форма не змінюється)

    Returns:
    --------
    A : Tensor (B, 15*d0, H/4, W/4)
    """
    stages = pyramid.stages()
    target = stages[0].shape[2:]
    aligned = []
    for factor, feat in zip(UPSAMPLE_FACTORS, stages):
        up = ops.interpolate(feat, factor, interpolation)
        if up.shape[2:] != target:
            raise DimensionError(
                f"Upsampled stage has extents {up.shape[2:]}, expected {target}"
            )
        aligned.append(up)
    A = ops.concat(aligned, axis=1)

    if drop_stages:
        mask = np.ones((1, A.shape[1], 1, 1), dtype=A.dtype)
        start = 0
        for i, feat in enumerate(stages, start=1):
            width = feat.shape[1]
            if i in drop_stages:
                mask[:, start:start + width] = 0
            start += width
        A = ops.mul(A, Tensor(mask, dtype=A.dtype))
    return A


def flatten_tokens(A: Tensor) -> Tensor:
    """(B, D, h, w) -> (B, h*w, D), row-major по простору"""
    B, D, h, w = A.shape
    return ops.transpose(ops.reshape(A, (B, D, h * w)), (0, 2, 1))
