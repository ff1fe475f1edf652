"""
ROI cropping from basic features
Вирізання ROI фіксованого розміру з карти базових ознак
"""

import logging
import math
from typing import Tuple

import numpy as np

from autodiff import Tensor, ops
from utils.errors import DimensionError

logger = logging.getLogger(__name__)

def roi_size(xi: float, input_size: int) -> int:
    """s_roi = round-half-up(xi * H/4); 0.14 * 56 = 7.84 -> 8"""
    size = int(math.floor(xi * (input_size / 4.0) + 0.5))
    if size < 1:
        raise ValueError(f"ROI side is {size} cells for xi={xi}, H={input_size}")
    return size


def window_origins(centers: np.ndarray, eta: float, size: int,
                   grid_shape: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray, int]:
    """
    Верхні ліві кути вікон на сітці ознак

    Центр у пікселях множиться на eta; вікно сторони `size` центрується
    на ньому (округлення half-up) і зсувається всередину сітки.

    Returns:
    --------
    tops, lefts : np.ndarray (int)
    n_clamped : int
        Кількість вікон, які довелося зсунути
    """
    h, w = grid_shape
    if size > h or size > w:
        raise DimensionError(f"ROI side {size} exceeds feature grid {h}x{w}")
    centers = np.asarray(centers, dtype=np.float64)
    gx = eta * centers[..., 0]
    gy = eta * centers[..., 1]
    half = (size - 1) / 2.0
    tops_raw = np.floor(gy - half + 0.5).astype(np.int64)
    lefts_raw = np.floor(gx - half + 0.5).astype(np.int64)
    tops = np.clip(tops_raw, 0, h - size)
    lefts = np.clip(lefts_raw, 0, w - size)
    n_clamped = int(np.sum((tops != tops_raw) | (lefts != lefts_raw)))
    return tops, lefts, n_clamped


def crop_rois(features: Tensor, centers: np.ndarray, eta: float, xi: float,
              input_size: int) -> Tensor:
    """
    Вирізати N_ROI вікон і сплющити кожне до d1 = s_roi^2 * d0

    Parameters:
    -----------
    features : Tensor
        Базові ознаки F, (B, d0, h, w) або (d0, h, w)
    centers : np.ndarray
        Центри AU у пікселях входу, (B, N, 2) або (N, 2)
    eta : float
        Коефіцієнт пікселі -> сітка ознак (1/4 для stride-4)
    xi : float
        Частка сторони ROI від сторони сітки
    input_size : int
        H (= W) вхідного зображення

    Returns:
    --------
    rois : Tensor
        (B, N, d1) або (N, d1); порядок сплющення (c, y, x)
    """
    squeezed = features.ndim == 3
    if squeezed:
        features = ops.reshape(features, (1,) + features.shape)
        centers = np.asarray(centers)[None]
    B, C, h, w = features.shape
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim != 3 or centers.shape[0] != B or centers.shape[2] != 2:
        raise DimensionError(f"centers must be (B, N, 2) with B={B}, got {centers.shape}")

    size = roi_size(xi, input_size)
    tops, lefts, n_clamped = window_origins(centers, eta, size, (h, w))
    if n_clamped:
        logger.warning(f"{n_clamped} of {B * centers.shape[1]} ROI windows clamped to the feature grid")

    N = centers.shape[1]
    offs = np.arange(size)
    b_idx = np.arange(B).reshape(B, 1, 1, 1, 1)
    c_idx = np.arange(C).reshape(1, 1, C, 1, 1)
    y_idx = (tops[:, :, None] + offs[None, None, :]).reshape(B, N, 1, size, 1)
    x_idx = (lefts[:, :, None] + offs[None, None, :]).reshape(B, N, 1, 1, size)

    windows = ops.index(features, (b_idx, c_idx, y_idx, x_idx))   # (B, N, C, s, s)
    rois = ops.reshape(windows, (B, N, C * size * size))
    if squeezed:
        rois = ops.reshape(rois, (N, C * size * size))
    return rois
