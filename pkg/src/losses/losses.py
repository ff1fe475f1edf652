"""
Training losses
Зважена асиметрична втрата, зважена dice втрата, втрата вирівнювання
лендмарків та їх лінійна комбінація
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from autodiff import Tensor, ops
from utils.config_loader import LossConfig
from utils.errors import DegenerateScaleError

logger = logging.getLogger(__name__)


def class_weights(rates: Sequence[float]) -> np.ndarray:
    """
    omega_i = N_AU * (1/r_i) / sum_j (1/r_j)

    Parameters:
    -----------
    rates : list of float
        Частоти появи AU, r_i > 0

    Returns:
    --------
    omega : np.ndarray (N_AU,), сума = N_AU
    """
    r = np.asarray(rates, dtype=np.float64)
    if r.ndim != 1 or r.size == 0:
        raise ValueError(f"rates must be a non-empty 1-D sequence, got shape {r.shape}")
    if np.any(r <= 0) or not np.all(np.isfinite(r)):
        raise ValueError(f"Occurrence rates must be positive and finite, got {r.tolist()}")
    inv = 1.0 / r
    return r.size * inv / inv.sum()


def occurrence_rates(labels: np.ndarray, floor: float = 1e-3) -> np.ndarray:
    """Емпіричні частоти з міток (B, N_AU); нульові частоти підняті до floor"""
    rates = np.asarray(labels, dtype=np.float64).mean(axis=0)
    if np.any(rates < floor):
        logger.warning(f"AU occurrence rates below {floor} raised to {floor}: {rates.round(4).tolist()}")
    return np.maximum(rates, floor)


def _weights_tensor(omega: np.ndarray, like: Tensor) -> Tensor:
    return Tensor(np.asarray(omega, dtype=like.dtype), dtype=like.dtype)


def weighted_asymmetric_loss(y: np.ndarray, p: Tensor, omega: np.ndarray,
                             clamp_eps: float = 1e-7) -> Tensor:
    """
    L_wa = -(1/N_AU) sum_i omega_i [y_i log p_i + (1 - y_i) p_i log(1 - p_i)]

    Середнє по batch. p обрізається до [eps, 1 - eps].
    """
    y_t = Tensor(np.asarray(y, dtype=p.dtype), dtype=p.dtype)
    p_c = ops.clip(p, clamp_eps, 1.0 - clamp_eps)
    pos = ops.mul(y_t, ops.log(p_c))
    neg = ops.mul(ops.mul(ops.sub(1.0, y_t), p_c), ops.log(ops.sub(1.0, p_c)))
    per_au = ops.mul(ops.add(pos, neg), _weights_tensor(omega, p))
    return ops.neg(ops.mean(ops.mean(per_au, axis=-1)))


def weighted_dice_loss(y: np.ndarray, p: Tensor, omega: np.ndarray, eps: float = 1.0) -> Tensor:
    """
    L_dice = (1/N_AU) sum_i omega_i [1 - (2 y_i p_i + eps) / (y_i^2 + p_i^2 + eps)]

    Член для AU дорівнює 0, коли p_i = y_i.
    """
    if eps <= 0:
        raise ValueError(f"Dice smooth term must be positive, got {eps}")
    y_t = Tensor(np.asarray(y, dtype=p.dtype), dtype=p.dtype)
    num = ops.add(ops.mul(ops.mul(y_t, p), 2.0), eps)
    den = ops.add(ops.add(ops.mul(y_t, y_t), ops.mul(p, p)), eps)
    per_au = ops.mul(ops.sub(1.0, ops.div(num, den)), _weights_tensor(omega, p))
    return ops.mean(ops.mean(per_au, axis=-1))


def landmark_loss(gt: np.ndarray, pred: Tensor, d_o) -> Tensor:
    """
    L_land = 1/(2 d_o^2) sum_i [(dx_i)^2 + (dy_i)^2], середнє по batch

    Parameters:
    -----------
    gt : np.ndarray (B, N, 2) або (N, 2)
    pred : Tensor тієї ж форми
    d_o : float або np.ndarray (B,)
        Міжочна відстань ground truth
    """
    d_o = np.asarray(d_o, dtype=np.float64)
    if np.any(d_o <= 0):
        raise DegenerateScaleError(f"Landmark loss normalizer must be positive, got {d_o}")
    gt_t = Tensor(np.asarray(gt, dtype=pred.dtype), dtype=pred.dtype)
    sq = ops.power(ops.sub(pred, gt_t), 2.0)
    per_sample = ops.sum(sq, axis=(-2, -1))
    norm = Tensor((1.0 / (2.0 * d_o * d_o)).astype(pred.dtype), dtype=pred.dtype)
    return ops.mean(ops.mul(per_sample, norm))


@dataclass
class LossBreakdown:
    total: Tensor
    wa: float
    dice: float
    land: float


def total_loss(l_wa: Tensor, l_dice: Tensor, l_land: Tensor,
               lambda1: float = 1.0, lambda2: float = 1.0, lambda3: float = 0.5) -> Tensor:
    """L = lambda1 L_wa + lambda2 L_dice + lambda3 L_land"""
    return ops.add(ops.add(ops.mul(l_wa, lambda1), ops.mul(l_dice, lambda2)),
                   ops.mul(l_land, lambda3))


def compute_losses(y: np.ndarray, p: Tensor, omega: np.ndarray, gt_landmarks: np.ndarray,
                   pred_landmarks: Tensor, d_o, cfg: LossConfig) -> LossBreakdown:
    """Усі три втрати та їх комбінація за LossConfig"""
    l_wa = weighted_asymmetric_loss(y, p, omega, cfg.clamp_eps)
    l_dice = weighted_dice_loss(y, p, omega, cfg.dice_eps)
    l_land = landmark_loss(gt_landmarks, pred_landmarks, d_o)
    total = total_loss(l_wa, l_dice, l_land, cfg.lambda1, cfg.lambda2, cfg.lambda3)
    return LossBreakdown(total=total, wa=l_wa.item(), dice=l_dice.item(), land=l_land.item())
