"""
Losses and evaluation metrics
"""

from .losses import (
    LossBreakdown,
    class_weights,
    compute_losses,
    landmark_loss,
    occurrence_rates,
    total_loss,
    weighted_asymmetric_loss,
    weighted_dice_loss,
)
from .metrics import MetricsReport, binarize, f1_and_accuracy, write_metrics_csv

__all__ = [
    'LossBreakdown',
    'class_weights',
    'compute_losses',
    'landmark_loss',
    'occurrence_rates',
    'total_loss',
    'weighted_asymmetric_loss',
    'weighted_dice_loss',
    'MetricsReport',
    'binarize',
    'f1_and_accuracy',
    'write_metrics_csv',
]
