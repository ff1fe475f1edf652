"""
Evaluation metrics
F1 та accuracy по кожній AU, середні значення та CSV звіт
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence

import numpy as np
import pandas as pd
from sklearn.metrics import accuracy_score, f1_score

from utils.errors import DimensionError

logger = logging.getLogger(__name__)


@dataclass
class MetricsReport:
    au_ids: List[int]
    f1: np.ndarray
    accuracy: np.ndarray

    @property
    def mean_f1(self) -> float:
        return float(np.mean(self.f1))

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracy))

    def to_frame(self) -> pd.DataFrame:
        """Таблиця au_id,f1,accuracy з підсумковим рядком 'mean'"""
        df = pd.DataFrame({
            'au_id': [str(a) for a in self.au_ids],
            'f1': self.f1,
            'accuracy': self.accuracy,
        })
        summary = pd.DataFrame({'au_id': ['mean'], 'f1': [self.mean_f1],
                                'accuracy': [self.mean_accuracy]})
        return pd.concat([df, summary], ignore_index=True)


def binarize(probs: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    return (np.asarray(probs) >= threshold).astype(np.int64)


def f1_and_accuracy(preds: np.ndarray, labels: np.ndarray, au_ids: Sequence[int]) -> MetricsReport:
    """
    F1 = 2PR/(P+R) та accuracy для кожної AU

    Якщо немає ні передбачених, ні справжніх позитивів, F1 = 0.

    Parameters:
    -----------
    preds, labels : np.ndarray (M, N_AU) з {0, 1}
    """
    preds = np.asarray(preds).astype(np.int64)
    labels = np.asarray(labels).astype(np.int64)
    if preds.shape != labels.shape or preds.ndim != 2 or preds.shape[1] != len(au_ids):
        raise DimensionError(
            f"preds {preds.shape} and labels {labels.shape} must both be (M, {len(au_ids)})"
        )
    f1 = np.array([f1_score(labels[:, i], preds[:, i], zero_division=0) for i in range(len(au_ids))],
                  dtype=np.float64)
    acc = np.array([accuracy_score(labels[:, i], preds[:, i]) for i in range(len(au_ids))],
                   dtype=np.float64)
    return MetricsReport(au_ids=list(au_ids), f1=f1, accuracy=acc)


def write_metrics_csv(report: MetricsReport, path) -> Path:
    """Записати звіт з 4 знаками після коми"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    report.to_frame().to_csv(path, index=False, float_format='%.4f')
    logger.info(f"Metrics saved: {path} (mean F1 {report.mean_f1:.4f}, "
                f"mean accuracy {report.mean_accuracy:.4f})")
    return path
