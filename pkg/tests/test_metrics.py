"""
Tests for evaluation metrics
"""

import numpy as np
import pandas as pd
import pytest

from losses import binarize, f1_and_accuracy, write_metrics_csv
from utils.errors import DimensionError


def test_f1_from_counts():
    # TP=1, FP=1, FN=1, TN=1
    preds = np.array([[1], [1], [0], [0]])
    labels = np.array([[1], [0], [1], [0]])
    report = f1_and_accuracy(preds, labels, [12])
    assert report.f1[0] == pytest.approx(0.5)
    assert report.accuracy[0] == pytest.approx(0.5)


def test_no_positives_gives_zero_f1():
    report = f1_and_accuracy(np.zeros((5, 1)), np.zeros((5, 1)), [4])
    assert report.f1[0] == 0.0
    assert report.accuracy[0] == 1.0


def test_perfect_predictions(rng):
    labels = rng.integers(0, 2, size=(20, 3))
    labels[0] = 1
    report = f1_and_accuracy(labels, labels, [1, 12, 25])
    np.testing.assert_allclose(report.f1, 1.0)
    assert report.mean_accuracy == 1.0


def test_mean_over_aus():
    preds = np.array([[1, 0], [0, 0]])
    labels = np.array([[1, 1], [0, 0]])
    report = f1_and_accuracy(preds, labels, [1, 2])
    assert report.mean_f1 == pytest.approx(0.5)
    assert report.mean_accuracy == pytest.approx(0.75)


def test_shape_mismatch_raises():
    with pytest.raises(DimensionError):
        f1_and_accuracy(np.zeros((4, 2)), np.zeros((4, 3)), [1, 2])


def test_binarize_threshold_inclusive():
    np.testing.assert_array_equal(binarize(np.array([0.49, 0.5, 0.9])), [0, 1, 1])


def test_csv_layout(tmp_path):
    report = f1_and_accuracy(np.array([[1, 0]]), np.array([[1, 1]]), [6, 12])
    path = write_metrics_csv(report, tmp_path / "sub" / "metrics.csv")
    df = pd.read_csv(path, dtype={'au_id': str})
    assert list(df.columns) == ['au_id', 'f1', 'accuracy']
    assert df['au_id'].tolist() == ['6', '12', 'mean']
    assert df['f1'].iloc[-1] == pytest.approx(0.5)
