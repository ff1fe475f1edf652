"""
Tests for AU center geometry
"""

import numpy as np
import pytest

from geometry import (
    DATASET_AU_IDS,
    center_labels,
    compute_au_centers,
    interocular_scale,
    num_rois,
    unique_center_specs,
)
from utils.errors import DegenerateScaleError, DimensionError

from conftest import face_landmarks


def landmarks_with(points):
    lm = np.tile([[110.0, 120.0]], (49, 1))
    for number, xy in points.items():
        lm[number - 1] = xy
    return lm


class TestInterocularScale:
    def test_horizontal_corners(self):
        lm = landmarks_with({22: (96, 100), 25: (128, 100)})
        assert interocular_scale(lm) == pytest.approx(32.0)

    def test_three_four_five(self):
        lm = landmarks_with({22: (0, 0), 25: (3, 4)})
        assert interocular_scale(lm) == pytest.approx(5.0)

    def test_coincident_corners_raise(self):
        lm = landmarks_with({22: (50, 50), 25: (50, 50)})
        with pytest.raises(DegenerateScaleError):
            interocular_scale(lm)

    def test_batched(self):
        lm = np.stack([landmarks_with({22: (0, 0), 25: (3, 4)}),
                       landmarks_with({22: (96, 100), 25: (128, 100)})])
        np.testing.assert_allclose(interocular_scale(lm), [5.0, 32.0])

    def test_zero_based_numbers(self):
        lm = landmarks_with({22: (0, 0), 25: (3, 4)})
        assert interocular_scale(lm, inner_eye_corners=(21, 24), index_base=0) == pytest.approx(5.0)


class TestComputeCenters:
    def test_inner_brow_raiser_offset(self):
        lm = landmarks_with({22: (96, 100), 25: (128, 100), 4: (90, 80)})
        centers = compute_au_centers(lm, [1])
        np.testing.assert_allclose(centers[0], [90.0, 64.0])

    def test_identity_rule_returns_landmarks(self):
        lm = face_landmarks()
        centers = compute_au_centers(lm, [7])
        np.testing.assert_allclose(centers, lm[[20, 25]])

    @pytest.mark.parametrize("dataset,expected", [('bp4d', 18), ('disfa', 16)])
    def test_unique_window_counts(self, dataset, expected):
        au_ids = DATASET_AU_IDS[dataset]
        assert num_rois(au_ids) == expected
        assert compute_au_centers(face_landmarks(), au_ids).shape == (expected, 2)

    def test_shared_definitions_emitted_once(self):
        definitions = unique_center_specs([12, 14, 15, 1])
        assert [d.au_ids for d in definitions] == [(12, 14, 15), (1,)]
        assert center_labels([12, 14, 15]) == ['AU12/14/15@31', 'AU12/14/15@37']

    def test_translation_equivariance(self):
        lm = face_landmarks()
        shift = np.array([7.5, -3.0])
        au_ids = DATASET_AU_IDS['bp4d']
        np.testing.assert_allclose(compute_au_centers(lm + shift, au_ids),
                                   compute_au_centers(lm, au_ids) + shift)

    def test_scale_equivariance(self):
        lm = face_landmarks()
        au_ids = DATASET_AU_IDS['disfa']
        np.testing.assert_allclose(compute_au_centers(2.5 * lm, au_ids),
                                   2.5 * compute_au_centers(lm, au_ids))

    def test_batched_matches_single(self):
        lm = face_landmarks()
        batch = np.stack([lm, lm * 0.5])
        out = compute_au_centers(batch, [1, 2, 4])
        np.testing.assert_allclose(out[1], compute_au_centers(lm * 0.5, [1, 2, 4]))

    def test_unknown_au_raises(self):
        with pytest.raises(ValueError, match="AU3"):
            compute_au_centers(face_landmarks(), [3])

    def test_wrong_landmark_count_raises(self):
        with pytest.raises(DimensionError):
            compute_au_centers(np.zeros((48, 2)), [1])
