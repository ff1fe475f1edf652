"""
Tests for the pyramid backbone, the landmarks predictor and MSFL fusion
"""

import numpy as np
import pytest

from autodiff import Tensor, count_parameters, default_dtype, ops
from autodiff.gradcheck import check_gradients
from model import Backbone, FeaturePyramid, flatten_tokens, fuse
from utils.config_loader import BackboneConfig
from utils.errors import ConfigError, DimensionError


def toy_backbone(rng):
    cfg = BackboneConfig(d0=8, H=32, W=32, lp_channels=[8, 8, 8])
    return Backbone(cfg, rng)


class TestBackbone:
    def test_toy_pyramid_shapes(self, rng):
        bb = toy_backbone(rng)
        F = bb.stem_forward(Tensor(rng.standard_normal((2, 3, 32, 32)).astype(np.float32)))
        assert F.shape == (2, 8, 8, 8)
        pyramid = bb.stages_forward(F)
        assert [t.shape[1:] for t in pyramid.stages()] == [(8, 8, 8), (16, 4, 4), (32, 2, 2), (64, 1, 1)]

    def test_landmarks_predictor_output(self, rng):
        bb = toy_backbone(rng)
        F = bb.stem_forward(Tensor(np.zeros((1, 3, 32, 32), dtype=np.float32)))
        landmarks = bb.lp_forward(F)
        assert landmarks.shape == (1, 49, 2)
        assert landmarks.size == 98

    def test_single_image_is_promoted(self, rng):
        F = toy_backbone(rng).stem_forward(Tensor(np.zeros((3, 32, 32), dtype=np.float32)))
        assert F.shape == (1, 8, 8, 8)

    def test_extent_not_divisible_by_32_raises(self, rng):
        with pytest.raises(ConfigError):
            toy_backbone(rng).stem_forward(Tensor(np.zeros((1, 3, 40, 40), dtype=np.float32)))

    def test_config_extent_not_divisible_by_32_raises(self, rng):
        with pytest.raises(ConfigError):
            Backbone(BackboneConfig(d0=8, H=48, W=48), rng)

    def test_wrong_channel_count_raises(self, rng):
        with pytest.raises(DimensionError):
            toy_backbone(rng).stem_forward(Tensor(np.zeros((1, 1, 32, 32), dtype=np.float32)))

    def test_same_seed_same_weights(self):
        a = toy_backbone(np.random.default_rng(3)).state_dict()
        b = toy_backbone(np.random.default_rng(3)).state_dict()
        assert a.keys() == b.keys()
        for key in a:
            np.testing.assert_array_equal(a[key], b[key])

    def test_toy_parameter_count(self, rng):
        bb = toy_backbone(rng)
        # stem 420, stages 25008, LP 3552 + fc 882
        assert count_parameters(bb.stem) == 420
        assert count_parameters(bb.stages) == 25008
        assert count_parameters(bb.lp) == 4434
        assert count_parameters(bb) == 29862

    def test_full_size_parameter_count(self):
        bb = Backbone(BackboneConfig(), np.random.default_rng(0))
        assert count_parameters(bb.lp.fc) == 64 * 7 * 7 * 98 + 98
        assert count_parameters(bb) == 2135938

    def test_landmarks_predictor_gradients(self):
        rng = np.random.default_rng(5)
        with default_dtype(np.float64):
            bb = toy_backbone(rng).eval()
            F = Tensor(rng.standard_normal((2, 8, 8, 8)), requires_grad=True, dtype=np.float64)
            w = Tensor(rng.standard_normal((2, 49, 2)))
            first_conv = bb.lp.blocks[0][0].conv.weight
            result = check_gradients(
                "lp_forward", lambda: ops.sum(ops.mul(bb.lp_forward(F), w)),
                [F, first_conv, bb.lp.fc.weight], max_entries=25, rng=rng, atol=1e-6,
            )
        assert result.passed, result.rel_error

    @pytest.mark.slow
    def test_full_size_pyramid_shapes(self):
        with default_dtype(np.float32):
            bb = Backbone(BackboneConfig(), np.random.default_rng(0)).eval()
            F = bb.stem_forward(Tensor(np.zeros((1, 3, 224, 224), dtype=np.float32)))
            pyramid = bb.stages_forward(F)
        assert F.shape == (1, 64, 56, 56)
        assert [t.shape[1:] for t in pyramid.stages()] == [
            (64, 56, 56), (128, 28, 28), (256, 14, 14), (512, 7, 7)]


def pyramid_of(rng, d0=8, side=8, batch=1):
    return FeaturePyramid(*[
        Tensor(rng.standard_normal((batch, d0 * 2 ** i, side // 2 ** i, side // 2 ** i)))
        for i in range(4)
    ])


class TestFusion:
    def test_toy_fused_shape(self, rng):
        A = fuse(pyramid_of(rng))
        assert A.shape == (1, 120, 8, 8)
        assert flatten_tokens(A).shape == (1, 64, 120)

    def test_channel_blocks_follow_stage_order(self, rng):
        pyramid = pyramid_of(rng)
        A = fuse(pyramid).data
        np.testing.assert_array_equal(A[:, :8], pyramid.F1.data)
        # F4 has a single cell, broadcast over the whole grid
        np.testing.assert_array_equal(A[0, 56:, 3, 5], pyramid.F4.data[0, :, 0, 0])

    def test_nearest_upsampling_is_block_constant(self, rng):
        pyramid = pyramid_of(rng)
        A = fuse(pyramid).data
        F2_part = A[0, 8:24]
        np.testing.assert_array_equal(F2_part[:, 0, 0], F2_part[:, 1, 1])
        np.testing.assert_array_equal(F2_part[:, 2, 2], pyramid.F2.data[0, :, 1, 1])

    def test_drop_stage_zeroes_its_channels(self, rng):
        A = fuse(pyramid_of(rng), drop_stages=[3]).data
        assert A.shape == (1, 120, 8, 8)
        assert np.all(A[:, 24:56] == 0)
        assert np.any(A[:, 56:] != 0)

    def test_bilinear_keeps_shape(self, rng):
        assert fuse(pyramid_of(rng), interpolation='bilinear').shape == (1, 120, 8, 8)

    def test_mismatched_pyramid_raises(self, rng):
        pyramid = pyramid_of(rng)
        pyramid.F3 = Tensor(np.zeros((1, 32, 3, 3)))
        with pytest.raises(DimensionError):
            fuse(pyramid)

    def test_tokens_are_row_major(self, rng):
        A = fuse(pyramid_of(rng))
        tokens = flatten_tokens(A).data
        np.testing.assert_array_equal(tokens[0, 1 * 8 + 5], A.data[0, :, 1, 5])

    @pytest.mark.slow
    def test_full_size_fused_extents(self, rng):
        A = fuse(pyramid_of(rng, d0=64, side=56))
        assert A.shape == (1, 960, 56, 56)
        assert flatten_tokens(A).shape == (1, 3136, 960)
