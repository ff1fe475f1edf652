"""
Tests for token fusion and the classification head
"""

import numpy as np
import pytest
from scipy.special import expit

from autodiff import Tensor, default_dtype, ops
from autodiff.gradcheck import check_gradients
from model import DetectionHead, fuse_tokens
from utils.errors import ConfigError


def test_fused_token_count(rng):
    aprime = Tensor(rng.standard_normal((1, 64, 120)))
    b = Tensor(rng.standard_normal((1, 6, 120)))
    assert fuse_tokens(aprime, b).shape == (1, 70, 120)


@pytest.mark.slow
def test_full_size_token_count():
    aprime = Tensor(np.zeros((3136, 960), dtype=np.float32))
    b = Tensor(np.zeros((18, 960), dtype=np.float32))
    assert fuse_tokens(aprime, b).shape == (3154, 960)


def test_mismatched_dims_raise(rng):
    with pytest.raises(ConfigError):
        fuse_tokens(Tensor(np.zeros((1, 4, 8))), Tensor(np.zeros((1, 2, 6))))


def test_zero_classifier_gives_one_half(rng):
    head = DetectionHead(8, 3, rng)
    head.classifier.zero_()
    p = head(Tensor(rng.standard_normal((2, 5, 8))), Tensor(rng.standard_normal((2, 3, 8))))
    assert p.shape == (2, 3)
    np.testing.assert_array_equal(p.data, 0.5)


def test_mean_pooled_logits(rng):
    head = DetectionHead(4, 2, rng)
    aprime = rng.standard_normal((1, 3, 4))
    b = rng.standard_normal((1, 2, 4))
    pooled = np.concatenate([aprime, b], axis=1).mean(axis=1)
    expected = expit(pooled @ head.classifier.weight.data + head.classifier.bias.data)
    p = head(Tensor(aprime), Tensor(b))
    np.testing.assert_allclose(p.data, expected, rtol=1e-5)


def test_hidden_layer(rng):
    head = DetectionHead(4, 2, rng, hidden=6)
    p = head(Tensor(rng.standard_normal((1, 3, 4))), Tensor(rng.standard_normal((1, 2, 4))))
    assert p.shape == (1, 2)
    assert np.all((p.data > 0) & (p.data < 1))


@pytest.mark.parametrize("hidden", [0, 5])
def test_head_gradients(hidden):
    rng = np.random.default_rng(11)
    with default_dtype(np.float64):
        head = DetectionHead(6, 3, rng, hidden=hidden)
        aprime = Tensor(rng.standard_normal((2, 4, 6)), requires_grad=True, dtype=np.float64)
        b = Tensor(rng.standard_normal((2, 3, 6)), requires_grad=True, dtype=np.float64)
        w = Tensor(rng.standard_normal((2, 3)))
        inputs = [aprime, b] + head.parameters()
        result = check_gradients("head", lambda: ops.sum(ops.mul(head(aprime, b), w)), inputs)
    assert result.passed, result.rel_error
