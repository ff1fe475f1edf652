"""
Tests for layer containers and state dicts
"""

import numpy as np
import pytest

from autodiff import BatchNorm2d, Conv2d, Linear, Module, ModuleList, Tensor, count_parameters


class TwoLayer(Module):
    def __init__(self, rng):
        super().__init__()
        self.first = Linear(4, 3, rng)
        self.blocks = ModuleList([Linear(3, 3, rng), Linear(3, 2, rng, bias=False)])
        self.norm = BatchNorm2d(2)


def test_parameter_names_follow_declaration_order(rng):
    names = [name for name, _ in TwoLayer(rng).named_parameters()]
    assert names == [
        'first.weight', 'first.bias',
        'blocks.0.weight', 'blocks.0.bias', 'blocks.1.weight',
        'norm.gamma', 'norm.beta',
    ]


def test_count_parameters_is_exact(rng):
    assert count_parameters(TwoLayer(rng)) == (4 * 3 + 3) + (3 * 3 + 3) + 3 * 2 + 2 + 2


def test_state_dict_includes_buffers(rng):
    state = TwoLayer(rng).state_dict()
    assert 'norm.running_mean' in state
    assert 'norm.running_var' in state


def test_state_dict_round_trip(rng):
    a = TwoLayer(rng)
    b = TwoLayer(np.random.default_rng(99))
    b.load_state_dict(a.state_dict())
    for (_, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters()):
        np.testing.assert_array_equal(pa.data, pb.data)


def test_load_state_dict_strict_reports_missing_keys(rng):
    model = TwoLayer(rng)
    state = model.state_dict()
    del state['first.bias']
    with pytest.raises(KeyError, match="first.bias"):
        model.load_state_dict(state)


def test_load_state_dict_rejects_wrong_shape(rng):
    model = TwoLayer(rng)
    state = model.state_dict()
    state['first.weight'] = np.zeros((3, 4))
    with pytest.raises(ValueError, match="first.weight"):
        model.load_state_dict(state)


def test_zeroed_linear_outputs_zero(rng):
    layer = Linear(5, 2, rng).zero_()
    out = layer(Tensor(rng.standard_normal((3, 5))))
    np.testing.assert_array_equal(out.data, 0.0)


def test_conv2d_layer_shape(rng):
    conv = Conv2d(3, 4, 3, rng, stride=2, padding=1)
    assert conv(Tensor(np.zeros((2, 3, 8, 8), dtype=np.float32))).shape == (2, 4, 4, 4)


def test_eval_mode_propagates(rng):
    model = TwoLayer(rng).eval()
    assert not model.norm.training
    assert not model.blocks[0].training
    model.train()
    assert model.norm.training


def test_zero_grad_clears_all(rng):
    model = TwoLayer(rng)
    for p in model.parameters():
        p.grad = np.ones_like(p.data)
    model.zero_grad()
    assert all(p.grad is None for p in model.parameters())
