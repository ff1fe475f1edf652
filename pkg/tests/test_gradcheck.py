"""
Tests for the finite-difference suite
"""

import numpy as np
import pytest

from autodiff import Tensor, ops
from autodiff.gradcheck import check_gradients, relative_error, run_kernel_suite


def broken_square(x: Tensor) -> Tensor:
    """x^2 з навмисно хибним градієнтом (бракує множника 2)"""
    return Tensor.from_op(x.data ** 2, (x,), lambda g: (g * x.data,), "broken_square")


def test_relative_error_of_zero_gradients_is_zero():
    assert relative_error(np.zeros(3), np.zeros(3)) == 0.0


def test_absolute_floor_bounds_denominator():
    analytic = np.array([1e-5, -2e-5])
    numeric = analytic + np.array([5e-9, -5e-9])
    assert relative_error(analytic, numeric) > 1e-4
    floored = relative_error(analytic, numeric, atol=1e-3)
    assert floored == pytest.approx(np.sqrt(2) * 5e-9 / 1e-3)


def test_floor_does_not_hide_large_gradients():
    analytic = np.array([3.0, 4.0])
    numeric = np.array([3.0, 4.5])
    assert relative_error(analytic, numeric, atol=1e-3) == pytest.approx(0.5 / np.sqrt(3.0 ** 2 + 4.5 ** 2))


def test_tiny_gradient_noise_passes_with_atol():
    x = Tensor(np.array([0.3, -0.7, 1.1]), requires_grad=True, dtype=np.float64)
    scale = Tensor(np.full(3, 1e-9))
    result = check_gradients("tiny", lambda: ops.sum(ops.mul(ops.power(x, 3.0), scale)), [x],
                             atol=1e-3)
    assert result.passed


def test_float32_inputs_rejected():
    x = Tensor(np.ones(3, dtype=np.float32), requires_grad=True)
    with pytest.raises(ValueError, match="float64"):
        check_gradients("f32", lambda: ops.sum(x), [x])


def test_correct_gradient_passes():
    x = Tensor(np.array([0.3, -0.7, 1.1]), requires_grad=True, dtype=np.float64)
    result = check_gradients("cube", lambda: ops.sum(ops.power(x, 3.0)), [x])
    assert result.passed
    assert result.n_checked == 3


def test_wrong_gradient_is_detected():
    x = Tensor(np.array([0.3, -0.7, 1.1]), requires_grad=True, dtype=np.float64)
    result = check_gradients("broken", lambda: ops.sum(broken_square(x)), [x])
    assert not result.passed
    assert result.rel_error > 0.1


def test_subsampled_entries():
    x = Tensor(np.linspace(-1, 1, 50), requires_grad=True, dtype=np.float64)
    result = check_gradients("sub", lambda: ops.sum(ops.gelu(x)), [x], max_entries=7)
    assert result.passed
    assert result.n_checked == 7


def test_every_kernel_passes_twenty_random_cases():
    results = run_kernel_suite(seed=0, repeats=20)
    failed = [(r.name, r.rel_error) for r in results if not r.passed]
    assert not failed, failed
    names = {r.name.split('[')[0] for r in results}
    for kernel in ('matmul', 'conv2d', 'maxpool2d', 'batchnorm_train', 'batchnorm_eval', 'relu',
                   'gelu', 'sigmoid', 'log', 'concat', 'reshape', 'mean', 'max', 'add', 'sub',
                   'mul', 'interpolate_nearest', 'neg', 'clip', 'stack', 'gather'):
        assert kernel in names


@pytest.mark.parametrize("kernel", ['neg', 'clip', 'stack', 'reshape', 'mean', 'max', 'gather'])
def test_new_seed_new_shapes(kernel):
    for seed in (1, 2, 3):
        results = run_kernel_suite(seed=seed, repeats=5, kernels=[kernel])
        assert all(r.passed for r in results), [(r.name, r.rel_error) for r in results]
    shapes = {r.n_checked for r in run_kernel_suite(seed=7, repeats=10, kernels=[kernel])}
    assert len(shapes) > 1
