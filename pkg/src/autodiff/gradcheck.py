"""
Finite-difference gradient checking
Перевірка градієнтів центральними різницями (float64)
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import ops
from .tensor import Tensor, default_dtype, no_grad

logger = logging.getLogger(__name__)


@dataclass
class GradCheckResult:
    name: str
    rel_error: float
    passed: bool
    n_checked: int


def relative_error(analytic: np.ndarray, numeric: np.ndarray, atol: float = 0.0) -> float:
    """
    ||a - n|| / max(||a||, ||n||, atol); 0 для двох нульових градієнтів

    atol обмежує знаменник знизу, тож для крихітних градієнтів похибка
    фактично абсолютна: ||a - n|| / atol.
    """
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), atol)
    if denom < 1e-12:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / denom)


def numerical_grad(fn: Callable[[], Tensor], tensor: Tensor, eps: float = 1e-6,
                   entries: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Центральні різниці d fn / d tensor

    Parameters:
    -----------
    fn : callable
        Без аргументів, повертає скалярний Tensor
    tensor : Tensor
        Вхід, який збурюється на місці
    entries : np.ndarray, optional
        Плоскі індекси для перевірки (інші залишаються 0)
    """
    flat = tensor.data.reshape(-1)
    grad = np.zeros(flat.shape, dtype=np.float64)
    if entries is None:
        entries = np.arange(flat.size)
    with no_grad():
        for i in entries:
            original = flat[i]
            flat[i] = original + eps
            plus = fn().item()
            flat[i] = original - eps
            minus = fn().item()
            flat[i] = original
            grad[i] = (plus - minus) / (2.0 * eps)
    return grad.reshape(tensor.shape)


def check_gradients(name: str, fn: Callable[[], Tensor], inputs: Sequence[Tensor],
                    eps: float = 1e-6, tol: float = 1e-4, max_entries: Optional[int] = None,
                    rng: Optional[np.random.Generator] = None,
                    atol: float = 0.0) -> GradCheckResult:
    """
    Порівняти аналітичний градієнт з центральними різницями

    Parameters:
    -----------
    atol : float
        Нижня межа знаменника відносної похибки (див. relative_error)

    Returns:
    --------
    result : GradCheckResult
        Найбільша відносна похибка серед усіх входів
    """
    for t in inputs:
        if t.dtype != np.float64:
            raise ValueError(f"Gradient check '{name}' needs float64 inputs, got {t.dtype}")
        t.zero_grad()

    out = fn()
    out.backward()

    worst = 0.0
    checked = 0
    for t in inputs:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        entries = None
        if max_entries is not None and t.size > max_entries:
            rng = rng or np.random.default_rng(0)
            entries = np.sort(rng.choice(t.size, size=max_entries, replace=False))
        numeric = numerical_grad(fn, t, eps=eps, entries=entries)
        if entries is not None:
            analytic = analytic.reshape(-1)[entries]
            numeric = numeric.reshape(-1)[entries]
        worst = max(worst, relative_error(analytic, numeric, atol))
        checked += analytic.size

    result = GradCheckResult(name=name, rel_error=worst, passed=worst < tol, n_checked=checked)
    level = logging.DEBUG if result.passed else logging.ERROR
    logger.log(level, f"gradcheck {name}: rel_err={worst:.2e} over {checked} entries "
                      f"({'ok' if result.passed else 'FAILED'})")
    return result


# ============================================================
# Kernel suite
# ============================================================

def _param(rng, shape, low=None, high=None) -> Tensor:
    if low is None:
        data = rng.standard_normal(shape)
    else:
        data = rng.uniform(low, high, size=shape)
    return Tensor(data.astype(np.float64), requires_grad=True, dtype=np.float64)


def _weighted_sum(out: Tensor, weights: np.ndarray) -> Tensor:
    """Скаляр sum(out * w) з фіксованими випадковими вагами"""
    return ops.sum(ops.mul(out, Tensor(weights, dtype=np.float64)))


def _kernel_cases(rng: np.random.Generator) -> Dict[str, Callable]:
    """Кожен кейс повертає (inputs, fn) для випадкової форми"""

    def case_matmul():
        m, k, n = rng.integers(1, 6, size=3)
        a, b = _param(rng, (m, k)), _param(rng, (k, n))
        w = rng.standard_normal((m, n))
        return [a, b], lambda: _weighted_sum(ops.matmul(a, b), w)

    def case_conv2d():
        c_in, c_out = rng.integers(1, 4, size=2)
        k = int(rng.integers(1, 4))
        stride = int(rng.integers(1, 3))
        padding = int(rng.integers(0, 2))
        h = int(rng.integers(k, k + 4))
        x = _param(rng, (2, c_in, h, h))
        wt = _param(rng, (c_out, c_in, k, k))
        b = _param(rng, (c_out,))
        ho = (h + 2 * padding - k) // stride + 1
        w = rng.standard_normal((2, c_out, ho, ho))
        return [x, wt, b], lambda: _weighted_sum(ops.conv2d(x, wt, b, stride, padding), w)

    def case_maxpool2d():
        c = int(rng.integers(1, 3))
        h = 2 * int(rng.integers(1, 4))
        x = _param(rng, (2, c, h, h))
        w = rng.standard_normal((2, c, h // 2, h // 2))
        return [x], lambda: _weighted_sum(ops.maxpool2d(x), w)

    def case_batchnorm_train():
        c = int(rng.integers(1, 4))
        x = _param(rng, (3, c, 2, 2))
        gamma, beta = _param(rng, (c,)), _param(rng, (c,))
        w = rng.standard_normal((3, c, 2, 2))

        def fn():
            rm, rv = np.zeros(c), np.ones(c)
            return _weighted_sum(ops.batchnorm(x, gamma, beta, rm, rv, training=True), w)
        return [x, gamma, beta], fn

    def case_batchnorm_eval():
        c = int(rng.integers(1, 4))
        x = _param(rng, (2, c, 2, 2))
        gamma, beta = _param(rng, (c,)), _param(rng, (c,))
        rm, rv = rng.standard_normal(c), rng.uniform(0.5, 2.0, c)
        w = rng.standard_normal((2, c, 2, 2))
        return [x, gamma, beta], lambda: _weighted_sum(
            ops.batchnorm(x, gamma, beta, rm, rv, training=False), w)

    def _unary(op, low=None, high=None):
        def case():
            shape = tuple(int(s) for s in rng.integers(1, 5, size=2))
            x = _param(rng, shape, low, high)
            w = rng.standard_normal(shape)
            return [x], lambda: _weighted_sum(op(x), w)
        return case

    def case_binary(op, low=None, high=None):
        def case():
            shape = tuple(int(s) for s in rng.integers(1, 5, size=2))
            a = _param(rng, shape)
            b = _param(rng, (shape[1],), low, high)
            w = rng.standard_normal(shape)
            return [a, b], lambda: _weighted_sum(op(a, b), w)
        return case

    def case_interpolate(mode):
        def case():
            factor = int(rng.choice([1, 2, 4]))
            c, h = int(rng.integers(1, 3)), int(rng.integers(1, 4))
            x = _param(rng, (1, c, h, h))
            w = rng.standard_normal((1, c, h * factor, h * factor))
            return [x], lambda: _weighted_sum(ops.interpolate(x, factor, mode), w)
        return case

    def case_concat():
        n1, n2, d = rng.integers(1, 4, size=3)
        a, b = _param(rng, (n1, d)), _param(rng, (n2, d))
        w = rng.standard_normal((n1 + n2, d))
        return [a, b], lambda: _weighted_sum(ops.concat([a, b], axis=0), w)

    def case_reshape():
        a, b, c = (int(s) for s in rng.integers(1, 5, size=3))
        x = _param(rng, (a, b, c))
        w = rng.standard_normal((b * a, c))
        return [x], lambda: _weighted_sum(
            ops.reshape(ops.transpose(x, (1, 0, 2)), (b * a, c)), w)

    def case_mean():
        shape = tuple(int(s) for s in rng.integers(1, 5, size=3))
        x = _param(rng, shape)
        axis = int(rng.integers(0, 3))
        reduced = tuple(s for i, s in enumerate(shape) if i != axis)
        w = rng.standard_normal(reduced)
        return [x], lambda: _weighted_sum(ops.mean(x, axis=axis), w)

    def case_max():
        shape = tuple(int(s) for s in rng.integers(1, 5, size=4))
        x = _param(rng, shape)
        axis = int(rng.integers(0, 4))
        reduced = tuple(s for i, s in enumerate(shape) if i != axis)
        w = rng.standard_normal(reduced)
        return [x], lambda: _weighted_sum(ops.max(x, axis=axis), w)

    def case_index():
        B, N, d = (int(s) for s in rng.integers(1, 5, size=3))
        K = int(rng.integers(1, 4))
        x = _param(rng, (B, N, d))
        idx = rng.integers(0, N, size=(B, N, K))
        w = rng.standard_normal((B, N, K, d))
        return [x], lambda: _weighted_sum(ops.gather_rows(x, idx), w)

    def case_clip():
        shape = tuple(int(s) for s in rng.integers(1, 5, size=2))
        x = _param(rng, shape)
        low = -float(rng.uniform(0.2, 1.0))
        high = float(rng.uniform(0.2, 1.0))
        w = rng.standard_normal(shape)
        return [x], lambda: _weighted_sum(ops.clip(x, low, high), w)

    def case_stack():
        shape = tuple(int(s) for s in rng.integers(1, 4, size=2))
        n = int(rng.integers(1, 4))
        axis = int(rng.integers(0, 3))
        xs = [_param(rng, shape) for _ in range(n)]
        out_shape = shape[:axis] + (n,) + shape[axis:]
        w = rng.standard_normal(out_shape)
        return xs, lambda: _weighted_sum(ops.stack(xs, axis=axis), w)

    return {
        'matmul': case_matmul,
        'conv2d': case_conv2d,
        'maxpool2d': case_maxpool2d,
        'batchnorm_train': case_batchnorm_train,
        'batchnorm_eval': case_batchnorm_eval,
        'relu': _unary(ops.relu),
        'gelu': _unary(ops.gelu),
        'sigmoid': _unary(ops.sigmoid),
        'log': _unary(ops.log, 0.5, 2.0),
        'pow': _unary(lambda x: ops.power(x, 2.0)),
        'neg': _unary(ops.neg),
        'clip': case_clip,
        'add': case_binary(ops.add),
        'sub': case_binary(ops.sub),
        'mul': case_binary(ops.mul),
        'div': case_binary(ops.div, 0.5, 2.0),
        'interpolate_nearest': case_interpolate('nearest'),
        'interpolate_bilinear': case_interpolate('bilinear'),
        'concat': case_concat,
        'stack': case_stack,
        'reshape': case_reshape,
        'mean': case_mean,
        'max': case_max,
        'gather': case_index,
    }


def run_kernel_suite(seed: int = 0, repeats: int = 20, tol: float = 1e-4,
                     kernels: Optional[Sequence[str]] = None) -> List[GradCheckResult]:
    """
    Перевірити кожне диференційовне ядро на `repeats` випадкових формах

    Returns:
    --------
    results : list of GradCheckResult
        По одному на (ядро, повтор)
    """
    rng = np.random.default_rng(seed)
    results = []
    with default_dtype(np.float64):
        cases = _kernel_cases(rng)
        names = kernels if kernels is not None else list(cases)
        for name in names:
            for r in range(repeats):
                inputs, fn = cases[name]()
                results.append(check_gradients(f"{name}[{r}]", fn, inputs, tol=tol))
    failed = [r.name for r in results if not r.passed]
    logger.info(f"Kernel suite: {len(results) - len(failed)}/{len(results)} checks passed")
    return results
