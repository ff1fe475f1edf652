"""
Differentiable kernels
Диференційовні ядра: елементні операції, matmul, conv2d, pooling,
batchnorm, інтерполяція, редукції та індексування

Конвенції форм:
- зображення/карти ознак: NCHW; 3-D вхід (C, H, W) підвищується до batch=1
- вузли графа: (B, N, d) або (N, d)
"""

import builtins
import contextlib
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf, expit

from utils.errors import DimensionError
from .tensor import Tensor, get_default_dtype

logger = logging.getLogger(__name__)

_SQRT2 = float(np.sqrt(2.0))
_INV_SQRT_2PI = float(1.0 / np.sqrt(2.0 * np.pi))


# ============================================================
# MAC counter
# ============================================================

class MacCounter:
    """Лічильник multiply-accumulate операцій для одного прямого проходу"""

    def __init__(self):
        self.total = 0
        self.by_op = {}

    def add(self, op: str, n: int):
        self.total += int(n)
        self.by_op[op] = self.by_op.get(op, 0) + int(n)

    @property
    def flops(self) -> int:
        return 2 * self.total


_COUNTERS: List[MacCounter] = []


@contextlib.contextmanager
def count_macs():
    """
    Порахувати MAC у matmul/conv2d всередині блоку

    Example:
    --------
    >>> with count_macs() as counter:
    ...     model(x)
    >>> counter.total
    """
    counter = MacCounter()
    _COUNTERS.append(counter)
    try:
        yield counter
    finally:
        _COUNTERS.remove(counter)


def _record_macs(op: str, n: int):
    for counter in _COUNTERS:
        counter.add(op, n)


# ============================================================
# Helpers
# ============================================================

def _wrap(value, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else get_default_dtype()
    return Tensor(np.asarray(value, dtype=dtype), dtype=dtype)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Сумувати градієнт по осях, що були розширені broadcast-ом"""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _promote_4d(x: Tensor, op: str) -> Tuple[Tensor, bool]:
    if x.ndim == 4:
        return x, False
    if x.ndim == 3:
        return reshape(x, (1,) + x.shape), True
    raise DimensionError(f"{op} expects (C,H,W) or (B,C,H,W) input, got shape {x.shape}")


def _demote(x: Tensor, squeezed: bool) -> Tensor:
    return reshape(x, x.shape[1:]) if squeezed else x


# ============================================================
# Elementwise arithmetic
# ============================================================

def add(a, b) -> Tensor:
    a, b = _wrap(a, b if isinstance(b, Tensor) else None), _wrap(b, a if isinstance(a, Tensor) else None)
    out = a.data + b.data

    def grad_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor.from_op(out, (a, b), grad_fn, "add")


def sub(a, b) -> Tensor:
    a, b = _wrap(a, b if isinstance(b, Tensor) else None), _wrap(b, a if isinstance(a, Tensor) else None)
    out = a.data - b.data

    def grad_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor.from_op(out, (a, b), grad_fn, "sub")


def mul(a, b) -> Tensor:
    a, b = _wrap(a, b if isinstance(b, Tensor) else None), _wrap(b, a if isinstance(a, Tensor) else None)
    out = a.data * b.data

    def grad_fn(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor.from_op(out, (a, b), grad_fn, "mul")


def div(a, b) -> Tensor:
    a, b = _wrap(a, b if isinstance(b, Tensor) else None), _wrap(b, a if isinstance(a, Tensor) else None)
    out = a.data / b.data

    def grad_fn(g):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    return Tensor.from_op(out, (a, b), grad_fn, "div")


def neg(x: Tensor) -> Tensor:
    return Tensor.from_op(-x.data, (x,), lambda g: (-g,), "neg")


def power(x: Tensor, exponent: float) -> Tensor:
    """x ** p для скалярного показника"""
    p = float(exponent)
    out = np.power(x.data, p).astype(x.dtype, copy=False)

    def grad_fn(g):
        return (g * p * np.power(x.data, p - 1.0),)

    return Tensor.from_op(out, (x,), grad_fn, "pow")


def log(x: Tensor) -> Tensor:
    out = np.log(x.data)
    return Tensor.from_op(out, (x,), lambda g: (g / x.data,), "log")


def clip(x: Tensor, low: float, high: float) -> Tensor:
    """Обрізання значень; градієнт проходить лише всередині [low, high]"""
    out = np.clip(x.data, low, high)

    def grad_fn(g):
        mask = (x.data >= low) & (x.data <= high)
        return (g * mask,)

    return Tensor.from_op(out, (x,), grad_fn, "clip")


# ============================================================
# Activations
# ============================================================

def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor.from_op(x.data * mask, (x,), lambda g: (g * mask,), "relu")


def gelu(x: Tensor) -> Tensor:
    """Точна GeLU: 0.5 * x * (1 + erf(x / sqrt(2)))"""
    cdf = 0.5 * (1.0 + erf(x.data / _SQRT2))
    out = (x.data * cdf).astype(x.dtype, copy=False)

    def grad_fn(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
        return (g * (cdf + x.data * pdf),)

    return Tensor.from_op(out, (x,), grad_fn, "gelu")


def sigmoid(x: Tensor) -> Tensor:
    out = expit(x.data).astype(x.dtype, copy=False)

    def grad_fn(g):
        return (g * out * (1.0 - out),)

    return Tensor.from_op(out, (x,), grad_fn, "sigmoid")


# ============================================================
# Linear algebra
# ============================================================

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Матричний добуток з broadcast-ом batch-осей

    Parameters:
    -----------
    a : Tensor[..., m, k]
    b : Tensor[..., k, n]

    Returns:
    --------
    Tensor[..., m, n]
    """
    a, b = _wrap(a, b if isinstance(b, Tensor) else None), _wrap(b, a if isinstance(a, Tensor) else None)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs at least 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul inner extents differ: {a.shape} @ {b.shape}")

    out = np.matmul(a.data, b.data)
    batch = int(np.prod(out.shape[:-2])) if out.ndim > 2 else 1
    _record_macs("matmul", batch * a.shape[-2] * a.shape[-1] * b.shape[-1])

    def grad_fn(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return Tensor.from_op(out, (a, b), grad_fn, "matmul")


# ============================================================
# Convolution and pooling
# ============================================================

def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """
    2-D крос-кореляція через im2col (sliding_window_view)

    Parameters:
    -----------
    x : Tensor[B, C_in, H, W] або Tensor[C_in, H, W]
    weight : Tensor[C_out, C_in, k, k]
    bias : Tensor[C_out], optional
    stride, padding : int

    Returns:
    --------
    Tensor[B, C_out, H', W'], H' = floor((H + 2p - k)/s) + 1
    """
    x, squeezed = _promote_4d(x, "conv2d")
    B, C, H, W = x.shape
    O, C_w, kh, kw = weight.shape
    if C_w != C:
        raise DimensionError(f"conv2d channel mismatch: input has {C}, kernel expects {C_w}")
    if stride < 1 or padding < 0:
        raise ValueError(f"conv2d needs stride >= 1 and padding >= 0, got {stride}, {padding}")

    Ho = (H + 2 * padding - kh) // stride + 1
    Wo = (W + 2 * padding - kw) // stride + 1
    if Ho <= 0 or Wo <= 0 or H + 2 * padding < kh or W + 2 * padding < kw:
        raise DimensionError(
            f"conv2d output extent non-positive: input {H}x{W}, kernel {kh}x{kw}, "
            f"stride {stride}, padding {padding}"
        )

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) \
        if padding else x.data
    # (B, C, Hp-kh+1, Wp-kw+1, kh, kw) -> крок stride
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :Ho, :Wo]
    out = np.tensordot(windows, weight.data, axes=([1, 4, 5], [1, 2, 3]))  # (B, Ho, Wo, O)
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
    if bias is not None:
        out = out + bias.data.reshape(1, O, 1, 1)
    _record_macs("conv2d", B * O * Ho * Wo * C * kh * kw)

    def grad_fn(g):
        gw = np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))  # (O, C, kh, kw)
        gcols = np.tensordot(g, weight.data, axes=([1], [0]))       # (B, Ho, Wo, C, kh, kw)
        gxp = np.zeros(xp.shape, dtype=x.dtype)
        for i in range(kh):
            for j in range(kw):
                gxp[:, :, i:i + stride * Ho:stride, j:j + stride * Wo:stride] += \
                    gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        gx = gxp[:, :, padding:padding + H, padding:padding + W] if padding else gxp
        grads = [gx, gw.astype(weight.dtype, copy=False)]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    parents = (x, weight) if bias is None else (x, weight, bias)
    out_t = Tensor.from_op(out.astype(x.dtype, copy=False), parents, grad_fn, "conv2d")
    return _demote(out_t, squeezed)


def maxpool2d(x: Tensor, kernel: int = 2, stride: int = 2) -> Tensor:
    """Неперекривний max-pooling (kernel == stride); при рівності береться перший індекс"""
    if kernel != stride:
        raise ValueError(f"maxpool2d supports kernel == stride only, got {kernel}, {stride}")
    x, squeezed = _promote_4d(x, "maxpool2d")
    B, C, H, W = x.shape
    k = kernel
    Ho, Wo = H // k, W // k
    if Ho == 0 or Wo == 0:
        raise DimensionError(f"maxpool2d kernel {k} larger than input {H}x{W}")

    blocks = x.data[:, :, :Ho * k, :Wo * k].reshape(B, C, Ho, k, Wo, k)
    blocks = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(B, C, Ho, Wo, k * k)
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]

    def grad_fn(g):
        gb = np.zeros((B, C, Ho, Wo, k * k), dtype=x.dtype)
        np.put_along_axis(gb, arg[..., None], g[..., None], axis=-1)
        gb = gb.reshape(B, C, Ho, Wo, k, k).transpose(0, 1, 2, 4, 3, 5).reshape(B, C, Ho * k, Wo * k)
        gx = np.zeros(x.shape, dtype=x.dtype)
        gx[:, :, :Ho * k, :Wo * k] = gb
        return (gx,)

    out_t = Tensor.from_op(np.ascontiguousarray(out), (x,), grad_fn, "maxpool2d")
    return _demote(out_t, squeezed)


def batchnorm(x: Tensor, gamma: Tensor, beta: Tensor,
              running_mean: np.ndarray, running_var: np.ndarray,
              training: bool, momentum: float = 0.1, eps: float = 1e-5) -> Tensor:
    """
    Batch normalization по каналах (вісь 1) для NCHW або (B, C)

    У режимі тренування використовує статистики батчу та оновлює
    running_mean / running_var на місці (незміщена дисперсія).
    """
    if x.ndim == 4:
        axes = (0, 2, 3)
        bshape = (1, -1, 1, 1)
    elif x.ndim == 2:
        axes = (0,)
        bshape = (1, -1)
    else:
        raise DimensionError(f"batchnorm expects 2-D or 4-D input, got shape {x.shape}")

    M = x.data.size // x.shape[1]
    g_w = gamma.data.reshape(bshape)

    if training:
        mean = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        unbiased = var * (M / builtins.max(M - 1, 1))
        running_mean *= (1.0 - momentum)
        running_mean += momentum * mean
        running_var *= (1.0 - momentum)
        running_var += momentum * unbiased
    else:
        mean = running_mean
        var = running_var

    inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype, copy=False)
    xhat = (x.data - mean.reshape(bshape)) * inv_std.reshape(bshape)
    out = (xhat * g_w + beta.data.reshape(bshape)).astype(x.dtype, copy=False)

    def grad_fn(g):
        dgamma = (g * xhat).sum(axis=axes)
        dbeta = g.sum(axis=axes)
        dxhat = g * g_w
        if training:
            s1 = dxhat.sum(axis=axes).reshape(bshape)
            s2 = (dxhat * xhat).sum(axis=axes).reshape(bshape)
            dx = inv_std.reshape(bshape) / M * (M * dxhat - s1 - xhat * s2)
        else:
            dx = dxhat * inv_std.reshape(bshape)
        return dx.astype(x.dtype, copy=False), dgamma, dbeta

    return Tensor.from_op(out, (x, gamma, beta), grad_fn, "batchnorm")


# ============================================================
# Interpolation
# ============================================================

def interpolate_nearest(x: Tensor, factor: int) -> Tensor:
    """Nearest upsampling на цілий коефіцієнт; вихід блочно-сталий"""
    factor = int(factor)
    if factor < 1:
        raise ValueError(f"interpolation factor must be >= 1, got {factor}")
    if factor == 1:
        return x
    x, squeezed = _promote_4d(x, "interpolate_nearest")
    B, C, H, W = x.shape
    out = np.repeat(np.repeat(x.data, factor, axis=2), factor, axis=3)

    def grad_fn(g):
        return (g.reshape(B, C, H, factor, W, factor).sum(axis=(3, 5)),)

    out_t = Tensor.from_op(out, (x,), grad_fn, "interpolate_nearest")
    return _demote(out_t, squeezed)


def _bilinear_matrix(n: int, factor: int, dtype) -> np.ndarray:
    """Матриця (factor*n, n) для bilinear з align_corners=False"""
    m = np.zeros((n * factor, n), dtype=dtype)
    for i in range(n * factor):
        src = builtins.max((i + 0.5) / factor - 0.5, 0.0)
        i0 = builtins.min(int(np.floor(src)), n - 1)
        i1 = builtins.min(i0 + 1, n - 1)
        w = src - i0
        m[i, i0] += 1.0 - w
        m[i, i1] += w
    return m


def interpolate_bilinear(x: Tensor, factor: int) -> Tensor:
    """Bilinear upsampling як добуток зі сталими матрицями по H та W"""
    factor = int(factor)
    if factor < 1:
        raise ValueError(f"interpolation factor must be >= 1, got {factor}")
    if factor == 1:
        return x
    x, squeezed = _promote_4d(x, "interpolate_bilinear")
    _, _, H, W = x.shape
    mh = _bilinear_matrix(H, factor, x.dtype)
    mw = _bilinear_matrix(W, factor, x.dtype)
    out = np.einsum('ph,bchw,qw->bcpq', mh, x.data, mw)

    def grad_fn(g):
        return (np.einsum('ph,bcpq,qw->bchw', mh, g, mw),)

    out_t = Tensor.from_op(out, (x,), grad_fn, "interpolate_bilinear")
    return _demote(out_t, squeezed)


def interpolate(x: Tensor, factor: int, mode: str = "nearest") -> Tensor:
    if mode == "nearest":
        return interpolate_nearest(x, factor)
    if mode == "bilinear":
        return interpolate_bilinear(x, factor)
    raise ValueError(f"Unknown interpolation mode: {mode}")


# ============================================================
# Reductions
# ============================================================

def _norm_axes(axis, ndim) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    axes = _norm_axes(axis, x.ndim)
    out = x.data.sum(axis=axes, keepdims=keepdims)

    def grad_fn(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape).astype(x.dtype, copy=True),)

    return Tensor.from_op(np.asarray(out, dtype=x.dtype), (x,), grad_fn, "sum")


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    out = x.data.mean(axis=axes, keepdims=keepdims)

    def grad_fn(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return ((np.broadcast_to(g, x.shape) / count).astype(x.dtype, copy=False),)

    return Tensor.from_op(np.asarray(out, dtype=x.dtype), (x,), grad_fn, "mean")


def max(x: Tensor, axis: int, keepdims: bool = False) -> Tensor:  # noqa: A001
    """Максимум уздовж однієї осі; градієнт іде до першого argmax"""
    axis = axis % x.ndim
    arg = np.expand_dims(x.data.argmax(axis=axis), axis)
    out = np.take_along_axis(x.data, arg, axis=axis)
    if not keepdims:
        out = np.squeeze(out, axis=axis)

    def grad_fn(g):
        gx = np.zeros(x.shape, dtype=x.dtype)
        gk = g if keepdims else np.expand_dims(g, axis)
        np.put_along_axis(gx, arg, gk, axis=axis)
        return (gx,)

    return Tensor.from_op(out, (x,), grad_fn, "max")


# ============================================================
# Shape manipulation and indexing
# ============================================================

def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    out = x.data.reshape(shape)
    return Tensor.from_op(out, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def flatten(x: Tensor, start_dim: int = 1) -> Tensor:
    """Сплющити всі осі починаючи з start_dim (row-major)"""
    lead = x.shape[:start_dim]
    return reshape(x, lead + (-1,))


def transpose(x: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = x.data.transpose(axes)
    return Tensor.from_op(out, (x,), lambda g: (g.transpose(inverse),), "transpose")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Конкатенація вздовж осі; slice назад повертає кожен операнд"""
    tensors = [_wrap(t) for t in tensors]
    if not tensors:
        raise ValueError("concat needs at least one tensor")
    ndim = tensors[0].ndim
    axis = axis % ndim
    for t in tensors[1:]:
        if t.ndim != ndim or any(
            t.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != axis
        ):
            raise DimensionError(
                f"concat shape mismatch on axis {axis}: {[t.shape for t in tensors]}"
            )
    out = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def grad_fn(g):
        grads = []
        for i in range(len(tensors)):
            sl = [slice(None)] * ndim
            sl[axis] = slice(bounds[i], bounds[i + 1])
            grads.append(g[tuple(sl)])
        return tuple(grads)

    return Tensor.from_op(out, tuple(tensors), grad_fn, "concat")


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    expanded = [reshape(t, t.shape[:axis] + (1,) + t.shape[axis:]) for t in tensors]
    return concat(expanded, axis=axis)


def index(x: Tensor, idx) -> Tensor:
    """
    Індексування (зрізи або fancy-індекси); backward акумулює через np.add.at,
    тому повторні індекси додаються коректно
    """
    if isinstance(idx, Tensor):
        idx = idx.data.astype(np.int64)
    out = x.data[idx]

    def grad_fn(g):
        gx = np.zeros(x.shape, dtype=x.dtype)
        np.add.at(gx, idx, g)
        return (gx,)

    return Tensor.from_op(np.array(out, dtype=x.dtype, copy=True), (x,), grad_fn, "index")


def gather_rows(x: Tensor, indices: np.ndarray) -> Tensor:
    """
    Вибрати рядки вузлів за індексами сусідів

    Parameters:
    -----------
    x : Tensor[B, N, d]
    indices : np.ndarray[B, N, K] (int)

    Returns:
    --------
    Tensor[B, N, K, d]
    """
    if x.ndim != 3 or indices.ndim != 3 or indices.shape[:2] != x.shape[:2]:
        raise DimensionError(f"gather_rows shape mismatch: {x.shape} vs indices {indices.shape}")
    batch = np.arange(x.shape[0])[:, None, None]
    return index(x, (batch, indices))
