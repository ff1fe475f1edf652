"""
Dense tensor with reverse-mode differentiation
Щільний тензор на numpy зі стрічкою (tape) для зворотного поширення

Кожен результат операції зберігає посилання на входи (_parents) та
функцію _grad_fn(g) -> кортеж градієнтів для кожного входу.
"""

import contextlib
import logging
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

_GRAD_ENABLED = True
_DEFAULT_DTYPE = np.float32


def set_default_dtype(dtype) -> None:
    """Встановити dtype за замовчуванням (float32 для тренування, float64 для gradcheck)"""
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"Unsupported dtype: {dtype}")
    _DEFAULT_DTYPE = dtype.type


def get_default_dtype():
    return _DEFAULT_DTYPE


@contextlib.contextmanager
def default_dtype(dtype):
    """Тимчасово змінити dtype за замовчуванням"""
    previous = _DEFAULT_DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


@contextlib.contextmanager
def no_grad():
    """Вимкнути запис стрічки (інференс, оновлення параметрів)"""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    """
    Тензор з опційною участю у стрічці градієнтів

    Attributes:
    -----------
    data : np.ndarray
        Значення (row-major), float32 або float64
    requires_grad : bool
        Чи накопичувати градієнт для цього листа
    grad : np.ndarray or None
        Накопичувач градієнта тієї ж форми, що й data
    """

    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: Optional[str] = None):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            dtype = data.dtype if isinstance(data, np.ndarray) and data.dtype.kind == 'f' \
                else _DEFAULT_DTYPE
        self.data = np.asarray(data, dtype=dtype)
        if self.data.dtype not in (np.float32, np.float64):
            raise ValueError(f"Tensor dtype must be float32 or float64, got {self.data.dtype}")
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents: Tuple['Tensor', ...] = ()
        self._grad_fn: Optional[Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]] = None
        self._op = ""

    # --- convenience ---
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._grad_fn is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> 'Tensor':
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        req = ", requires_grad=True" if self.requires_grad else ""
        op = f", op={self._op}" if self._op else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{req}{op})"

    def __len__(self) -> int:
        return self.shape[0]

    # --- graph construction ---
    @staticmethod
    def from_op(data: np.ndarray, parents: Sequence['Tensor'], grad_fn, op: str) -> 'Tensor':
        """Створити результат операції та (якщо потрібно) записати його на стрічку"""
        out = Tensor(data, dtype=data.dtype)
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._grad_fn = grad_fn
            out._op = op
        return out

    def _topological_order(self):
        """Детермінований пост-порядок DFS без рекурсії"""
        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            # reversed, щоб перший батько оброблявся першим
            for parent in reversed(node._parents):
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """
        Зворотне поширення від скалярного кореня

        Кожен вузол стрічки відвідується рівно один раз у фіксованому
        зворотному топологічному порядку. Градієнти листів накопичуються
        (два виклики без zero_grad подвоюють .grad).
        """
        if grad is None:
            if self.data.size != 1:
                raise ValueError(f"backward() root must be scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=self.data.dtype)
        if grad.shape != self.shape:
            raise ValueError(f"Seed gradient shape {grad.shape} != root shape {self.shape}")
        if not self.requires_grad:
            raise ValueError("backward() called on a tensor that does not require grad")

        order = self._topological_order()
        pending = {id(self): grad}

        for node in reversed(order):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if node._grad_fn is None:
                # Лист: накопичити
                if node.grad is None:
                    node.grad = np.array(g, dtype=node.data.dtype, copy=True)
                else:
                    node.grad = node.grad + g
                continue
            parent_grads = node._grad_fn(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                if pg.shape != parent.shape:
                    raise RuntimeError(
                        f"Gradient shape {pg.shape} != input shape {parent.shape} in op '{node._op}'"
                    )
                key = id(parent)
                if key in pending:
                    pending[key] = pending[key] + pg
                else:
                    pending[key] = pg

    # --- operator sugar (реалізація в ops.py) ---
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops
        return ops.mul(other, self)

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from . import ops
        return ops.div(other, self)

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __pow__(self, exponent: float):
        from . import ops
        return ops.power(self, exponent)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, index):
        from . import ops
        return ops.index(self, index)

    def sum(self, axis=None, keepdims: bool = False):
        from . import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        from . import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        from . import ops
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes or None)

    @property
    def T(self):
        from . import ops
        return ops.transpose(self, None)


def as_tensor(value, dtype=None) -> Tensor:
    """Обгорнути скаляр / масив у Tensor без градієнта"""
    if isinstance(value, Tensor):
        return value
    if dtype is None:
        dtype = _DEFAULT_DTYPE
    return Tensor(np.asarray(value, dtype=dtype), dtype=dtype)


def parameter(data, name: Optional[str] = None) -> Tensor:
    """Створити параметр (лист з requires_grad=True)"""
    return Tensor(data, requires_grad=True, name=name)
