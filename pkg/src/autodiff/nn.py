"""
Neural network building blocks
Базові шари: Module, Linear, Conv2d, BatchNorm2d, ModuleList
"""

import logging
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from . import ops
from .tensor import Tensor, get_default_dtype

logger = logging.getLogger(__name__)


class Module:
    """
    Базовий клас для шарів з параметрами

    Параметри - це листові Tensor з requires_grad=True, збережені як
    атрибути; підмодулі обходяться рекурсивно в порядку оголошення.
    """

    def __init__(self):
        self.training = True
        self._buffers: Dict[str, np.ndarray] = {}

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def register_buffer(self, name: str, value: np.ndarray):
        """Непараметричний стан (напр. running_mean), що зберігається у state_dict"""
        self._buffers[name] = value
        object.__setattr__(self, name, value)

    # --- traversal ---
    def _children(self) -> Iterator[Tuple[str, 'Module']]:
        for name, value in self.__dict__.items():
            if isinstance(value, Module):
                yield name, value

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, value in self.__dict__.items():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad and value.is_leaf:
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(prefix=f"{full}.")

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name in self._buffers:
            yield f"{prefix}{name}", getattr(self, name)
        for name, child in self._children():
            yield from child.named_buffers(prefix=f"{prefix}{name}.")

    # --- modes ---
    def train(self, mode: bool = True) -> 'Module':
        self.training = mode
        for _, child in self._children():
            child.train(mode)
        return self

    def eval(self) -> 'Module':
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    # --- state ---
    def state_dict(self) -> Dict[str, np.ndarray]:
        """Копія всіх параметрів та буферів за повними іменами"""
        state = {name: p.data.copy() for name, p in self.named_parameters()}
        state.update({name: b.copy() for name, b in self.named_buffers()})
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray], strict: bool = True):
        params = dict(self.named_parameters())
        buffers = dict(self.named_buffers())
        expected = set(params) | set(buffers)
        missing = expected - set(state)
        unexpected = set(state) - expected
        if strict and (missing or unexpected):
            raise KeyError(
                f"State mismatch: missing {sorted(missing)}, unexpected {sorted(unexpected)}"
            )
        for name, p in params.items():
            if name not in state:
                continue
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ValueError(f"Shape mismatch for {name}: {value.shape} vs {p.shape}")
            p.data = value.astype(p.dtype, copy=True)
        for name, b in buffers.items():
            if name in state:
                # буфери оновлюються на місці, бо на них посилаються ядра
                b[...] = np.asarray(state[name], dtype=b.dtype)

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))


class ModuleList(Module):
    """Впорядкований список підмодулів з іменами '0', '1', ..."""

    def __init__(self, modules=None):
        super().__init__()
        self._items: List[Module] = []
        for m in modules or []:
            self.append(m)

    def append(self, module: Module):
        object.__setattr__(self, str(len(self._items)), module)
        self._items.append(module)

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, i):
        return self._items[i]


def _uniform(rng: np.random.Generator, shape, bound: float) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape).astype(get_default_dtype())


class Linear(Module):
    """
    Повнозв'язний шар y = x W + b, W форми (in_features, out_features)

    Ініціалізація: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) для W та b.
    """

    def __init__(self, in_features: int, out_features: int,
                 rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        bound = 1.0 / np.sqrt(in_features)
        self.weight = Tensor(_uniform(rng, (in_features, out_features), bound), requires_grad=True)
        self.bias = Tensor(_uniform(rng, (out_features,), bound), requires_grad=True) if bias else None

    def zero_(self):
        """Обнулити ваги (залишкові гілки стають тотожністю)"""
        self.weight.data[...] = 0
        if self.bias is not None:
            self.bias.data[...] = 0
        return self

    def forward(self, x: Tensor) -> Tensor:
        y = ops.matmul(x, self.weight)
        if self.bias is not None:
            y = ops.add(y, self.bias)
        return y


class Conv2d(Module):
    """Згортка k×k; bias вимкнено, коли далі йде BatchNorm"""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 rng: np.random.Generator, stride: int = 1, padding: int = 0, bias: bool = False):
        super().__init__()
        self.stride = stride
        self.padding = padding
        fan_in = in_channels * kernel_size * kernel_size
        # Kaiming-uniform для ReLU
        bound = np.sqrt(6.0 / fan_in)
        self.weight = Tensor(
            _uniform(rng, (out_channels, in_channels, kernel_size, kernel_size), bound),
            requires_grad=True,
        )
        self.bias = Tensor(_uniform(rng, (out_channels,), 1.0 / np.sqrt(fan_in)), requires_grad=True) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class BatchNorm2d(Module):
    """Batch normalization по каналах, momentum 0.1, eps 1e-5"""

    def __init__(self, num_features: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        dtype = get_default_dtype()
        self.momentum = momentum
        self.eps = eps
        self.gamma = Tensor(np.ones(num_features, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(num_features, dtype=dtype), requires_grad=True)
        self.register_buffer('running_mean', np.zeros(num_features, dtype=dtype))
        self.register_buffer('running_var', np.ones(num_features, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return ops.batchnorm(x, self.gamma, self.beta, self.running_mean, self.running_var,
                             training=self.training, momentum=self.momentum, eps=self.eps)


def count_parameters(module: Module) -> int:
    """Точна кількість скалярних параметрів"""
    return module.num_parameters()


def seeded_rng(seed: Optional[int]) -> np.random.Generator:
    return np.random.default_rng(seed)
