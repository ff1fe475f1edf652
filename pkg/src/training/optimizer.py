"""
Optimizer and learning-rate schedule
SGD з моментом Нестерова та L2 регуляризацією, обрізання норми градієнтів,
косинусний розклад з лінійним розігрівом
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from autodiff import Tensor
from utils.errors import NonFiniteGradientError

logger = logging.getLogger(__name__)


def cosine_warmup_lr(step: int, total_steps: int, warmup_steps: int, lr_max: float) -> float:
    """
    Швидкість навчання для кроку `step` (0-based)

    step < warmup_steps: lr_max * (step + 1) / warmup_steps (останній крок прогріву = lr_max)
    далі: lr_max * 0.5 * (1 + cos(pi * t)),
          t = (step - warmup_steps) / (total_steps - 1 - warmup_steps)

    Parameters:
    -----------
    step : int
    total_steps : int
        Кількість кроків усього тренування
    warmup_steps : int
        Зазвичай warmup_epochs * кроків на епоху
    lr_max : float
    """
    if total_steps < 1:
        raise ValueError(f"total_steps must be positive, got {total_steps}")
    if warmup_steps > 0 and step < warmup_steps:
        return lr_max * (step + 1) / warmup_steps

    span = total_steps - 1 - warmup_steps
    if span <= 0:
        return lr_max
    t = min(max((step - warmup_steps) / span, 0.0), 1.0)
    return lr_max * 0.5 * (1.0 + math.cos(math.pi * t))


def grad_norm(params: Sequence[Tensor]) -> float:
    """Глобальна L2 норма градієнтів"""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(np.asarray(p.grad, dtype=np.float64) ** 2))
    return math.sqrt(total)


def clip_grad_norm(params: Sequence[Tensor], max_norm: float = 5.0) -> float:
    """
    Масштабувати всі градієнти на max_norm / norm, якщо norm > max_norm

    Returns:
    --------
    norm : float
        Норма до обрізання
    """
    norm = grad_norm(params)
    if max_norm is not None and max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = (p.grad * scale).astype(p.grad.dtype)
    return norm


def check_finite(named_params: Sequence[Tuple[str, Tensor]]):
    """NonFiniteGradientError з іменами параметрів, що мають NaN/inf"""
    offending = [name for name, p in named_params
                 if p.grad is not None and not np.all(np.isfinite(p.grad))]
    if offending:
        logger.error(f"Non-finite gradients in {len(offending)} tensors: {offending[:5]}")
        raise NonFiniteGradientError(
            f"Non-finite gradients in {offending[:5]}"
            f"{' and more' if len(offending) > 5 else ''}",
            offending,
        )


class SGD:
    """
    SGD з (Нестеров) моментом

    d = g + weight_decay * w
    buf = d на першому кроці, інакше momentum * buf + d
    d = d + momentum * buf (Нестеров) або buf
    w = w - lr * d

    Parameters:
    -----------
    named_params : list of (str, Tensor)
    momentum : float
    nesterov : bool
    weight_decay : float
    """

    def __init__(self, named_params: Sequence[Tuple[str, Tensor]], momentum: float = 0.9,
                 nesterov: bool = True, weight_decay: float = 5e-4):
        if nesterov and momentum <= 0:
            raise ValueError("Nesterov momentum requires momentum > 0")
        self.named_params: List[Tuple[str, Tensor]] = list(named_params)
        self.momentum = momentum
        self.nesterov = nesterov
        self.weight_decay = weight_decay
        self.buffers: Dict[str, Optional[np.ndarray]] = {name: None for name, _ in self.named_params}
        self.step_count = 0

    @property
    def params(self) -> List[Tensor]:
        return [p for _, p in self.named_params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self, lr: float):
        check_finite(self.named_params)
        for name, p in self.named_params:
            if p.grad is None:
                continue
            d = p.grad
            if self.weight_decay:
                d = d + self.weight_decay * p.data
            if self.momentum:
                buf = self.buffers[name]
                if buf is None:
                    buf = d.copy()
                else:
                    buf = self.momentum * buf + d
                self.buffers[name] = buf
                d = d + self.momentum * buf if self.nesterov else buf
            p.data = (p.data - lr * d).astype(p.dtype)
        self.step_count += 1

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Буфери моменту (тільки ініціалізовані)"""
        return {name: buf.copy() for name, buf in self.buffers.items() if buf is not None}

    def load_state_dict(self, state: Dict[str, np.ndarray], step_count: int = 0):
        known = set(self.buffers)
        unknown = set(state) - known
        if unknown:
            raise KeyError(f"Momentum buffers for unknown parameters: {sorted(unknown)}")
        for name in self.buffers:
            self.buffers[name] = np.array(state[name]) if name in state else None
        self.step_count = step_count
