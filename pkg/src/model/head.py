"""
Detection head
Об'єднання токенів MSFL (A') та виходу SACL (B), пулінг і класифікатор
"""

import logging
from typing import Optional

import numpy as np

from autodiff import Linear, Module, Tensor, ops
from utils.errors import ConfigError

logger = logging.getLogger(__name__)


def fuse_tokens(aprime: Tensor, b: Tensor) -> Tensor:
    """C = Concat(A', B) по осі токенів: (B, N_MS + N_ROI, D)"""
    if aprime.shape[-1] != b.shape[-1]:
        raise ConfigError(
            f"Token dims differ: MSFL tokens have D={aprime.shape[-1]}, SACL output has {b.shape[-1]}"
        )
    return ops.concat([aprime, b], axis=-2)


class DetectionHead(Module):
    """Середнє по токенах -> (опційно hidden + GeLU) -> FC до N_AU -> sigmoid"""

    def __init__(self, dim: int, n_au: int, rng: np.random.Generator, hidden: int = 0):
        super().__init__()
        self.dim = dim
        self.hidden: Optional[Linear] = Linear(dim, hidden, rng) if hidden else None
        self.classifier = Linear(hidden or dim, n_au, rng)

    def forward(self, aprime: Tensor, b: Tensor) -> Tensor:
        C = fuse_tokens(aprime, b)
        if C.shape[-1] != self.dim:
            raise ConfigError(f"Head expects D={self.dim}, got {C.shape[-1]}")
        pooled = ops.mean(C, axis=-2)
        if self.hidden is not None:
            pooled = ops.gelu(self.hidden(pooled))
        return ops.sigmoid(self.classifier(pooled))
