"""
Minimal numpy autodiff engine
Мінімальний рушій автоматичного диференціювання на numpy
"""

from .tensor import (
    Tensor,
    as_tensor,
    default_dtype,
    get_default_dtype,
    is_grad_enabled,
    no_grad,
    parameter,
    set_default_dtype,
)
from . import ops
from .ops import count_macs
from .nn import BatchNorm2d, Conv2d, Linear, Module, ModuleList, count_parameters

__all__ = [
    'Tensor',
    'as_tensor',
    'default_dtype',
    'get_default_dtype',
    'is_grad_enabled',
    'no_grad',
    'parameter',
    'set_default_dtype',
    'ops',
    'count_macs',
    'Module',
    'ModuleList',
    'Linear',
    'Conv2d',
    'BatchNorm2d',
    'count_parameters',
]
