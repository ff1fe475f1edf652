"""
Training: optimizer, schedule, checkpoints and loops
"""

from .checkpoint import FORMAT_VERSION, load_checkpoint, save_checkpoint
from .optimizer import SGD, check_finite, clip_grad_norm, cosine_warmup_lr, grad_norm
from .trainer import EvaluationResult, Trainer, build_model, gradcheck_network

__all__ = [
    'FORMAT_VERSION',
    'load_checkpoint',
    'save_checkpoint',
    'SGD',
    'check_finite',
    'clip_grad_norm',
    'cosine_warmup_lr',
    'grad_norm',
    'EvaluationResult',
    'Trainer',
    'build_model',
    'gradcheck_network',
]
