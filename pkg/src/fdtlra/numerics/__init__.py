"""Minimal float64 tensor tape, layers and Adam."""
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, grad_check
from .nn import (AttentionConfig, cross_attention_single_query, init_linear, linear, mlp,
                 multi_head_self_attention, softmax)
from .optim import ParamStore, adam_step
from .tensor import Tape, Tensor, no_grad

__all__ = [
    "AttentionConfig", "GradCheckReport", "ParamStore", "Tape", "Tensor",
    "adam_step", "cross_attention_single_query", "grad_check", "init_linear", "linear",
    "load_checkpoint", "mlp", "multi_head_self_attention", "no_grad", "save_checkpoint",
    "softmax",
]
