"""Layers built from tensor primitives: affine maps, attention, MLPs."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import tensor as T
from .tensor import Tensor, as_tensor

ACTIVATIONS = {"gelu": T.gelu, "relu": T.relu, "tanh": T.tanh}


@dataclass(frozen=True)
class AttentionConfig:
    d_model: int
    n_heads: int
    d_k: int | None = None

    def __post_init__(self):
        if self.d_model <= 0 or self.n_heads <= 0:
            raise ValueError("d_model and n_heads must be positive")
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")
        if self.d_k is not None and self.d_k <= 0:
            raise ValueError("d_k must be positive")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads


def linear(W, b, x) -> Tensor:
    """``x @ W + b`` over the last axis of ``x``.

    ``W`` is stored input-major, shape ``(d_in, d_out)``, so a batch of row
    vectors maps as ``y_i = W^T x_i + b``.
    """
    x, W = as_tensor(x), as_tensor(W)
    if x.shape[-1] != W.shape[0]:
        raise ValueError(f"linear: input width {x.shape[-1]} != weight rows {W.shape[0]}")
    y = T.matmul(x, W)
    if b is not None:
        y = T.add(y, b)
    return y


def softmax(x, axis: int = -1) -> Tensor:
    return T.softmax(as_tensor(x), axis=axis)


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    *lead, tokens, d = x.shape
    x = T.reshape(x, (*lead, tokens, n_heads, d // n_heads))
    return T.swapaxes(x, -2, -3)  # (..., heads, tokens, head_dim)


def _merge_heads(x: Tensor) -> Tensor:
    x = T.swapaxes(x, -2, -3)
    *lead, tokens, heads, hd = x.shape
    return T.reshape(x, (*lead, tokens, heads * hd))


def multi_head_self_attention(cfg: AttentionConfig, X, params: Mapping[str, Tensor],
                              prefix: str = "") -> Tensor:
    """Scaled dot-product self-attention over the token axis (``-2``).

    Expects ``{prefix}Wq, Wk, Wv, Wo`` of shape ``(d_model, d_model)``.  The
    caller adds the residual connection.
    """
    X = as_tensor(X)
    if X.shape[-1] != cfg.d_model:
        raise ValueError(f"token width {X.shape[-1]} != d_model {cfg.d_model}")
    h = cfg.n_heads
    q = _split_heads(linear(params[prefix + "Wq"], None, X), h)
    k = _split_heads(linear(params[prefix + "Wk"], None, X), h)
    v = _split_heads(linear(params[prefix + "Wv"], None, X), h)
    scores = T.matmul(q, T.swapaxes(k, -1, -2)) * (1.0 / math.sqrt(cfg.head_dim))
    att = T.softmax(scores, axis=-1)
    out = _merge_heads(T.matmul(att, v))
    return linear(params[prefix + "Wo"], None, out)


def cross_attention_single_query(q, K, V) -> tuple[Tensor, Tensor]:
    """One query against a set of keys.

    ``q``: ``(..., d_k)``; ``K``, ``V``: ``(..., tokens, d_k)``.  Returns
    ``(output, weights)`` with ``weights`` summing to one over tokens.
    """
    q, K, V = as_tensor(q), as_tensor(K), as_tensor(V)
    if K.shape[-1] != q.shape[-1] or K.shape[-2] != V.shape[-2]:
        raise ValueError(f"shape mismatch q{q.shape} K{K.shape} V{V.shape}")
    dk = q.shape[-1]
    q_row = T.reshape(q, (*q.shape[:-1], 1, dk))
    scores = T.matmul(q_row, T.swapaxes(K, -1, -2)) * (1.0 / math.sqrt(dk))
    alpha = T.softmax(scores, axis=-1)  # (..., 1, tokens)
    out = T.matmul(alpha, V)
    return (T.reshape(out, (*out.shape[:-2], V.shape[-1])),
            T.reshape(alpha, (*alpha.shape[:-2], K.shape[-2])))


def mlp(layers: Sequence[tuple], x, activation: str = "gelu") -> Tensor:
    """Feed-forward stack; ``layers`` is a sequence of ``(W, b)`` pairs.

    The activation is applied between layers, not after the last one.
    """
    act = ACTIVATIONS[activation]
    y = as_tensor(x)
    for i, (W, b) in enumerate(layers):
        y = linear(W, b, y)
        if i < len(layers) - 1:
            y = act(y)
    return y


def init_linear(rng: np.random.Generator, d_in: int, d_out: int, bias: bool = True,
                gain: float = 1.0) -> tuple[np.ndarray, np.ndarray | None]:
    """Glorot-uniform weights, zero bias."""
    limit = gain * math.sqrt(6.0 / (d_in + d_out))
    W = rng.uniform(-limit, limit, size=(d_in, d_out))
    return W, (np.zeros(d_out) if bias else None)
