"""Factorized residual forecaster: variable tokens, short-horizon self-attention,
long-horizon memory retrieval through a single query, and a multi-step decoder.

All stage functions take normalized inputs and accept any leading batch shape.
Histories are laid out ``(..., time, channel)`` with the newest sample last.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import tensor as T
from ..numerics.nn import AttentionConfig, cross_attention_single_query, init_linear, linear, mlp
from ..numerics.nn import multi_head_self_attention
from ..numerics.optim import ParamStore
from ..numerics.tensor import Tensor, as_tensor, no_grad
from .config import FdtConfig
from .window import HistoryWindow, Normalizer


@dataclass
class ResidualForecast:
    base: np.ndarray     # (..., k+1, n) residual predictions for steps 0..k
    latent: np.ndarray   # (..., latent_dim) memory vector handed to the adapter
    alpha: np.ndarray | None  # (..., d_v) memory attention weights

    @property
    def one_step(self) -> np.ndarray:
        return self.base[..., 0, :]


def latent_dim(cfg: FdtConfig) -> int:
    return cfg.d_k if cfg.use_memory else cfg.d_model


def decoder_tokens(cfg: FdtConfig) -> int:
    if cfg.readout == "global":
        return 1
    return (cfg.d_v if cfg.use_context else 0) + 1


def init_params(cfg: FdtConfig, seed: int = 0) -> ParamStore:
    rng = np.random.default_rng(seed)
    ps = ParamStore()
    d, d_v = cfg.d_model, cfg.d_v

    def add_linear(name, d_in, d_out, bias=True, gain=1.0):
        W, b = init_linear(rng, d_in, d_out, bias=bias, gain=gain)
        ps.add(name + ".W", W)
        if bias:
            ps.add(name + ".b", b)

    if cfg.use_context:
        add_linear("embed", cfg.T_s, d, bias=False)
        ps.add("embed.p", rng.normal(0.0, 0.2, size=(d_v, d)))
        for layer in range(cfg.n_layers):
            for w in ("Wq", "Wk", "Wv", "Wo"):
                ps.add(f"ctx{layer}.{w}", init_linear(rng, d, d, bias=False)[0])
            if cfg.layer_norm:
                ps.add(f"ctx{layer}.ln_g", np.ones(d))
                ps.add(f"ctx{layer}.ln_b", np.zeros(d))
    if cfg.use_global_token or not cfg.use_context:
        ps.add("global", rng.normal(0.0, 0.2, size=d))
    if cfg.use_memory:
        add_linear("hist.0", cfg.T_l, d)
        add_linear("hist.1", d, d)
        for w in ("W_K", "W_V", "W_Q"):
            ps.add(f"mem.{w}", init_linear(rng, d, cfg.d_k, bias=False)[0])
        if cfg.d_k != d:
            ps.add("mem.W_P", init_linear(rng, cfg.d_k, d, bias=False)[0])
    add_linear("ffn.0", d, cfg.d_ff)
    add_linear("ffn.1", cfg.d_ff, d)
    if cfg.layer_norm:
        ps.add("ffn.ln_g", np.ones(d))
        ps.add("ffn.ln_b", np.zeros(d))
    add_linear("dec.0", decoder_tokens(cfg) * d, cfg.d_ff)
    add_linear("dec.1", cfg.d_ff, cfg.horizon * cfg.n, gain=0.5)
    return ps


def _layer(params, name):
    return params[name + ".W"], params[name + ".b"]


def embed_short(x_short, params, cfg: FdtConfig) -> Tensor:
    """Variable tokens: row ``i`` is ``z_i W_e + p_i`` for channel history ``z_i``.

    ``x_short``: ``(..., T_s, d_v)``, returns ``(..., d_v, d_model)``.
    """
    x = as_tensor(x_short)
    if x.shape[-2:] != (cfg.T_s, cfg.d_v):
        raise ValueError(f"short window must be (..., {cfg.T_s}, {cfg.d_v}), got {x.shape}")
    z = T.swapaxes(x, -1, -2)
    return linear(params["embed.W"], None, z) + params["embed.p"]


def encode_context(E_ctx, params, cfg: FdtConfig) -> tuple[Tensor, Tensor]:
    """Self-attention blocks over ``[E_ctx; g]``; returns (encoded tokens, encoded global token).

    Without a global token the second output is the mean of the encoded tokens.
    """
    E = as_tensor(E_ctx)
    att = AttentionConfig(cfg.d_model, cfg.n_heads)
    lead = E.shape[:-2]
    if cfg.use_global_token:
        g = T.broadcast_to(params["global"], lead + (1, cfg.d_model))
        X = T.concat([E, g], axis=-2)
    else:
        X = E
    for layer in range(cfg.n_layers):
        X = X + multi_head_self_attention(att, X, params, prefix=f"ctx{layer}.")
        if cfg.layer_norm:
            X = T.layer_norm(X, params[f"ctx{layer}.ln_g"], params[f"ctx{layer}.ln_b"])
    if cfg.use_global_token:
        return X[..., : cfg.d_v, :], T.reshape(X[..., cfg.d_v, :], lead + (cfg.d_model,))
    return X, T.mean(X, axis=-2)


def embed_long(x_long, params, cfg: FdtConfig) -> Tensor:
    """Shared MLP over each channel's full long-horizon history: ``(..., d_v, d_model)``."""
    x = as_tensor(x_long)
    if x.shape[-2:] != (cfg.T_l, cfg.d_v):
        raise ValueError(f"long window must be (..., {cfg.T_l}, {cfg.d_v}), got {x.shape}")
    z = T.swapaxes(x, -1, -2)
    return mlp([_layer(params, "hist.0"), _layer(params, "hist.1")], z, cfg.activation)


def retrieve_memory(x_long, g_ctx, params, cfg: FdtConfig) -> tuple[Tensor, Tensor]:
    """Single-query cross-attention from the encoded global token over channel memories.

    Returns ``(g', alpha)`` with ``g'`` of width ``d_k`` and ``alpha`` over ``d_v`` channels.
    """
    E_hist = embed_long(x_long, params, cfg)
    K = linear(params["mem.W_K"], None, E_hist)
    V = linear(params["mem.W_V"], None, E_hist)
    Q = linear(params["mem.W_Q"], None, g_ctx)
    return cross_attention_single_query(Q, K, V)


def decode(E_ctx, latent, params, cfg: FdtConfig) -> Tensor:
    """Position-wise FFN (with residual) over ``[E_ctx; latent]``, flatten, MLP.

    ``E_ctx`` may be ``None`` when the context stream is ablated.  Returns the
    normalized forecast ``(..., k+1, n)``.
    """
    latent = as_tensor(latent)
    if cfg.use_memory and cfg.d_k != cfg.d_model:
        latent = linear(params["mem.W_P"], None, latent)
    lead = latent.shape[:-1]
    tok = T.reshape(latent, lead + (1, cfg.d_model))
    if cfg.readout == "flatten" and E_ctx is not None:
        X = T.concat([as_tensor(E_ctx), tok], axis=-2)
    else:
        X = tok
    H = X + mlp([_layer(params, "ffn.0"), _layer(params, "ffn.1")], X, cfg.activation)
    if cfg.layer_norm:
        H = T.layer_norm(H, params["ffn.ln_g"], params["ffn.ln_b"])
    flat = T.reshape(H, lead + (H.shape[-2] * cfg.d_model,))
    out = mlp([_layer(params, "dec.0"), _layer(params, "dec.1")], flat, cfg.activation)
    return T.reshape(out, lead + (cfg.horizon, cfg.n))


def forward_normalized(x_long, params, cfg: FdtConfig):
    """Full composition on a normalized history ``(..., T_l, d_v)``.

    Returns ``(forecast, latent, alpha)``; ``alpha`` is ``None`` without the memory stream.
    """
    x_long = as_tensor(x_long)
    lead = x_long.shape[:-2]
    if cfg.use_context:
        x_short = x_long[..., cfg.T_l - cfg.T_s:, :]
        E_ctx = embed_short(x_short, params, cfg)
        E_enc, g_ctx = encode_context(E_ctx, params, cfg)
        dec_tokens = E_ctx if cfg.decoder_tokens == "raw" else E_enc
    else:
        g_ctx = T.broadcast_to(params["global"], lead + (cfg.d_model,))
        dec_tokens = None
    if cfg.use_memory:
        latent, alpha = retrieve_memory(x_long, g_ctx, params, cfg)
    else:
        latent, alpha = g_ctx, None
    return decode(dec_tokens, latent, params, cfg), latent, alpha


def multi_step_loss(forecasts, targets) -> Tensor:
    """Sum over samples and horizon steps of squared residual forecast errors."""
    f, y = as_tensor(forecasts), as_tensor(targets)
    if f.shape != y.shape:
        raise ValueError(f"forecast shape {f.shape} does not match targets {y.shape}")
    return T.sum(T.square(f - y))


class FdtModel:
    """Parameters plus frozen normalization statistics; inference in physical units."""

    def __init__(self, cfg: FdtConfig, params: ParamStore | None = None,
                 normalizer: Normalizer | None = None, seed: int = 0):
        self.cfg = cfg
        self.params = params if params is not None else init_params(cfg, seed)
        self.normalizer = normalizer or Normalizer.identity(cfg.d_v, cfg.n)

    @property
    def latent_dim(self) -> int:
        return latent_dim(self.cfg)

    def predict_history(self, history) -> ResidualForecast:
        """Forecast from raw histories ``(..., >=T_l, d_v)``; only the newest ``T_l`` rows are used."""
        h = np.asarray(history, dtype=np.float64)
        if h.shape[-2] < self.cfg.T_l:
            raise ValueError(f"history underfilled: {h.shape[-2]} of {self.cfg.T_l} samples")
        h = h[..., h.shape[-2] - self.cfg.T_l:, :]
        with no_grad():
            out, latent, alpha = forward_normalized(self.normalizer.inputs(h), self.params, self.cfg)
        return ResidualForecast(self.normalizer.denormalize(out.value), latent.value,
                                None if alpha is None else alpha.value)

    def predict(self, window: HistoryWindow) -> ResidualForecast:
        return self.predict_history(window.last(self.cfg.T_l))

    def arrays(self) -> dict[str, np.ndarray]:
        return {**self.params.arrays(), **self.normalizer.arrays()}

    def save(self, path, extra_meta: dict | None = None) -> None:
        from ..numerics.checkpoint import save_checkpoint
        meta = {"kind": "fdt", "config": self.cfg.to_dict(), **(extra_meta or {})}
        save_checkpoint(path, self.arrays(), meta)

    @classmethod
    def load(cls, path) -> "FdtModel":
        from ..numerics.checkpoint import load_checkpoint
        arrays, meta = load_checkpoint(path)
        cfg = FdtConfig.from_dict(meta["config"])
        norm = Normalizer.from_arrays(arrays)
        params = ParamStore({k: v for k, v in arrays.items() if not k.startswith("norm.")})
        expected = init_params(cfg)
        if set(params) != set(expected) or any(params[k].shape != expected[k].shape for k in params):
            raise ValueError(f"{path}: parameters do not match the stored configuration")
        return cls(cfg, params, norm)


def forward(window: HistoryWindow, model: FdtModel) -> ResidualForecast:
    return model.predict(window)
