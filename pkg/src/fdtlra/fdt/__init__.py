"""Residual forecaster over variable-wise tokens with short context and long memory."""
from .config import ABLATIONS, FdtConfig, desk_config, paper_config
from .model import (FdtModel, ResidualForecast, decode, embed_long, embed_short, encode_context, forward,
                    forward_normalized, init_params, latent_dim, multi_step_loss, retrieve_memory)
from .train import TrainConfig, TrainResult, train, write_training_log, write_wall_times
from .window import HistoryWindow, Normalizer, sliding_windows

__all__ = [
    "ABLATIONS", "FdtConfig", "FdtModel", "HistoryWindow", "Normalizer", "ResidualForecast", "TrainConfig",
    "TrainResult", "decode", "desk_config", "embed_long", "embed_short", "encode_context", "forward",
    "forward_normalized", "init_params", "latent_dim", "multi_step_loss", "paper_config", "retrieve_memory",
    "sliding_windows", "train", "write_training_log", "write_wall_times",
]
