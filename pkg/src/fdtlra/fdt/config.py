from __future__ import annotations

import dataclasses
from dataclasses import dataclass

DECODER_TOKENS = ("raw", "encoded")
READOUTS = ("flatten", "global")


@dataclass(frozen=True)
class FdtConfig:
    """Shape and architecture switches of the forecaster.

    The three ``use_*`` switches exist for ablations:

    * ``use_global_token=False``: no learnable token in the context stream;
      the memory query is the mean of the encoded variable tokens.
    * ``use_context=False``: the short-horizon stream (embedding and
      self-attention) is removed; the memory query is the raw learnable token
      and the decoder sees only the retrieved memory vector.
    * ``use_memory=False``: no long-horizon retrieval; the encoded global
      token is used in place of the memory vector.
    """

    n: int = 5
    T_s: int = 5
    T_l: int = 120
    d_model: int = 64
    n_heads: int = 4
    d_k: int | None = None
    d_ff: int = 256
    k: int = 6
    n_layers: int = 2
    layer_norm: bool = False
    activation: str = "gelu"
    decoder_tokens: str = "raw"
    readout: str = "flatten"
    use_global_token: bool = True
    use_context: bool = True
    use_memory: bool = True

    def __post_init__(self):
        if self.d_k is None:
            object.__setattr__(self, "d_k", self.d_model)
        if self.n < 1:
            raise ValueError("n must be positive")
        if not (self.T_l > self.T_s >= 1):
            raise ValueError(f"need T_l > T_s >= 1, got T_s={self.T_s}, T_l={self.T_l}")
        if self.k < 0 or self.n_layers < 0:
            raise ValueError("k and n_layers must be non-negative")
        if min(self.d_model, self.n_heads, self.d_k, self.d_ff) <= 0:
            raise ValueError("widths must be positive")
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        if self.decoder_tokens not in DECODER_TOKENS:
            raise ValueError(f"decoder_tokens must be one of {DECODER_TOKENS}")
        if self.readout not in READOUTS:
            raise ValueError(f"readout must be one of {READOUTS}")
        if not (self.use_context or self.use_memory):
            raise ValueError("at least one of the context and memory streams is required")

    @property
    def d_v(self) -> int:
        return 3 * self.n

    @property
    def horizon(self) -> int:
        """Rows of a forecast: ``k + 1`` (steps 0..k)."""
        return self.k + 1

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FdtConfig":
        return cls(**d)

    def replace(self, **kw) -> "FdtConfig":
        return dataclasses.replace(self, **kw)


def desk_config(n: int = 5) -> FdtConfig:
    return FdtConfig(n=n)


def paper_config(n: int = 8) -> FdtConfig:
    return FdtConfig(n=n, d_model=512, n_heads=8, d_ff=2048)


ABLATIONS = {
    "full": {},
    "no_global_token": {"use_global_token": False},
    "no_context": {"use_context": False},
    "no_memory": {"use_memory": False},
}
