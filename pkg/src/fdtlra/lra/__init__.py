"""Latent residual adapter: RLS on frozen latent features with covariance reset."""
from .adapter import (TRACE_COLUMNS, AdapterConfig, AdapterState, adapt_predict, maybe_reset, ridge_solution,
                      rls_update, trace_row, weighted_objective)

__all__ = ["TRACE_COLUMNS", "AdapterConfig", "AdapterState", "adapt_predict", "maybe_reset", "ridge_solution",
           "rls_update", "trace_row", "weighted_objective"]
