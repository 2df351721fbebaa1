from __future__ import annotations

import numpy as np

from .integrate import GeneralizedState
from .plant import PlantModel, coriolis_matrix, gravity_vector, mass_matrix


def mbar_diagonal(mbar) -> np.ndarray:
    """Return the diagonal of a nominal inertia given as a vector or diagonal matrix."""
    mbar = np.asarray(mbar, dtype=np.float64)
    if mbar.ndim == 2:
        if mbar.shape[0] != mbar.shape[1] or np.any(mbar - np.diag(np.diag(mbar))):
            raise ValueError("nominal inertia must be diagonal")
        mbar = np.diag(mbar)
    if mbar.ndim != 1 or np.any(mbar <= 0):
        raise ValueError("nominal inertia needs strictly positive diagonal entries")
    return mbar


def compute_residual(mbar, tau, chi_ddot) -> np.ndarray:
    """``r = tau - Mbar chi_ddot`` for a constant diagonal ``Mbar``."""
    m = mbar_diagonal(mbar)
    tau = np.asarray(tau, dtype=np.float64)
    chi_ddot = np.asarray(chi_ddot, dtype=np.float64)
    if tau.shape[-1] != m.size or chi_ddot.shape[-1] != m.size:
        raise ValueError(f"vectors must have length {m.size}")
    return tau - m * chi_ddot


def residual_terms(model: PlantModel, state: GeneralizedState, mbar, eta) -> dict[str, np.ndarray]:
    """Term-by-term residual ``(M - Mbar) chi_ddot + C chi_dot + g + d`` at ``state``."""
    m = mbar_diagonal(mbar)
    mp = model.payload.mass_at(state.t)
    M = mass_matrix(model, state.chi, mp)
    C = coriolis_matrix(model, state.chi, state.chi_dot, mp)
    terms = {
        "inertial": np.einsum("...ij,...j->...i", M, state.chi_ddot) - m * state.chi_ddot,
        "coriolis": np.einsum("...ij,...j->...i", C, state.chi_dot),
        "gravity": gravity_vector(model, state.chi, mp),
        "disturbance": np.asarray(model.drag) * state.chi_dot + eta,
    }
    terms["total"] = sum(terms.values())
    return terms
