from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .tensor import Tape, Tensor


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_param: dict[str, float] = field(default_factory=dict)
    n_checked: int = 0
    tol: float = 1e-4

    @property
    def ok(self) -> bool:
        return self.max_rel_error < self.tol


def _rel_err(a: float, b: float, abs_floor: float) -> float:
    diff = abs(a - b)
    scale = max(abs(a), abs(b))
    if scale < abs_floor:
        # both gradients are numerically zero
        return 0.0 if diff < abs_floor else diff / abs_floor
    return diff / scale


def grad_check(f: Callable[[Mapping[str, Tensor]], Tensor], params: Mapping[str, Tensor],
               h: float = 1e-5, tol: float = 1e-4, max_entries: int | None = None,
               rng: np.random.Generator | None = None, abs_floor: float = 1e-8) -> GradCheckReport:
    """Compare tape gradients of scalar ``f(params)`` with central differences.

    ``max_entries`` caps how many coordinates of each parameter are probed
    (chosen at random with ``rng``); ``None`` probes every coordinate.
    """
    for p in params.values():
        p.grad = None
    with Tape() as tape:
        loss = f(params)
    tape.backward(loss)
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.value))
                for k, p in params.items()}

    rng = rng or np.random.default_rng(0)
    report = GradCheckReport(max_rel_error=0.0, tol=tol)
    for name, p in params.items():
        flat = p.value.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = rng.choice(flat.size, size=max_entries, replace=False)
        worst = 0.0
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp = float(f(params).value)
            flat[i] = orig - h
            fm = float(f(params).value)
            flat[i] = orig
            numeric = (fp - fm) / (2.0 * h)
            worst = max(worst, _rel_err(float(analytic[name].reshape(-1)[i]), numeric, abs_floor))
            report.n_checked += 1
        report.per_param[name] = worst
        report.max_rel_error = max(report.max_rel_error, worst)
    for p in params.values():
        p.grad = None
    return report
