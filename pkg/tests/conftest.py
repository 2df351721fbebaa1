import numpy as np
import pytest

from fdtlra.lra import AdapterConfig, AdapterState, adapt_predict, maybe_reset, rls_update


def planted_run(seed, steps, d_k=8, n=3, noise=0.1, cfg=AdapterConfig(), step_at=None, jump=3.0):
    """Adapter on ``r = base + W*^T g + noise`` with ``g ~ N(0, I)``.

    With ``step_at`` set, ``W*`` jumps by ``jump`` times a fresh Gaussian matrix at
    that update.  Returns per-update a priori errors ``r - r_hat`` and the weight
    error ``||W - W*||_F`` (the expected prediction RMS for white ``g``).
    """
    rng = np.random.default_rng(seed)
    W_star = rng.normal(size=(d_k, n))
    state = AdapterState.initial(d_k, n, cfg)
    errs = np.zeros((steps, n))
    w_err = np.zeros(steps)
    resets = np.zeros(steps, dtype=bool)
    for t in range(steps):
        if step_at is not None and t == step_at:
            W_star = W_star + jump * rng.normal(size=(d_k, n))
        g = rng.normal(size=d_k)
        base = rng.normal(size=n)
        r = base + W_star.T @ g + noise * rng.normal(size=n)
        errs[t] = r - adapt_predict(base, g, state)
        rls_update(state, g, r, base, cfg)
        _, resets[t] = maybe_reset(state, cfg)
        w_err[t] = np.linalg.norm(state.W - W_star)
    return errs, w_err, resets


@pytest.fixture
def planted():
    return planted_run


# ---- acceptance bookkeeping: one pass/fail line per criterion at the end of the run ----------

ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """``record(number, ok, detail)`` stores the outcome for the terminal summary and returns ``ok``."""
    results = request.config.stash.setdefault(ACCEPTANCE, {})

    def record(number, ok, detail):
        results[number] = (bool(ok), detail)
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(ACCEPTANCE, None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, detail = results[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
