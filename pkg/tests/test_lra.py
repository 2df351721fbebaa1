import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdtlra.lra import (TRACE_COLUMNS, AdapterConfig, AdapterState, adapt_predict, maybe_reset, ridge_solution,
                        rls_update, trace_row, weighted_objective)


def _stream(seed, T, d_k=5, n=2):
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(T, d_k))
    B = rng.normal(size=(T, n))
    R = B + G @ rng.normal(size=(d_k, n)) + 0.3 * rng.normal(size=(T, n))
    return G, B, R


# ------------------------------------------------------------ prediction

def test_zero_weights_return_base():
    st_ = AdapterState.initial(4, 3)
    base = np.array([1.0, -2.0, 0.5])
    np.testing.assert_array_equal(adapt_predict(base, np.ones(4), st_), base)


def test_zero_latent_returns_base():
    st_ = AdapterState.initial(4, 3)
    st_.W[...] = np.random.default_rng(0).normal(size=(4, 3))
    base = np.array([1.0, -2.0, 0.5])
    np.testing.assert_array_equal(adapt_predict(base, np.zeros(4), st_), base)


def test_planted_weights_reproduce_product():
    rng = np.random.default_rng(1)
    st_ = AdapterState.initial(6, 3)
    W = rng.normal(size=(6, 3))
    st_.W[...] = W
    g = rng.normal(size=6)
    out = adapt_predict(np.zeros(3), g, st_)
    expect = [sum(W[i, j] * g[i] for i in range(6)) for j in range(3)]
    np.testing.assert_allclose(out, expect, rtol=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_prediction_is_linear_in_latent_and_weights(seed, a, b):
    rng = np.random.default_rng(seed)
    W1, W2 = rng.normal(size=(2, 4, 2))
    g1, g2 = rng.normal(size=(2, 4))
    s = AdapterState.initial(4, 2)
    zero = np.zeros(2)
    s.W[...] = W1
    lhs = adapt_predict(zero, a * g1 + b * g2, s)
    np.testing.assert_allclose(lhs, a * adapt_predict(zero, g1, s) + b * adapt_predict(zero, g2, s), atol=1e-12)
    s.W[...] = a * W1 + b * W2
    lhs = adapt_predict(zero, g1, s)
    s1, s2 = AdapterState.initial(4, 2), AdapterState.initial(4, 2)
    s1.W[...], s2.W[...] = W1, W2
    np.testing.assert_allclose(lhs, a * adapt_predict(zero, g1, s1) + b * adapt_predict(zero, g1, s2), atol=1e-12)


def test_shape_mismatch_raises():
    with pytest.raises(ValueError):
        adapt_predict(np.zeros(3), np.zeros(5), AdapterState.initial(4, 3))


# ------------------------------------------------------------ update

def test_zero_innovation_leaves_weights():
    cfg = AdapterConfig()
    s = AdapterState.initial(4, 2, cfg)
    s.W[...] = np.random.default_rng(0).normal(size=(4, 2))
    g, base = np.ones(4), np.array([0.3, -0.1])
    r = adapt_predict(base, g, s)
    W0 = s.W.copy()
    _, eps = rls_update(s, g, r, base, cfg)
    np.testing.assert_array_equal(eps, 0.0)
    np.testing.assert_array_equal(s.W, W0)
    assert not np.array_equal(s.Sigma, np.eye(4))  # covariance still shrinks along g


def test_update_step_by_hand():
    cfg = AdapterConfig(lam=0.95, alpha_ema=0.8)
    rng = np.random.default_rng(3)
    s = AdapterState.initial(3, 2, cfg)
    s.W[...] = rng.normal(size=(3, 2))
    A = rng.normal(size=(3, 3))
    s.Sigma[...] = A @ A.T + np.eye(3)
    s.eps_ema[...] = [0.5, -0.2]
    W, S, ema = s.W.copy(), s.Sigma.copy(), s.eps_ema.copy()
    g, r, base = rng.normal(size=3), rng.normal(size=2), rng.normal(size=2)
    rls_update(s, g, r, base, cfg)
    eps = r - base - W.T @ g
    K = S @ g / (0.95 + g @ S @ g)
    np.testing.assert_allclose(s.W, W + np.outer(K, eps), atol=1e-13)
    np.testing.assert_allclose(s.Sigma, (S - np.outer(K, g) @ S) / 0.95, atol=1e-12)
    np.testing.assert_allclose(s.eps_ema, 0.8 * ema + 0.2 * eps, atol=1e-15)
    assert s.steps == 1


@pytest.mark.parametrize("T", [1, 7, 50, 200])
@pytest.mark.parametrize("sigma0", [0.3, 1.0, 10.0])
def test_unit_forgetting_matches_ridge(T, sigma0):
    cfg = AdapterConfig(lam=1.0, sigma0=sigma0, reset_enabled=False)
    G, B, R = _stream(T, T)
    s = AdapterState.initial(G.shape[1], R.shape[1], cfg)
    for g, b, r in zip(G, B, R):
        rls_update(s, g, r, b, cfg)
    W = ridge_solution(G, R - B, sigma0)
    assert np.linalg.norm(s.W - W) < 1e-8


def test_forgetting_matches_weighted_ridge():
    cfg = AdapterConfig(lam=0.97, sigma0=2.0, reset_enabled=False)
    G, B, R = _stream(5, 120)
    s = AdapterState.initial(5, 2, cfg)
    for g, b, r in zip(G, B, R):
        rls_update(s, g, r, b, cfg)
    assert np.linalg.norm(s.W - ridge_solution(G, R - B, 2.0, lam=0.97)) < 1e-8


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(1e-3, 1.0))
def test_gain_denominator_positive(seed, lam):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(4, 4))
    S = A @ A.T + 1e-6 * np.eye(4)
    g = rng.normal(size=4) * rng.uniform(0, 100)
    assert lam + g @ S @ g > 0


def test_covariance_stays_spd_over_many_updates():
    cfg = AdapterConfig(lam=0.99, reset_enabled=False)
    rng = np.random.default_rng(0)
    B, d_k = 20, 6
    s = AdapterState.initial(d_k, 2, cfg, (B,))
    worst = np.inf
    for t in range(5000):  # 20 streams x 5000 = 1e5 updates
        g = rng.normal(size=(B, d_k)) * rng.uniform(0.01, 10, size=(B, 1))
        rls_update(s, g, rng.normal(size=(B, 2)), np.zeros((B, 2)), cfg)
        if t % 50 == 0:
            worst = min(worst, np.linalg.eigvalsh(s.Sigma).min())
            assert np.allclose(s.Sigma, np.swapaxes(s.Sigma, -1, -2), atol=0)
    assert worst > 0 and np.linalg.eigvalsh(s.Sigma).min() > 0


def test_batched_update_matches_individual():
    cfg = AdapterConfig(lam=0.98)
    rng = np.random.default_rng(2)
    G, R, Bs = rng.normal(size=(30, 3, 4)), rng.normal(size=(30, 3, 2)), rng.normal(size=(30, 3, 2))
    batch = AdapterState.initial(4, 2, cfg, (3,))
    singles = [AdapterState.initial(4, 2, cfg) for _ in range(3)]
    for t in range(30):
        rls_update(batch, G[t], R[t], Bs[t], cfg)
        for i, s in enumerate(singles):
            rls_update(s, G[t, i], R[t, i], Bs[t, i], cfg)
    for i, s in enumerate(singles):
        np.testing.assert_allclose(batch.W[i], s.W, atol=1e-13)
        np.testing.assert_allclose(batch.Sigma[i], s.Sigma, atol=1e-13)


def test_non_finite_inputs_rejected():
    s = AdapterState.initial(2, 1)
    with pytest.raises(FloatingPointError):
        rls_update(s, [np.nan, 0.0], [1.0], [0.0], AdapterConfig())


def test_trace_cap_bounds_covariance():
    cfg = AdapterConfig(lam=0.9, trace_cap=5.0, reset_enabled=False)
    s = AdapterState.initial(4, 1, cfg)
    for _ in range(200):  # no excitation: plain RLS would blow Sigma up as lam^-t
        rls_update(s, np.zeros(4), [0.0], [0.0], cfg)
    assert np.trace(s.Sigma) <= 5.0 + 1e-12


def test_state_holds_no_model_parameters():
    fields = {f.name for f in dataclasses.fields(AdapterState)}
    assert fields == {"W", "Sigma", "eps_ema", "steps", "resets"}


@pytest.mark.parametrize("bad", [dict(lam=0.0), dict(lam=1.1), dict(sigma0=0.0), dict(alpha_ema=1.0),
                                 dict(delta_thresh=-1.0), dict(reset_decay=2.0), dict(trace_cap=0.0)])
def test_config_ranges(bad):
    with pytest.raises(ValueError):
        AdapterConfig(**bad)


# ------------------------------------------------------------ reset

def test_reset_threshold_is_strict():
    cfg = AdapterConfig(delta_thresh=3.2)
    s = AdapterState.initial(3, 2, cfg)
    s.Sigma[...] = 0.01 * np.eye(3)
    s.eps_ema[...] = [3.2, 0.0]
    _, fired = maybe_reset(s, cfg)
    assert not fired and np.allclose(s.Sigma, 0.01 * np.eye(3))
    s.eps_ema[...] = [3.2 + 1e-9, 0.0]
    _, fired = maybe_reset(s, cfg)
    assert fired


def test_reset_restores_default_covariance_keeps_weights():
    cfg = AdapterConfig()
    assert (cfg.sigma0, cfg.delta_thresh, cfg.lam) == (1.0, 3.2, 0.99)
    s = AdapterState.initial(3, 2, cfg)
    s.W[...] = 1.5
    s.Sigma[...] = 0.02 * np.eye(3)
    s.eps_ema[...] = [4.0, 0.0]
    _, fired = maybe_reset(s, cfg)
    assert fired and s.resets == 1
    np.testing.assert_array_equal(s.Sigma, np.eye(3))
    np.testing.assert_array_equal(s.W, 1.5)
    np.testing.assert_allclose(s.eps_ema, [2.0, 0.0])


def test_reset_disabled_never_fires():
    cfg = AdapterConfig(reset_enabled=False)
    s = AdapterState.initial(2, 1, cfg)
    s.eps_ema[...] = 100.0
    assert not maybe_reset(s, cfg)[1]


def test_batched_reset_only_where_triggered():
    cfg = AdapterConfig()
    s = AdapterState.initial(2, 1, cfg, (3,))
    s.Sigma[...] = 0.1 * np.eye(2)
    s.eps_ema[:, 0] = [0.0, 5.0, 1.0]
    _, fired = maybe_reset(s, cfg)
    np.testing.assert_array_equal(fired, [False, True, False])
    np.testing.assert_array_equal(s.Sigma[1], np.eye(2))
    np.testing.assert_array_equal(s.Sigma[0], 0.1 * np.eye(2))
    np.testing.assert_array_equal(s.resets, [0, 1, 0])


def test_step_change_triggers_reset(planted):
    _, _, resets = planted(0, 400, step_at=200)
    assert not resets[:200].any() and resets[200:230].any()


# ------------------------------------------------------------ objective

def test_objective_empty_and_perfect_fit():
    assert weighted_objective([], np.zeros((2, 1)), 0.9) == 0.0
    W = np.array([[2.0], [-1.0]])
    g = np.array([0.5, 3.0])
    assert weighted_objective([(g, np.array([1.0]), 1.0 + W.T @ g)], W, 0.99) == 0.0


def test_batch_solution_is_local_minimum():
    G, B, R = _stream(9, 60)
    W = ridge_solution(G, R - B, sigma0=1e12)  # vanishing prior: plain least squares
    hist = list(zip(G, B, R))
    f0 = weighted_objective(hist, W, 1.0)
    rng = np.random.default_rng(0)
    for _ in range(100):
        assert weighted_objective(hist, W + 1e-3 * rng.normal(size=W.shape), 1.0) >= f0


def test_recursion_minimizes_regularized_objective():
    cfg = AdapterConfig(lam=0.95, sigma0=1.0, reset_enabled=False)
    G, B, R = _stream(4, 80)
    s = AdapterState.initial(5, 2, cfg)
    for g, b, r in zip(G, B, R):
        rls_update(s, g, r, b, cfg)
    hist = list(zip(G, B, R))

    def objective(W):
        return weighted_objective(hist, W, 0.95) + 0.95**80 * np.sum(W**2) / 1.0

    f0 = objective(s.W)
    rng = np.random.default_rng(1)
    assert all(objective(s.W + 1e-4 * rng.normal(size=s.W.shape)) >= f0 for _ in range(100))


# ------------------------------------------------------------ adaptation behaviour

def test_planted_model_noise_floor(planted):
    errs, _, _ = planted(3, 500, noise=0.1)
    rms = np.sqrt(np.mean(errs[400:] ** 2))
    assert abs(rms - 0.1) < 0.01


def test_trace_row_layout():
    s = AdapterState.initial(2, 2)
    row = trace_row(0.5, s, np.array([3.0, 4.0]), True)
    assert len(row) == len(TRACE_COLUMNS) and row[:4] == (0.5, 5.0, 0.0, 1) and row[4] == 2.0
