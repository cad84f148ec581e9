import numpy as np
import pytest

from conftest import finite_difference, windows_from
from src.bilevel import AtomicConfig, SplitPair, atomic_update, hypergradient, split_in_out, unroll
from src.data import SeriesFrame, chrono_split, make_windows
from src.errors import InvalidConfigError, InvalidSplitError
from src.model import LinearForecaster, forward, init_forecaster
from src.utils import PhaseTimer
from src.weighting import WeightingMode, WeightingParams, identity_params, materialize


def make_split(rng, n=40, history=2, horizon=2, n_vars=1, noise=0.5):
    x = rng.normal(size=(2 * n, history, n_vars))
    w_true = rng.normal(size=(horizon, history))
    y = np.einsum("th,bhd->btd", w_true, x) + noise * rng.normal(size=(2 * n, horizon, n_vars))
    y[:, -1] += 0.8 * y[:, 0]       # correlação entre passos do rótulo
    return SplitPair(windows_from(x[:n], y[:n]), windows_from(x[n:], y[n:], start=n))


def outer_loss_at(raw, w0, theta0, split, cfg):
    """Perda externa com θ_N(w) re-executado e o Σ direto fixo em w0."""
    w = WeightingParams(raw, w0.horizon, w0.mode)
    theta_n = unroll(theta0, w, split, cfg)[-1]
    return forward(theta_n, split.outer.x, split.outer.y, w0)[1]


@pytest.mark.parametrize("steps", [1, 3])
def test_hypergradient_matches_finite_differences(rng, steps):
    split = make_split(rng)
    theta0 = init_forecaster(2, 2, rng)
    w0 = WeightingParams([[0.2, 0.0], [0.3, 0.9]], 2)
    cfg = AtomicConfig(inner_steps=steps, inner_lr=0.05)

    got = hypergradient(theta0, w0, split, cfg)
    expected = finite_difference(lambda raw: outer_loss_at(raw, w0, theta0, split, cfg), w0.raw,
                                 mask=np.tril(np.ones((2, 2))))
    assert np.linalg.norm(got - expected) <= 1e-3 * np.linalg.norm(expected)


def test_hypergradient_multivariate_finite_differences(rng):
    split = make_split(rng, n=30, history=3, horizon=3, n_vars=2)
    theta0 = init_forecaster(3, 3, rng)
    w0 = WeightingParams(np.tril(rng.normal(size=(3, 3)) * 0.3), 3)
    cfg = AtomicConfig(inner_steps=2, inner_lr=0.05)

    got = hypergradient(theta0, w0, split, cfg)
    expected = finite_difference(lambda raw: outer_loss_at(raw, w0, theta0, split, cfg), w0.raw,
                                 mask=np.tril(np.ones((3, 3))))
    assert np.linalg.norm(got - expected) <= 1e-3 * np.linalg.norm(expected)


def test_vanishing_inner_rate(rng):
    split = make_split(rng)
    theta0 = init_forecaster(2, 2, rng)
    w0 = identity_params(2)
    big = np.linalg.norm(hypergradient(theta0, w0, split, AtomicConfig(inner_lr=0.05)))
    tiny = np.linalg.norm(hypergradient(theta0, w0, split, AtomicConfig(inner_lr=1e-8)))
    assert tiny < 1e-5 * big


def test_diag_mode_masks_lower(rng):
    split = make_split(rng, history=3, horizon=3)
    w0 = identity_params(3, WeightingMode.DIAG_ONLY)
    g = hypergradient(init_forecaster(3, 3, rng), w0, split, AtomicConfig())
    assert np.all(np.tril(g, -1) == 0)
    assert np.any(np.diag(g) != 0)


def test_eta_zero_keeps_weighting_and_advances_model(rng):
    split = make_split(rng)
    theta0 = init_forecaster(2, 2, rng)
    w0 = WeightingParams([[0.2, 0.0], [0.3, 0.9]], 2)
    cfg = AtomicConfig(inner_steps=4, eta=0.0)
    w1, theta_n = atomic_update(theta0, w0, split, cfg)
    assert w1 is w0
    np.testing.assert_array_equal(theta_n.weights, unroll(theta0, w0, split, cfg)[-1].weights)
    assert not np.array_equal(theta_n.weights, theta0.weights)


def test_zero_outer_residuals_give_zero_hypergradient(rng):
    theta0 = LinearForecaster(rng.normal(size=(2, 3)), rng.normal(size=2))
    x = rng.normal(size=(20, 3, 1))
    y = np.einsum("th,bhd->btd", theta0.weights, x) + theta0.bias[None, :, None]
    split = SplitPair(windows_from(x[:10], y[:10]), windows_from(x[10:], y[10:], start=10))
    w0 = identity_params(2)

    np.testing.assert_allclose(hypergradient(theta0, w0, split, AtomicConfig()), 0.0, atol=1e-12)
    w1, _ = atomic_update(theta0, w0, split, AtomicConfig())
    np.testing.assert_allclose(materialize(w1)[1], np.eye(2), atol=1e-10)


def test_atomic_update_moves_and_normalizes(rng):
    split = make_split(rng)
    w1, _ = atomic_update(init_forecaster(2, 2, rng), identity_params(2), split, AtomicConfig(eta=0.5))
    sigma = materialize(w1)[1]
    assert not np.allclose(sigma, np.eye(2))
    assert np.trace(np.linalg.inv(sigma)) == pytest.approx(2.0)


def test_timer_records_phases(rng):
    split = make_split(rng)
    timer = PhaseTimer()
    atomic_update(init_forecaster(2, 2, rng), identity_params(2), split, AtomicConfig(inner_steps=3), timer)
    assert timer.calls["inner_fwd"] == 3 and timer.calls["inner_bwd"] == 3
    assert timer.calls["outer_fwd"] == 1 and timer.calls["outer_bwd"] == 1


# --- SplitPair / split_in_out ---
def test_split_in_out_halves(rng):
    x = rng.normal(size=(10, 2, 1))
    pair = split_in_out(windows_from(x, x))
    assert (len(pair.inner), len(pair.outer)) == (5, 5)
    assert pair.inner.starts.max() < pair.outer.starts.min()


def test_split_pair_rejects_shared_windows(rng):
    x = rng.normal(size=(6, 2, 1))
    with pytest.raises(InvalidSplitError):
        SplitPair(windows_from(x[:4], x[:4]), windows_from(x[2:], x[2:], start=2))


def test_split_pair_rejects_empty(rng):
    x = rng.normal(size=(4, 2, 1))
    with pytest.raises(InvalidSplitError):
        SplitPair(windows_from(x, x), windows_from(x[:0], x[:0], start=10))


@pytest.mark.parametrize("kwargs", [{"inner_steps": 0}, {"inner_lr": 0.0}, {"eta": -1.0}])
def test_atomic_config_validation(kwargs):
    with pytest.raises(InvalidConfigError):
        AtomicConfig(**kwargs)


def test_split_in_out_source_spans_are_disjoint():
    frame = SeriesFrame(np.arange(200.0), ("v",))
    pair = split_in_out(make_windows(frame, 16, 8))
    inner_end = pair.inner.starts.max() + 16 + 8 - 1
    assert inner_end < pair.outer.starts.min()
    # rótulos de D_in e históricos de D_out não reutilizam nenhum índice
    inner_idx = {int(s) + k for s in pair.inner.starts for k in range(24)}
    outer_idx = {int(s) + k for s in pair.outer.starts for k in range(24)}
    assert not inner_idx & outer_idx
    assert len(pair.inner) + len(pair.outer) == 177 - 23


def test_split_pair_rejects_straddling_windows():
    windows = make_windows(SeriesFrame(np.arange(200.0), ("v",)), 16, 8)
    inner, outer = chrono_split(windows, [0.5, 0.5])
    with pytest.raises(InvalidSplitError):
        SplitPair(inner, outer)


@pytest.mark.parametrize("seed", range(20))
def test_hypergradient_random_instances(seed):
    rng = np.random.default_rng(seed)
    steps = 1 + seed % 3
    history, horizon = int(rng.integers(1, 9)), int(rng.integers(1, 5))
    split = make_split(rng, n=25, history=history, horizon=horizon, n_vars=int(rng.integers(1, 3)))
    theta0 = init_forecaster(history, horizon, rng)
    w0 = WeightingParams(np.tril(rng.normal(size=(horizon, horizon)) * 0.3), horizon)
    cfg = AtomicConfig(inner_steps=steps, inner_lr=0.02)

    got = hypergradient(theta0, w0, split, cfg)
    expected = finite_difference(lambda raw: outer_loss_at(raw, w0, theta0, split, cfg), w0.raw,
                                 mask=np.tril(np.ones((horizon, horizon))))
    assert np.linalg.norm(got - expected) <= 1e-3 * np.linalg.norm(expected)
