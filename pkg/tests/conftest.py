import numpy as np
import pytest

from src.data import SeriesFrame, WindowSet, make_windows
from src.model import LinearForecaster


def finite_difference(func, x0, eps=1e-5, mask=None):
    """Gradiente por diferenças centradas de `func` em relação a cada entrada de `x0`."""
    x0 = np.asarray(x0, dtype=float)
    grad = np.zeros_like(x0)
    for j in np.ndindex(x0.shape):
        if mask is not None and not mask[j]:
            continue
        x = x0.copy()
        x[j] = x0[j] + eps
        fplus = func(x)
        x[j] = x0[j] - eps
        fminus = func(x)
        grad[j] = (fplus - fminus) / (2 * eps)
    return grad


def windows_from(x, y, start=0):
    """
    WindowSet direto de arrays (B, H, D) / (B, T, D). As janelas ficam lado a lado
    na série de origem: a j-ésima começa em (start + j)·(H+T).
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    span = x.shape[1] + y.shape[1]
    return WindowSet(x.shape[1], y.shape[1], x, y, (start + np.arange(len(x))) * span)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def linear_windows(rng):
    """Processo linear sem ruído: Y = W*·X + b*, H=4, T=3, D=2."""
    w_true = rng.normal(size=(3, 4)) * 0.5
    b_true = rng.normal(size=3) * 0.1
    x = rng.normal(size=(120, 4, 2))
    y = np.einsum("th,bhd->btd", w_true, x) + b_true[None, :, None]
    return windows_from(x, y), LinearForecaster(w_true, b_true)


@pytest.fixture
def noisy_windows(rng):
    x = rng.normal(size=(80, 3, 1))
    y = x[:, :2] * 0.7 + rng.normal(size=(80, 2, 1)) * 0.3
    return windows_from(x, y)


@pytest.fixture
def ramp_frame():
    return SeriesFrame(np.arange(1.0, 31.0), ("v",), source="ramp")


@pytest.fixture
def ramp_windows(ramp_frame):
    return make_windows(ramp_frame, 4, 2)
