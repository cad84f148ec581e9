"""
Previsor direto g_θ: mapa linear H -> T com viés, compartilhado entre as D variáveis.
"""
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.errors import DataIOError, InvalidConfigError, InvalidDimensionError, NumericError
from src.objective import ResidualBatch, grad_wrt_residual, quadratic_loss, residual_batch
from src.utils import read_json, read_matrix_csv, write_json, write_matrix_csv
from src.weighting import WeightingParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LinearForecaster:
    weights: np.ndarray   # T×H
    bias: np.ndarray      # T

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        b = np.array(self.bias, dtype=float).reshape(-1)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise InvalidDimensionError(f"weights {w.shape} and bias {b.shape} are inconsistent")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise NumericError("forecaster parameters must be finite")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def horizon(self) -> int:
        return self.weights.shape[0]

    @property
    def history(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True, eq=False)
class ForecasterGrads:
    d_weights: np.ndarray
    d_bias: np.ndarray

    def scaled(self, c: float) -> "ForecasterGrads":
        return ForecasterGrads(self.d_weights * c, self.d_bias * c)


def init_forecaster(history: int, horizon: int, rng: np.random.Generator) -> LinearForecaster:
    """Pesos ~ U[−1/√H, 1/√H], viés zero."""
    if history < 1 or horizon < 1:
        raise InvalidDimensionError(f"history and horizon must be >= 1, got {history}, {horizon}")
    bound = 1.0 / np.sqrt(history)
    return LinearForecaster(rng.uniform(-bound, bound, size=(horizon, history)), np.zeros(horizon))


def _as_batch(m: LinearForecaster, x: np.ndarray) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[1] != m.history:
        raise InvalidDimensionError(f"input must be (H={m.history}, D) per window, got {x.shape}")
    return x, single


def forecast(m: LinearForecaster, x: np.ndarray) -> np.ndarray:
    """(H, D) -> (T, D), ou em lote (B, H, D) -> (B, T, D)."""
    xb, single = _as_batch(m, x)
    if not np.all(np.isfinite(xb)):
        raise NumericError("input window contains non-finite values")
    out = np.einsum("th,bhd->btd", m.weights, xb) + m.bias[None, :, None]
    return out[0] if single else out


def grad_params(m: LinearForecaster, x: np.ndarray, upstream: np.ndarray) -> ForecasterGrads:
    """Regra da cadeia: dW = Σ upstream·xᵀ e db = Σ upstream, somando variáveis e janelas."""
    xb, single = _as_batch(m, x)
    up = np.asarray(upstream, dtype=float)
    if single:
        up = up[None]
    if up.shape != (xb.shape[0], m.horizon, xb.shape[2]):
        raise InvalidDimensionError(f"upstream shape {up.shape} does not match input {xb.shape}")
    return ForecasterGrads(np.einsum("btd,bhd->th", up, xb), up.sum(axis=(0, 2)))


def sgd_step(m: LinearForecaster, grads: ForecasterGrads, lr: float) -> LinearForecaster:
    if lr <= 0:
        raise InvalidConfigError(f"learning rate must be > 0, got {lr}")
    if not (np.all(np.isfinite(grads.d_weights)) and np.all(np.isfinite(grads.d_bias))):
        raise NumericError("non-finite gradient in SGD step")
    return LinearForecaster(m.weights - lr * grads.d_weights, m.bias - lr * grads.d_bias)


def fit_least_squares(x: np.ndarray, y: np.ndarray) -> LinearForecaster:
    """
    Mínimo exato da perda quadrática. Todos os T passos usam o mesmo x̃ = [x; 1],
    então Σ⁻¹(ΘA − C) = 0 reduz-se a ΘA = C: o argmin é o mesmo para qualquer Σ.
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.ndim != 3 or y.ndim != 3 or x.shape[0] != y.shape[0] or x.shape[2] != y.shape[2]:
        raise InvalidDimensionError(f"windows {x.shape}/{y.shape} must be (B, H, D)/(B, T, D)")
    design = np.swapaxes(x, 1, 2).reshape(-1, x.shape[1])            # linhas (janela, variável)
    design = np.column_stack([design, np.ones(design.shape[0])])
    targets = np.swapaxes(y, 1, 2).reshape(-1, y.shape[1])
    theta, _, rank, _ = np.linalg.lstsq(design, targets, rcond=None)  # (H+1)×T
    if rank < design.shape[1]:
        logger.warning("matriz de projeto com posto %d < %d; solução de norma mínima", rank, design.shape[1])
    return LinearForecaster(theta[:-1].T, theta[-1])


# --- PERDA E GRADIENTE (usados nos laços interno e final) ---
def forward(m: LinearForecaster, x: np.ndarray, y: np.ndarray,
            w: WeightingParams) -> Tuple[ResidualBatch, float]:
    batch = residual_batch(y, forecast(m, x))
    return batch, quadratic_loss(batch, w)


def backward(m: LinearForecaster, x: np.ndarray, batch: ResidualBatch,
             w: WeightingParams) -> ForecasterGrads:
    xb, _ = _as_batch(m, x)
    g = grad_wrt_residual(batch, w)                       # (B·D)×T
    n_win, n_var = xb.shape[0], xb.shape[2]
    upstream = -np.swapaxes(g.reshape(n_win, n_var, m.horizon), 1, 2)   # e = Y − ŷ
    return grad_params(m, xb, upstream)


@dataclass
class Adam:
    """Adam para o treino final (β₁=0.9, β₂=0.999, ε=1e-8)."""
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    _m: Optional[Tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False)
    _v: Optional[Tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False)

    def step(self, model: LinearForecaster, grads: ForecasterGrads) -> LinearForecaster:
        if not (np.all(np.isfinite(grads.d_weights)) and np.all(np.isfinite(grads.d_bias))):
            raise NumericError("non-finite gradient in Adam step")
        g = (grads.d_weights, grads.d_bias)
        if self._m is None:
            self._m = tuple(np.zeros_like(a) for a in g)
            self._v = tuple(np.zeros_like(a) for a in g)
        self.t += 1
        self._m = tuple(self.beta1 * m + (1 - self.beta1) * gi for m, gi in zip(self._m, g))
        self._v = tuple(self.beta2 * v + (1 - self.beta2) * gi * gi for v, gi in zip(self._v, g))
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        params = (model.weights, model.bias)
        new = [p - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
               for p, m, v in zip(params, self._m, self._v)]
        return LinearForecaster(*new)


# --- CHECKPOINT (CSV + header.json) ---
def save_checkpoint(m: LinearForecaster, directory: str, n_vars: int,
                    standardization: Optional[Dict[str, Any]] = None) -> None:
    write_matrix_csv(os.path.join(directory, "weights.csv"), m.weights)
    write_matrix_csv(os.path.join(directory, "bias.csv"), m.bias[:, None])
    header = {"history": m.history, "horizon": m.horizon, "variables": n_vars,
              "standardization": standardization or {}}
    write_json(os.path.join(directory, "header.json"), header)
    logger.info("checkpoint salvo em %s", directory)


def load_checkpoint(directory: str) -> Tuple[LinearForecaster, Dict[str, Any]]:
    try:
        header = read_json(os.path.join(directory, "header.json"))
        weights = read_matrix_csv(os.path.join(directory, "weights.csv"))
        bias = read_matrix_csv(os.path.join(directory, "bias.csv")).reshape(-1)
    except (OSError, ValueError) as e:
        raise DataIOError(f"cannot read checkpoint in {directory}: {e}") from None
    m = LinearForecaster(weights, bias)
    if (m.history, m.horizon) != (header.get("history"), header.get("horizon")):
        raise InvalidDimensionError("checkpoint header does not match stored weights")
    return m, header
