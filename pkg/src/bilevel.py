"""
Atualização atômica: N passos de gradiente em θ sobre D_in, depois um passo
em Σ usando D_out. O gradiente externo passa por θ_N(Σ); a ocorrência direta
de Σ na perda externa fica congelada.

Para o modelo linear, com x̃ = [x; 1] e Θ = [W b], o passo interno é
Θ_{k+1} = Θ_k − 2α·P·(Θ_k·A − C), P = Σ⁻¹, A = E[x̃x̃ᵀ], C = E[y·x̃ᵀ] sobre D_in.
A varredura reversa usa esses momentos, sem formar Hessianas.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import cho_solve

from src.data import WindowSet, chrono_split
from src.errors import InvalidConfigError, InvalidDimensionError, InvalidSplitError
from src.model import LinearForecaster, backward, forward, sgd_step
from src.utils import PhaseTimer
from src.weighting import (WeightingParams, apply_gradient, check_conditioning, materialize,
                           normalize_scale, sigma_gradient_to_raw)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SplitPair:
    inner: WindowSet
    outer: WindowSet

    def __post_init__(self):
        if len(self.inner) == 0 or len(self.outer) == 0:
            raise InvalidSplitError("inner and outer splits must be nonempty")
        if (self.inner.history, self.inner.horizon) != (self.outer.history, self.outer.horizon):
            raise InvalidDimensionError("inner and outer splits disagree on H/T")
        # cada janela ocupa os índices start..start+H+T−1; D_in termina antes de D_out começar
        inner_end = int(self.inner.starts.max()) + self.inner.history + self.inner.horizon - 1
        outer_start = int(self.outer.starts.min())
        if inner_end >= outer_start:
            raise InvalidSplitError("inner and outer splits share source indices",
                                    inner_end=inner_end, outer_start=outer_start)


@dataclass(frozen=True)
class AtomicConfig:
    inner_steps: int = 1
    inner_lr: float = 0.05
    eta: float = 0.05
    normalize: bool = True

    def __post_init__(self):
        if self.inner_steps < 1:
            raise InvalidConfigError("inner_steps must be >= 1")
        if self.inner_lr <= 0:
            raise InvalidConfigError("inner_lr must be > 0")
        if self.eta < 0:
            raise InvalidConfigError("eta must be >= 0")


def split_in_out(windows: WindowSet) -> SplitPair:
    """Divisão cronológica 50/50 em D_in e D_out; janelas de D_out que cruzam a fronteira saem."""
    inner, outer = chrono_split(windows, [0.5, 0.5], purge=True)
    return SplitPair(inner, outer)


def _check(model: LinearForecaster, w: WeightingParams, split: SplitPair) -> None:
    if not (model.horizon == w.horizon == split.inner.horizon):
        raise InvalidDimensionError(
            f"horizon mismatch: model {model.horizon}, weighting {w.horizon}, data {split.inner.horizon}")
    if model.history != split.inner.history:
        raise InvalidDimensionError(f"history mismatch: model {model.history}, data {split.inner.history}")
    check_conditioning(w)


def _theta(m: LinearForecaster) -> np.ndarray:
    return np.column_stack([m.weights, m.bias])


def _moments(windows: WindowSet) -> Tuple[np.ndarray, np.ndarray]:
    # uma linha por (janela, variável), como no objetivo
    x = np.swapaxes(windows.x, 1, 2).reshape(-1, windows.history)
    y = np.swapaxes(windows.y, 1, 2).reshape(-1, windows.horizon)
    xt = np.column_stack([x, np.ones(len(x))])
    n = len(xt)
    return xt.T @ xt / n, y.T @ xt / n


def unroll(theta0: LinearForecaster, w: WeightingParams, split: SplitPair, cfg: AtomicConfig,
           timer: Optional[PhaseTimer] = None) -> List[LinearForecaster]:
    """Trajetória θ_0..θ_N do GD de lote completo sobre D_in."""
    _check(theta0, w, split)
    timer = timer or PhaseTimer()
    x, y = split.inner.x, split.inner.y
    trajectory = [theta0]
    for step in range(cfg.inner_steps):
        with timer.phase("inner_fwd"):
            batch, loss = forward(trajectory[-1], x, y, w)
        with timer.phase("inner_bwd"):
            grads = backward(trajectory[-1], x, batch, w)
            trajectory.append(sgd_step(trajectory[-1], grads, cfg.inner_lr))
        logger.debug("passo interno %d: perda %.6g", step + 1, loss)
    return trajectory


def _reverse(trajectory: List[LinearForecaster], w: WeightingParams, split: SplitPair,
             cfg: AtomicConfig, timer: PhaseTimer) -> np.ndarray:
    theta_n = trajectory[-1]
    with timer.phase("outer_fwd"):
        batch, outer_loss = forward(theta_n, split.outer.x, split.outer.y, w)
    with timer.phase("outer_bwd"):
        g = backward(theta_n, split.outer.x, batch, w)      # Σ direto congelado
        adj = np.column_stack([g.d_weights, g.d_bias])
        L = materialize(w)[0]
        a_in, c_in = _moments(split.inner)
        alpha = cfg.inner_lr
        grad_p = np.zeros((w.horizon, w.horizon))
        for k in range(len(trajectory) - 2, -1, -1):
            r_k = _theta(trajectory[k]) @ a_in - c_in
            grad_p -= 2.0 * alpha * adj @ r_k.T
            adj = adj - 2.0 * alpha * cho_solve((L, True), adj) @ a_in
        # P = Σ⁻¹  =>  ∂/∂Σ = −P·G·P
        pg = cho_solve((L, True), grad_p)
        grad_sigma = -cho_solve((L, True), pg.T).T
        grad_raw = sigma_gradient_to_raw(w, grad_sigma)
    logger.debug("perda externa %.6g, |hipergradiente| %.3g", outer_loss, np.linalg.norm(grad_raw))
    return grad_raw


def hypergradient(theta0: LinearForecaster, w: WeightingParams, split: SplitPair, cfg: AtomicConfig,
                  timer: Optional[PhaseTimer] = None) -> np.ndarray:
    timer = timer or PhaseTimer()
    return _reverse(unroll(theta0, w, split, cfg, timer), w, split, cfg, timer)


def atomic_update(model: LinearForecaster, w: WeightingParams, split: SplitPair, cfg: AtomicConfig,
                  timer: Optional[PhaseTimer] = None) -> Tuple[WeightingParams, LinearForecaster]:
    timer = timer or PhaseTimer()
    trajectory = unroll(model, w, split, cfg, timer)
    if cfg.eta == 0:
        return w, trajectory[-1]
    grad = _reverse(trajectory, w, split, cfg, timer)
    new_w = apply_gradient(w, grad, cfg.eta)
    if cfg.normalize:
        new_w = normalize_scale(new_w)
    return new_w, trajectory[-1]
