"""
Objetivo de forma quadrática eᵀΣ⁻¹e e o MSE de referência.

Σ⁻¹ nunca é formada: usamos z = L⁻¹e por substituição triangular.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from src.errors import EmptyInputError, InvalidDimensionError, NumericError
from src.weighting import WeightingParams, check_conditioning, materialize, raw_gradient


@dataclass(frozen=True, eq=False)
class ResidualBatch:
    """Resíduos e = Y − ŷ, uma linha por janela (e por variável), T colunas."""
    residuals: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.residuals, dtype=float)
        if r.ndim == 1:
            r = r[None, :]
        if r.ndim != 2:
            raise InvalidDimensionError(f"residuals must be BxT, got shape {r.shape}")
        if not np.all(np.isfinite(r)):
            raise NumericError("residuals contain non-finite values")
        object.__setattr__(self, "residuals", r)

    @property
    def size(self) -> int:
        return self.residuals.shape[0]

    @property
    def horizon(self) -> int:
        return self.residuals.shape[1]


def residual_batch(y: np.ndarray, y_hat: np.ndarray) -> ResidualBatch:
    """B×T×D (ou T×D) -> linhas (B·D)×T: cada variável conta como caso univariado."""
    y, y_hat = np.asarray(y, dtype=float), np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise InvalidDimensionError(f"label/forecast shape mismatch: {y.shape} vs {y_hat.shape}")
    e = y - y_hat
    if e.ndim == 2:
        e = e[None]
    return ResidualBatch(np.swapaxes(e, 1, 2).reshape(-1, e.shape[1]))


def _check(batch: ResidualBatch, w: WeightingParams) -> np.ndarray:
    if batch.size == 0:
        raise EmptyInputError("empty residual batch")
    if batch.horizon != w.horizon:
        raise InvalidDimensionError(f"batch horizon {batch.horizon} != weighting horizon {w.horizon}")
    check_conditioning(w)
    return materialize(w)[0]


def _whiten(L: np.ndarray, batch: ResidualBatch) -> np.ndarray:
    # z = L⁻¹e para todas as linhas de uma vez (T×B)
    return solve_triangular(L, batch.residuals.T, lower=True)


def quadratic_loss(batch: ResidualBatch, w: WeightingParams) -> float:
    L = _check(batch, w)
    z = _whiten(L, batch)
    return float(np.sum(z * z) / batch.size)


def mse_loss(batch: ResidualBatch) -> float:
    if batch.size == 0:
        raise EmptyInputError("empty residual batch")
    e = batch.residuals
    return float(np.sum(e * e) / batch.size)


def grad_wrt_residual(batch: ResidualBatch, w: WeightingParams) -> np.ndarray:
    """Linha i = (2/B)·Σ⁻¹·e_i."""
    L = _check(batch, w)
    z = _whiten(L, batch)
    return (2.0 / batch.size) * solve_triangular(L, z, lower=True, trans="T").T


def grad_wrt_weighting(batch: ResidualBatch, w: WeightingParams) -> np.ndarray:
    """∂(perda média)/∂raw. Com M = L⁻¹SL⁻ᵀ: ∂/∂L = −2·L⁻ᵀM."""
    L = _check(batch, w)
    z = _whiten(L, batch)
    m = (z @ z.T) / batch.size
    grad_L = -2.0 * solve_triangular(L, m, lower=True, trans="T")
    return raw_gradient(w, grad_L)


# --- MÉTRICAS DE AVALIAÇÃO (por elemento) ---
def mse_per_element(batch: ResidualBatch) -> float:
    if batch.size == 0:
        raise EmptyInputError("empty residual batch")
    return float(np.mean(batch.residuals ** 2))


def mae(batch: ResidualBatch) -> float:
    if batch.size == 0:
        raise EmptyInputError("empty residual batch")
    return float(np.mean(np.abs(batch.residuals)))
