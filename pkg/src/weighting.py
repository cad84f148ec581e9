"""
Matriz de ponderação aprendível Σ = L·Lᵀ.

L é triangular inferior: entradas abaixo da diagonal vêm direto de `raw`,
a diagonal passa por softplus (com piso) para manter Σ positiva definida.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Tuple, Union

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from src.errors import ConditioningError, InvalidDimensionError
from src.utils import MATRIX_FORMAT, read_matrix_csv, write_matrix_csv

logger = logging.getLogger(__name__)

SOFTPLUS_FLOOR = 1e-6


class WeightingMode(str, Enum):
    FULL = "full"
    DIAG_ONLY = "diag"          # só heterocedasticidade (diagonal livre)
    OFFDIAG_ONLY = "offdiag"    # só autocorrelação (diagonal fixa em 1)

    @classmethod
    def parse(cls, value: Union[str, "WeightingMode"]) -> "WeightingMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown weighting mode '{value}'") from None


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def softplus_inv(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return y + np.log(-np.expm1(-y))


def sigmoid(x: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -x))


@dataclass(frozen=True, eq=False)
class WeightingParams:
    raw: np.ndarray
    horizon: int
    mode: WeightingMode = WeightingMode.FULL

    def __post_init__(self):
        raw = np.array(self.raw, dtype=float)
        if raw.shape != (self.horizon, self.horizon):
            raise InvalidDimensionError(
                f"raw must be {self.horizon}x{self.horizon}, got {raw.shape}")
        raw = np.tril(raw)
        raw.setflags(write=False)
        object.__setattr__(self, "raw", raw)
        object.__setattr__(self, "mode", WeightingMode.parse(self.mode))

    @property
    def diag_softplus(self) -> np.ndarray:
        return softplus(np.diag(self.raw))


def identity_params(horizon: int, mode: WeightingMode = WeightingMode.FULL) -> WeightingParams:
    if horizon < 1:
        raise InvalidDimensionError(f"horizon must be >= 1, got {horizon}")
    raw = np.diag(np.full(horizon, softplus_inv(1.0)))
    return WeightingParams(raw, horizon, mode)


def gradient_mask(horizon: int, mode: WeightingMode) -> np.ndarray:
    """1 nas entradas de `raw` que recebem gradiente no modo dado."""
    mode = WeightingMode.parse(mode)
    if mode is WeightingMode.DIAG_ONLY:
        return np.eye(horizon)
    if mode is WeightingMode.OFFDIAG_ONLY:
        return np.tril(np.ones((horizon, horizon)), -1)
    return np.tril(np.ones((horizon, horizon)))


def materialize(params: WeightingParams) -> Tuple[np.ndarray, np.ndarray]:
    if params.mode is WeightingMode.DIAG_ONLY:
        L = np.zeros_like(params.raw)
    else:
        L = np.tril(params.raw, -1)
    if params.mode is WeightingMode.OFFDIAG_ONLY:
        diag = np.ones(params.horizon)
    else:
        diag = np.maximum(params.diag_softplus, SOFTPLUS_FLOOR)
    L[np.diag_indices(params.horizon)] = diag
    return L, L @ L.T


def check_conditioning(params: WeightingParams) -> None:
    """Falha se alguma diagonal de L (antes do piso) ficou abaixo do piso."""
    if params.mode is WeightingMode.OFFDIAG_ONLY:
        return
    d = params.diag_softplus
    bad = np.flatnonzero(d < SOFTPLUS_FLOOR)
    if bad.size:
        raise ConditioningError("weighting matrix is numerically singular",
                                indices=bad.tolist(), min_diag=float(d.min()))


def normalize_scale(params: WeightingParams) -> WeightingParams:
    """Reescala Σ para c·Σ com trace((c·Σ)⁻¹) = T; o argmin do objetivo não muda."""
    check_conditioning(params)
    if params.mode is WeightingMode.OFFDIAG_ONLY:
        # diagonal de L fixa em 1: não há grau de liberdade de escala
        return params
    L, _ = materialize(params)
    L_inv = solve_triangular(L, np.eye(params.horizon), lower=True)
    c = np.sum(L_inv ** 2) / params.horizon
    root = np.sqrt(c)
    raw = np.tril(params.raw, -1) * root
    raw[np.diag_indices(params.horizon)] = softplus_inv(np.diag(L) * root)
    return WeightingParams(raw, params.horizon, params.mode)


def frobenius_distance(a: WeightingParams, b: WeightingParams) -> float:
    if a.horizon != b.horizon:
        raise InvalidDimensionError(f"horizon mismatch: {a.horizon} vs {b.horizon}")
    return float(np.linalg.norm(materialize(a)[1] - materialize(b)[1], "fro"))


# --- GRADIENTES E ATUALIZAÇÃO ---
def raw_gradient(params: WeightingParams, grad_L: np.ndarray) -> np.ndarray:
    """Encadeia um gradiente em L até `raw` (softplus + piso + máscara do modo)."""
    g = np.tril(np.asarray(grad_L, dtype=float))
    d = np.diag(params.raw)
    active = params.diag_softplus > SOFTPLUS_FLOOR
    g[np.diag_indices(params.horizon)] = np.diag(g) * sigmoid(d) * active
    return g * gradient_mask(params.horizon, params.mode)


def sigma_gradient_to_raw(params: WeightingParams, grad_sigma: np.ndarray) -> np.ndarray:
    """Gradiente em Σ (não necessariamente simétrico) -> gradiente em `raw`, via Σ = L·Lᵀ."""
    L, _ = materialize(params)
    grad_L = (grad_sigma + grad_sigma.T) @ L
    return raw_gradient(params, grad_L)


def apply_gradient(params: WeightingParams, grad: np.ndarray, rate: float) -> WeightingParams:
    step = rate * np.asarray(grad, dtype=float) * gradient_mask(params.horizon, params.mode)
    return WeightingParams(params.raw - step, params.horizon, params.mode)


def from_sigma(sigma: np.ndarray, mode: WeightingMode = WeightingMode.FULL) -> WeightingParams:
    """Parâmetros a partir de uma Σ simétrica positiva definida (ex.: covariância oráculo)."""
    sigma = np.asarray(sigma, dtype=float)
    try:
        L = cholesky(sigma, lower=True)
    except np.linalg.LinAlgError as e:
        raise ConditioningError(f"matrix is not positive definite: {e}") from None
    raw = np.tril(L, -1)
    raw[np.diag_indices(len(L))] = softplus_inv(np.diag(L))
    return WeightingParams(raw, len(L), mode)


# --- DUMP CSV ---
def dump_sigma(params: WeightingParams, path: str) -> None:
    write_matrix_csv(path, materialize(params)[1])
    logger.info("Σ (%dx%d) gravada em %s com formato %s", params.horizon, params.horizon,
                path, MATRIX_FORMAT)


def load_sigma(path: str, mode: WeightingMode = WeightingMode.FULL) -> WeightingParams:
    sigma = read_matrix_csv(path)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise InvalidDimensionError(f"Σ dump must be square, got {sigma.shape}")
    return from_sigma(sigma, mode)
