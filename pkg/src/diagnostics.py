"""
Correlação parcial e variância condicional dos passos do rótulo dado o histórico:
cada Y_t é regredido (OLS, com intercepto) em X; os resíduos são correlacionados
por Pearson.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Tuple

import numpy as np
from scipy import linalg, stats

from src.data import SeriesFrame, WindowSet, make_windows
from src.errors import InsufficientDataError, InvalidDimensionError, UndefinedCorrelationError
from src.utils import rng_stream

logger = logging.getLogger(__name__)

RIDGE_LAMBDA = 1e-8
MIN_RESID_VAR = 1e-12


@dataclass(frozen=True, eq=False)
class PartialCorrReport:
    matrix: np.ndarray        # T×T, diagonal 1
    cond_var: np.ndarray      # T
    meta: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self, threshold: float = 0.1) -> Dict[str, Any]:
        return {f"fraction_above_{threshold:g}": fraction_above(self, threshold),
                "cond_var": self.cond_var.tolist(), "meta": self.meta}


def _design(windows: WindowSet) -> np.ndarray:
    x = windows.x.reshape(len(windows), -1)
    return np.column_stack([np.ones(len(x)), x])


def _residuals(design: np.ndarray, targets: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Resíduos OLS de todas as colunas de `targets` de uma vez; ridge se o posto for deficiente."""
    rank = np.linalg.matrix_rank(design)
    if rank < design.shape[1]:
        logger.warning("matriz de regressão com posto %d < %d: ridge λ=%g", rank, design.shape[1], RIDGE_LAMBDA)
        gram = design.T @ design + RIDGE_LAMBDA * np.eye(design.shape[1])
        beta = linalg.solve(gram, design.T @ targets, assume_a="pos")
        return targets - design @ beta, True
    beta, *_ = np.linalg.lstsq(design, targets, rcond=None)
    return targets - design @ beta, False


def _check_samples(windows: WindowSet) -> None:
    needed = windows.history * windows.n_vars + 3
    if len(windows) < needed:
        raise InsufficientDataError(f"{len(windows)} windows, need at least {needed} for the regression")


def partial_correlation(windows: WindowSet, t: int, t2: int, variable: int = 0) -> float:
    if t == t2:
        raise InvalidDimensionError("partial correlation needs two distinct label steps")
    if not (0 <= t < windows.horizon and 0 <= t2 < windows.horizon):
        raise InvalidDimensionError(f"label steps must lie in [0, {windows.horizon})")
    if not 0 <= variable < windows.n_vars:
        raise InvalidDimensionError(f"variable index {variable} out of range")
    _check_samples(windows)
    targets = windows.y[:, [t, t2], variable]
    resid, degraded = _residuals(_design(windows), targets)
    if np.any(resid.var(axis=0) < MIN_RESID_VAR):
        raise UndefinedCorrelationError("residual variance is ~0; correlation undefined",
                                        steps=[t, t2], degraded=degraded)
    return float(stats.pearsonr(resid[:, 0], resid[:, 1])[0])


def partial_corr_matrix(frame: SeriesFrame, history: int = 8, horizon: int = 96,
                        subsample: int = 5000, variable: int = 0, seed: int = 0) -> PartialCorrReport:
    """Todos os pares via resíduos compartilhados: T regressões, não T²."""
    windows = make_windows(frame, history, horizon)
    if len(windows) > subsample:
        idx = np.sort(rng_stream(seed, "subsample").choice(len(windows), size=subsample, replace=False))
        windows = windows.take(idx)
    _check_samples(windows)
    if not 0 <= variable < windows.n_vars:
        raise InvalidDimensionError(f"variable index {variable} out of range")

    resid, degraded = _residuals(_design(windows), windows.y[:, :, variable])
    cond_var = resid.var(axis=0)
    flat = np.flatnonzero(cond_var < MIN_RESID_VAR)
    if flat.size:
        raise UndefinedCorrelationError("residual variance is ~0 for some label steps",
                                        steps=flat.tolist(), degraded=degraded)
    corr = np.clip(np.corrcoef(resid, rowvar=False), -1.0, 1.0)
    corr = (corr + corr.T) / 2.0
    np.fill_diagonal(corr, 1.0)
    meta = {"history": history, "horizon": horizon, "samples": len(windows),
            "variable": variable, "variable_name": frame.names[variable], "degraded": degraded,
            "source": frame.source}
    return PartialCorrReport(corr, cond_var, meta)


def fraction_above(report: PartialCorrReport, threshold: float) -> float:
    t = report.matrix.shape[0]
    if t < 2:
        return 0.0
    off = ~np.eye(t, dtype=bool)
    return float(np.mean(np.abs(report.matrix[off]) > threshold))


def covariance_to_correlation(cov: np.ndarray) -> np.ndarray:
    """Correlação parcial implícita numa covariância condicional."""
    d = np.sqrt(np.diag(cov))
    corr = cov / np.outer(d, d)
    np.fill_diagonal(corr, 1.0)
    return corr
