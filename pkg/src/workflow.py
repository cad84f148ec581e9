"""
Fluxo completo: aprende Σ sobre K subconjuntos cronológicos do treino,
congela Σ e treina o modelo final (Adam em mini-lotes ou mínimos quadrados exatos).
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from src.bilevel import AtomicConfig, SplitPair, atomic_update, split_in_out
from src.config import QdfConfig
from src.data import WindowSet, chrono_split
from src.errors import InvalidDimensionError, InvalidSplitError
from src.model import (Adam, LinearForecaster, backward, fit_least_squares, forecast, forward,
                       init_forecaster)
from src.objective import mae, mse_per_element, quadratic_loss, residual_batch
from src.utils import PhaseTimer, rng_stream
from src.weighting import (WeightingMode, WeightingParams, frobenius_distance, identity_params,
                           materialize)

logger = logging.getLogger(__name__)

REPORT_SCHEMA = 1


class Variant(str, Enum):
    DF = "df"
    QDF_DIAG = "qdf-diag"          # só diagonal (heterocedasticidade)
    QDF_OFFDIAG = "qdf-offdiag"    # só fora da diagonal (autocorrelação)
    QDF_FULL = "qdf"

    @property
    def mode(self) -> WeightingMode:
        return {Variant.QDF_DIAG: WeightingMode.DIAG_ONLY,
                Variant.QDF_OFFDIAG: WeightingMode.OFFDIAG_ONLY}.get(self, WeightingMode.FULL)


class WeightingResult(NamedTuple):
    params: WeightingParams
    trace: List[float]

    @property
    def rounds(self) -> int:
        return len(self.trace)


def atomic_config(cfg: QdfConfig) -> AtomicConfig:
    return AtomicConfig(cfg.inner_steps, cfg.inner_lr, cfg.eta, cfg.normalize)


# --- FASE 2: APRENDIZADO DE Σ ---
def weighting_pairs(train: WindowSet, k: int) -> List[SplitPair]:
    """K subconjuntos cronológicos sem índices de origem em comum, cada um em (D_in, D_out)."""
    return [split_in_out(part) for part in chrono_split(train, [1.0 / k] * k, purge=True)]


def learn_weighting(train: WindowSet, model_init: LinearForecaster, cfg: QdfConfig,
                    timer: Optional[PhaseTimer] = None) -> WeightingResult:
    k = cfg.k_splits
    if len(train) < 2 * k:
        raise InvalidSplitError(f"{len(train)} training windows are too few for K={k} splits")
    timer = timer or PhaseTimer()
    pairs = weighting_pairs(train, k)
    acfg = atomic_config(cfg)

    w = identity_params(train.horizon, cfg.mode)
    model = model_init
    trace: List[float] = []
    for rnd in range(cfg.outer_rounds):
        prev = w
        for pair in pairs:
            if cfg.reset_theta:
                model = model_init
            w, model = atomic_update(model, w, pair, acfg, timer)
        delta = frobenius_distance(w, prev)
        trace.append(delta)
        logger.info("rodada %d/%d: ‖ΔΣ‖_F = %.3e", rnd + 1, cfg.outer_rounds, delta)
        if delta < cfg.tol:
            break
    return WeightingResult(w, trace)


# --- FASE 3: TREINO FINAL ---
def _fit_valid(train: WindowSet, valid: Optional[WindowSet], cfg: QdfConfig) -> Tuple[WindowSet, WindowSet]:
    if valid is not None:
        return train, valid
    fit, held = chrono_split(train, [1.0 - cfg.valid_fraction, cfg.valid_fraction], purge=True)
    return fit, held


def train_final(train: WindowSet, w: WeightingParams, model_init: LinearForecaster, cfg: QdfConfig,
                valid: Optional[WindowSet] = None, timer: Optional[PhaseTimer] = None) -> LinearForecaster:
    """
    Adam em mini-lotes sob Σ fixa; parada antecipada pela perda de validação (paciência).
    Com `final_solver="lstsq"` o mínimo exato é resolvido direto sobre todo o treino.
    """
    if w.horizon != train.horizon:
        raise InvalidDimensionError(f"weighting horizon {w.horizon} != data horizon {train.horizon}")
    timer = timer or PhaseTimer()
    if cfg.final_solver == "lstsq":
        with timer.phase("final_train"):
            model = fit_least_squares(train.x, train.y)
        logger.info("mínimos quadrados em %d janelas: perda %.6g", len(train),
                    forward(model, train.x, train.y, w)[1])
        return model

    fit, valid = _fit_valid(train, valid, cfg)
    rng = rng_stream(cfg.seed, "batch")
    opt = Adam(lr=cfg.final_lr)

    with timer.phase("final_train"):
        x, y = fit.x, fit.y
        vx, vy = valid.x, valid.y
        model = best = model_init
        best_val = forward(model, vx, vy, w)[1]
        wait = 0
        for epoch in range(cfg.epochs):
            order = rng.permutation(len(fit))
            for lo in range(0, len(order), cfg.batch_size):
                idx = order[lo:lo + cfg.batch_size]
                batch, _ = forward(model, x[idx], y[idx], w)
                model = opt.step(model, backward(model, x[idx], batch, w))
            val = forward(model, vx, vy, w)[1]
            logger.info("época %d: perda de validação %.6g", epoch + 1, val)
            if val < best_val:
                best, best_val, wait = model, val, 0
            else:
                wait += 1
                if wait >= cfg.patience:
                    logger.info("parada antecipada na época %d", epoch + 1)
                    break
    return best


def select_final_lr(train: WindowSet, w: WeightingParams, model_init: LinearForecaster, cfg: QdfConfig,
                    valid: Optional[WindowSet] = None,
                    timer: Optional[PhaseTimer] = None) -> Tuple[float, LinearForecaster]:
    """Busca em `final_lr_grid` pela menor perda de validação sob Σ; empate fica com a primeira taxa."""
    fit, valid = _fit_valid(train, valid, cfg)
    best: Optional[Tuple[float, float, LinearForecaster]] = None
    for lr in cfg.final_lr_grid:
        model = train_final(fit, w, model_init, cfg.with_(final_lr=lr), valid=valid, timer=timer)
        loss = forward(model, valid.x, valid.y, w)[1]
        logger.info("final_lr=%g: perda de validação %.6g", lr, loss)
        if best is None or loss < best[0]:
            best = (loss, lr, model)
    return best[1], best[2]


def evaluate(model: LinearForecaster, windows: WindowSet, w: WeightingParams) -> Dict[str, float]:
    batch = residual_batch(windows.y, forecast(model, windows.x))
    return {"mse": mse_per_element(batch), "mae": mae(batch), "nll": quadratic_loss(batch, w)}


# --- RELATÓRIO ---
@dataclass
class RunReport:
    variant: str
    seed: int
    config: Dict[str, Any]
    metrics: Dict[str, float]
    timings_ms: Dict[str, float]
    per_step_ms: Dict[str, float] = field(default_factory=dict)
    delta_trace: List[float] = field(default_factory=list)
    sigma_path: Optional[str] = None
    extra: Dict[str, Any] = field(default_factory=dict)
    weighting: Optional[WeightingParams] = field(default=None, repr=False)
    model: Optional[LinearForecaster] = field(default=None, repr=False)

    @property
    def sigma(self) -> Optional[np.ndarray]:
        return None if self.weighting is None else materialize(self.weighting)[1]

    def to_dict(self) -> Dict[str, Any]:
        return {"schema": REPORT_SCHEMA, "variant": self.variant, "seed": self.seed,
                "config": self.config, "metrics": self.metrics, "sigma_path": self.sigma_path,
                "timings_ms": self.timings_ms, "per_step_ms": self.per_step_ms,
                "delta_trace": self.delta_trace, **self.extra}


def _finish(train: WindowSet, valid: Optional[WindowSet], test: WindowSet, w: WeightingParams,
            label: str, cfg: QdfConfig, model_init: LinearForecaster, timer: PhaseTimer,
            trace: List[float]) -> RunReport:
    if cfg.select_lr and cfg.final_solver == "adam":
        lr, model = select_final_lr(train, w, model_init, cfg, valid=valid, timer=timer)
        cfg = cfg.with_(final_lr=lr)
    else:
        model = train_final(train, w, model_init, cfg, valid=valid, timer=timer)
    metrics = evaluate(model, test, w)
    logger.info("%s seed=%d: mse=%.4f mae=%.4f", label, cfg.seed, metrics["mse"], metrics["mae"])
    return RunReport(
        variant=label, seed=cfg.seed, config=cfg.to_dict(), metrics=metrics,
        timings_ms=timer.as_dict(), per_step_ms=timer.per_call(), delta_trace=trace,
        extra={"rounds": len(trace), "converged": bool(trace) and trace[-1] < cfg.tol,
               "windows": {"train": len(train), "valid": len(valid) if valid is not None else 0,
                           "test": len(test)}},
        weighting=w, model=model)


def run_variant(train: WindowSet, valid: Optional[WindowSet], test: WindowSet,
                variant: Variant, cfg: QdfConfig) -> RunReport:
    variant = Variant(variant)
    cfg = cfg.with_(mode=variant.mode)
    timer = PhaseTimer()
    model_init = init_forecaster(train.history, train.horizon, rng_stream(cfg.seed, "init"))

    trace: List[float] = []
    if variant is Variant.DF:
        w = identity_params(train.horizon)
    else:
        w, trace = learn_weighting(train, model_init, cfg, timer)
    return _finish(train, valid, test, w, variant.value, cfg, model_init, timer, trace)


def run_with_weighting(train: WindowSet, valid: Optional[WindowSet], test: WindowSet,
                       w: WeightingParams, label: str, cfg: QdfConfig) -> RunReport:
    """Treino final sob uma Σ dada (ex.: covariância oráculo), sem a fase de aprendizado."""
    model_init = init_forecaster(train.history, train.horizon, rng_stream(cfg.seed, "init"))
    return _finish(train, valid, test, w, label, cfg, model_init, PhaseTimer(), [])
