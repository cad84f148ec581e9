import json
import os
import time
from collections import defaultdict
from contextlib import contextmanager
from typing import Any, Dict, Iterator, Optional

import numpy as np
import pandas as pd

# Fluxos de aleatoriedade nomeados, derivados de uma única semente
STREAMS = {"data": 0, "init": 1, "batch": 2, "subsample": 3, "noise": 4}

# Formato de dump das matrizes (17 dígitos significativos)
MATRIX_FORMAT = "%.17g"


def rng_stream(seed: int, name: str) -> np.random.Generator:
    """Gerador independente por fluxo: mesma semente + mesmo nome -> mesma sequência."""
    if name not in STREAMS:
        raise KeyError(f"unknown random stream '{name}'")
    return np.random.default_rng(np.random.SeedSequence([int(seed), STREAMS[name]]))


def ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def write_matrix_csv(path: str, matrix: np.ndarray) -> None:
    ensure_parent(path)
    pd.DataFrame(np.atleast_2d(matrix)).to_csv(path, header=False, index=False,
                                               float_format=MATRIX_FORMAT)


def read_matrix_csv(path: str) -> np.ndarray:
    return pd.read_csv(path, header=None, dtype=float, float_precision="round_trip").to_numpy()


def write_json(path: str, payload: Dict[str, Any]) -> None:
    ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path: str) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def fmt_metric(v: Optional[float], digits: int = 4) -> str:
    """Formata métrica (ex: 0.123456 -> '0.1235'); vazio vira '—'."""
    if v is None or not np.isfinite(v):
        return "—"
    return f"{v:.{digits}f}"


def fmt_mean_std(mean: float, std: float, digits: int = 4) -> str:
    return f"{fmt_metric(mean, digits)} ± {fmt_metric(std, digits)}"


def fmt_ms(v: Optional[float]) -> str:
    return "—" if v is None else f"{v:,.2f} ms"


class PhaseTimer:
    """Acumula tempo de parede (ms) e número de chamadas por fase."""

    PHASES = ("inner_fwd", "inner_bwd", "outer_fwd", "outer_bwd", "final_train")

    def __init__(self):
        self.total_ms: Dict[str, float] = defaultdict(float)
        self.calls: Dict[str, int] = defaultdict(int)

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.total_ms[name] += (time.perf_counter() - t0) * 1000.0
            self.calls[name] += 1

    def as_dict(self) -> Dict[str, float]:
        return {p: float(self.total_ms.get(p, 0.0)) for p in self.PHASES}

    def per_call(self) -> Dict[str, float]:
        return {p: (self.total_ms[p] / self.calls[p]) if self.calls.get(p) else 0.0
                for p in self.PHASES}
