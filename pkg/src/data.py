"""
Ingestão de séries, padronização, janelas deslizantes, divisão cronológica
e gerador AR sintético com covariância condicional exata (oráculo).
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import toeplitz
from scipy.signal import lfilter

from src.config import DATA
from src.errors import (DataIOError, InsufficientDataError, InvalidDimensionError,
                        InvalidSplitError, ParseError, SpecError)
from src.utils import MATRIX_FORMAT, ensure_parent, rng_stream

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-8
NA_TOKENS = {"", "nan", "na", "null", "none", "inf", "+inf", "-inf", "infinity", "-infinity"}


# ------------------------------------------------------------------------
# Tipos
# ------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class SeriesFrame:
    values: np.ndarray            # N×D, ordem temporal
    names: Tuple[str, ...]
    source: str = ""
    start: int = 0                # índice absoluto da primeira linha

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[1] != len(self.names):
            raise InvalidDimensionError(f"values {v.shape} do not match {len(self.names)} column names")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "names", tuple(self.names))

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]


class WindowSet:
    """
    Pares (X: H×D, Y: T×D) extraídos de uma série. `starts` guarda o índice
    absoluto do primeiro passo de histórico de cada janela; a janela ocupa
    os índices de origem start..start+H+T−1.
    """

    def __init__(self, history: int, horizon: int, x: np.ndarray, y: np.ndarray,
                 starts: np.ndarray, name: str = ""):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        starts = np.asarray(starts, dtype=int)
        if x.ndim != 3 or y.ndim != 3 or x.shape[1] != history or y.shape[1] != horizon:
            raise InvalidDimensionError(f"window arrays {x.shape}/{y.shape} do not match H={history}, T={horizon}")
        if not (x.shape[0] == y.shape[0] == starts.shape[0]) or x.shape[2] != y.shape[2]:
            raise InvalidDimensionError("window arrays disagree on count or variables")
        self.history, self.horizon, self.name = history, horizon, name
        self._x, self._y, self.starts = x, y, starts

    @property
    def x(self) -> np.ndarray:
        return self._x

    @property
    def y(self) -> np.ndarray:
        return self._y

    @property
    def n_vars(self) -> int:
        return self._x.shape[2]

    def __len__(self) -> int:
        return self.starts.shape[0]

    def take(self, idx: Union[slice, np.ndarray]) -> "WindowSet":
        return type(self)(self.history, self.horizon, self.x[idx], self.y[idx], self.starts[idx],
                          name=self.name)

    def __repr__(self) -> str:
        return f"WindowSet(name={self.name!r}, n={len(self)}, H={self.history}, T={self.horizon}, D={self.n_vars})"


@dataclass(frozen=True)
class NoiseRamp:
    """Escala das inovações subindo linearmente ao longo do horizonte de rótulos (período H+T)."""
    end_std: float
    history: int
    horizon: int

    @property
    def period(self) -> int:
        return self.history + self.horizon


@dataclass(frozen=True)
class ArSpec:
    coeffs: Tuple[float, ...]
    noise_std: float = 1.0
    length: int = 10000
    seed: int = 0
    ramp: Optional[NoiseRamp] = None

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if self.noise_std <= 0:
            raise SpecError(f"noise_std must be > 0, got {self.noise_std}")
        if self.length < 1:
            raise SpecError(f"length must be >= 1, got {self.length}")
        if self.ramp is not None and (self.ramp.end_std <= 0 or self.ramp.history < 1 or self.ramp.horizon < 1):
            raise SpecError("noise ramp needs end_std > 0 and positive history/horizon")
        if self.coeffs:
            # raízes de z^p − φ₁z^(p−1) − … − φ_p dentro do círculo unitário
            roots = np.roots(np.r_[1.0, -np.asarray(self.coeffs)])
            if np.any(np.abs(roots) >= 1.0):
                raise SpecError("AR polynomial is not stable", coeffs=list(self.coeffs),
                                max_root=float(np.max(np.abs(roots))))

    @property
    def order(self) -> int:
        return len(self.coeffs)

    def to_dict(self) -> Dict[str, Any]:
        return {"coeffs": list(self.coeffs), "noise_std": self.noise_std, "length": self.length,
                "seed": self.seed,
                "ramp": None if self.ramp is None else {"end_std": self.ramp.end_std,
                                                        "history": self.ramp.history,
                                                        "horizon": self.ramp.horizon}}


@dataclass(frozen=True)
class Standardization:
    mean: np.ndarray
    std: np.ndarray
    floored: Tuple[int, ...] = field(default_factory=tuple)

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.std

    def inverse(self, values: np.ndarray) -> np.ndarray:
        return values * self.std + self.mean

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "floored": list(self.floored)}


# ------------------------------------------------------------------------
# CSV
# ------------------------------------------------------------------------
def load_csv(path: str, skip_first_column: bool = False) -> SeriesFrame:
    """CSV com cabeçalho, separador ',', decimal '.', UTF-8. Linhas não finitas são descartadas."""
    try:
        raw = pd.read_csv(path, sep=",", decimal=".", encoding="utf-8", dtype=str,
                          keep_default_na=False, skipinitialspace=True)
    except (OSError, UnicodeDecodeError, pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise DataIOError(f"cannot read {path}: {e}") from None
    if skip_first_column:
        raw = raw.iloc[:, 1:]
    if raw.shape[1] == 0:
        raise InsufficientDataError(f"{path} has no value columns")

    columns = []
    for col in raw.columns:
        text = raw[col].str.strip()
        num = pd.to_numeric(text, errors="coerce")
        bad = num.isna() & ~text.str.lower().isin(NA_TOKENS)
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise ParseError(f"non-numeric cell {text.iloc[row]!r} at row {row + 1}, column {col!r}",
                             row=row + 1, column=str(col))
        columns.append(num.to_numpy(dtype=float))
    values = np.column_stack(columns) if columns else np.empty((0, 0))

    finite = np.all(np.isfinite(values), axis=1)
    if not finite.all():
        logger.warning("%s: %d linha(s) com valores não finitos descartadas", path, int((~finite).sum()))
        values = values[finite]
    if len(values) == 0:
        raise InsufficientDataError(f"{path} has no finite rows")
    return SeriesFrame(values, tuple(str(c) for c in raw.columns), source=str(path))


def write_csv(frame: SeriesFrame, path: str) -> None:
    ensure_parent(path)
    pd.DataFrame(frame.values, columns=list(frame.names)).to_csv(path, index=False,
                                                                float_format=MATRIX_FORMAT)


# ------------------------------------------------------------------------
# Padronização (estatísticas só da região de treino)
# ------------------------------------------------------------------------
def standardize(frame: SeriesFrame, stats_from: Tuple[int, int]) -> Tuple[SeriesFrame, Standardization]:
    lo, hi = stats_from
    if not (0 <= lo < hi <= len(frame)):
        raise InvalidSplitError(f"stats range {stats_from} outside series of length {len(frame)}")
    region = frame.values[lo:hi]
    mean = region.mean(axis=0)
    std = region.std(axis=0)
    floored = tuple(int(i) for i in np.flatnonzero(std < STD_FLOOR))
    if floored:
        logger.warning("coluna(s) constante(s) %s: piso de desvio %.0e aplicado",
                       [frame.names[i] for i in floored], STD_FLOOR)
    stats = Standardization(mean, np.maximum(std, STD_FLOOR), floored)
    return SeriesFrame(stats.apply(frame.values), frame.names, frame.source, frame.start), stats


# ------------------------------------------------------------------------
# Janelas e divisões
# ------------------------------------------------------------------------
def make_windows(frame: SeriesFrame, history: int, horizon: int, stride: int = 1) -> WindowSet:
    """
    X = passos n−H+1..n, Y = n+1..n+T. Com stride 1 há N−H−T+1 janelas;
    com stride s > 1 as janelas começam em índices absolutos múltiplos de s.
    """
    if history < 1 or horizon < 1 or stride < 1:
        raise InvalidDimensionError("history, horizon and stride must be >= 1")
    n, span = len(frame), history + horizon
    if n < span:
        raise InsufficientDataError(f"series of length {n} is shorter than H+T={span}")
    first = 0 if stride == 1 else (-frame.start) % stride
    local = np.arange(first, n - span + 1, stride)
    if local.size == 0:
        raise InsufficientDataError(f"no aligned window fits in series of length {n}")
    view = sliding_window_view(frame.values, span, axis=0)[local]      # W×D×(H+T)
    view = np.swapaxes(view, 1, 2)
    return WindowSet(history, horizon, view[:, :history].copy(), view[:, history:].copy(),
                     local + frame.start, name=frame.source)


def _bounds(fractions: Sequence[float], n: int) -> np.ndarray:
    f = np.asarray(fractions, dtype=float)
    if f.size == 0 or np.any(f <= 0) or abs(f.sum() - 1.0) > 1e-9:
        raise InvalidSplitError(f"fractions must be positive and sum to 1, got {list(fractions)}")
    cuts = np.rint(np.cumsum(f) * n).astype(int)
    cuts[-1] = n
    return np.r_[0, cuts]


def chrono_split(obj: Union[SeriesFrame, WindowSet], fractions: Sequence[float],
                 purge: bool = False) -> List[Union[SeriesFrame, WindowSet]]:
    """
    Partes contíguas, ordenadas e disjuntas. Séries são cortadas por linhas
    (cada parte gera suas próprias janelas, perdendo as que cruzam a fronteira);
    conjuntos de janelas são cortados por contagem, e com `purge` as janelas
    que se sobrepõem à parte anterior são descartadas.
    """
    b = _bounds(fractions, len(obj))
    if isinstance(obj, SeriesFrame):
        parts = [SeriesFrame(obj.values[lo:hi], obj.names, obj.source, obj.start + lo)
                 for lo, hi in zip(b[:-1], b[1:])]
    else:
        parts = [obj.take(slice(lo, hi)) for lo, hi in zip(b[:-1], b[1:])]
        if purge:
            span = obj.history + obj.horizon
            for k in range(1, len(parts)):
                if len(parts[k - 1]) and len(parts[k]):
                    keep = parts[k].starts >= parts[k - 1].starts[-1] + span
                    parts[k] = parts[k].take(np.flatnonzero(keep))
    for k, part in enumerate(parts):
        if len(part) == 0:
            raise InvalidSplitError(f"split part {k} received no rows/windows", fractions=list(fractions))
    return parts


def split_windows(frame: SeriesFrame, history: int, horizon: int, fractions: Sequence[float],
                  stride: int = 1) -> Tuple[List[WindowSet], Standardization]:
    """Divide a série, padroniza com estatísticas da 1ª parte (treino) e gera janelas por parte."""
    parts = chrono_split(frame, fractions)
    n_train = len(parts[0])
    scaled, stats = standardize(frame, (0, n_train))
    scaled_parts = chrono_split(scaled, fractions)
    names = ["train", "valid", "test"]
    windows = []
    for k, part in enumerate(scaled_parts):
        ws = make_windows(part, history, horizon, stride)
        ws.name = names[k] if k < len(names) else f"part{k}"
        windows.append(ws)
    return windows, stats


# ------------------------------------------------------------------------
# Processo AR sintético
# ------------------------------------------------------------------------
def noise_schedule(spec: ArSpec, t: np.ndarray) -> np.ndarray:
    """Desvio das inovações no instante t (constante, ou rampa periódica nos passos de rótulo)."""
    t = np.asarray(t)
    if spec.ramp is None:
        return np.full(t.shape, spec.noise_std, dtype=float)
    r = spec.ramp
    label_std = np.linspace(spec.noise_std, r.end_std, r.horizon)
    phase = np.mod(t, r.period)
    out = np.full(t.shape, spec.noise_std, dtype=float)
    in_label = phase >= r.history
    out[in_label] = label_std[phase[in_label] - r.history]
    return out


def gen_ar(spec: ArSpec) -> SeriesFrame:
    burn = 10 * spec.order
    rng = rng_stream(spec.seed, "data")
    t = np.arange(-burn, spec.length)
    eps = rng.standard_normal(t.size) * noise_schedule(spec, t)
    series = lfilter([1.0], np.r_[1.0, -np.asarray(spec.coeffs)], eps)[burn:]
    return SeriesFrame(series[:, None], ("value",), source=f"ar{spec.order}(seed={spec.seed})")


def ma_weights(spec: ArSpec, n: int) -> np.ndarray:
    impulse = np.zeros(n)
    impulse[0] = 1.0
    return lfilter([1.0], np.r_[1.0, -np.asarray(spec.coeffs)], impulse)


def ar_conditional_cov(spec: ArSpec, horizon: int) -> np.ndarray:
    """Cov[i][j] = Σ_k ψ_{i−k}ψ_{j−k}σ²_k sobre as inovações após o instante n."""
    if horizon < 1:
        raise InvalidDimensionError(f"horizon must be >= 1, got {horizon}")
    psi = ma_weights(spec, horizon)
    big_psi = np.tril(toeplitz(psi))
    if spec.ramp is None:
        sigma = np.full(horizon, spec.noise_std)
    else:
        sigma = noise_schedule(spec, spec.ramp.history + np.arange(horizon))
    return (big_psi * sigma ** 2) @ big_psi.T


# ------------------------------------------------------------------------
# Benchmarks de mesa (data/benchmarks.json)
# ------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class Benchmark:
    name: str
    spec: ArSpec
    frame: SeriesFrame
    history: int
    horizon: int
    stride: int


def build_benchmark(name: str, seed: int, length: Optional[int] = None) -> Benchmark:
    preset = DATA.benchmark(name)
    history, horizon = int(preset["history"]), int(preset["horizon"])
    ramp = None
    if preset.get("ramp_to") is not None:
        ramp = NoiseRamp(float(preset["ramp_to"]), history, horizon)
    spec = ArSpec(tuple(preset.get("coeffs", [])), float(preset.get("noise_std", 1.0)),
                  int(length or preset.get("length", 20000)), int(seed), ramp)
    # com rampa, as janelas precisam ficar alinhadas ao período H+T
    stride = ramp.period if ramp is not None else 1
    return Benchmark(name, spec, gen_ar(spec), history, horizon, stride)
