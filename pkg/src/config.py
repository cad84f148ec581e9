import json
import logging
import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, Tuple

from src.errors import InvalidConfigError
from src.weighting import WeightingMode

logger = logging.getLogger(__name__)

ROOT_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA_DIR = os.path.join(ROOT_DIR, "data")
SOLVERS = ("adam", "lstsq")

# Usados se data/qdf_defaults.json estiver ausente
BUILTIN_DEFAULTS: Dict[str, Any] = {
    "k_splits": 3, "outer_rounds": 20, "inner_steps": 1, "inner_lr": 0.05,
    "final_lr": 1e-3, "final_lr_grid": [1e-3, 5e-4, 1e-4, 5e-5], "eta": 0.05,
    "tol": 1e-4, "epochs": 20, "batch_size": 32, "patience": 3,
    "valid_fraction": 0.2, "mode": "full", "normalize": True,
    "reset_theta": False, "seed": 0, "final_solver": "adam", "select_lr": False,
    "cli": {"history": 96, "horizon": 96, "split_fractions": [0.7, 0.1, 0.2],
            "diagnose": {"subsample": 5000, "reg_history": 8, "horizon": 96, "threshold": 0.1}},
}


class DataLoader:
    """
    Carrega os arquivos JSON de data/ (padrões do QDF, benchmarks, i18n).
    Arquivo ausente ou inválido cai no padrão embutido, com aviso no log.
    """

    def __init__(self, data_dir: str = DATA_DIR):
        self.data_dir = data_dir
        self.defaults = self._load_json("qdf_defaults.json", default=BUILTIN_DEFAULTS)
        self.benchmarks = self._load_json("benchmarks.json", default={})
        self.i18n = self._load_json("i18n.json", default={"Português": {"sidebar_title": "QDF"}})

    # --------------------------------------------------------------------
    # Leitura segura
    # --------------------------------------------------------------------
    def _load_json(self, filename: str, default: Dict[str, Any]) -> Dict[str, Any]:
        path = os.path.join(self.data_dir, filename)
        try:
            if os.path.exists(path):
                with open(path, "r", encoding="utf-8") as f:
                    return json.load(f)
            logger.warning("%s não encontrado em %s, usando padrão embutido", filename, self.data_dir)
        except (OSError, ValueError) as e:
            logger.warning("Erro ao carregar %s: %s", filename, e)
        return json.loads(json.dumps(default))

    def benchmark(self, name: str) -> Dict[str, Any]:
        if name not in self.benchmarks:
            raise InvalidConfigError(f"unknown benchmark preset '{name}'",
                                     available=sorted(self.benchmarks))
        return dict(self.benchmarks[name])


# ------------------------------------------------------------------------
# Instância global — acessível via from src.config import DATA
# ------------------------------------------------------------------------
DATA = DataLoader()


@dataclass(frozen=True)
class QdfConfig:
    """Hiperparâmetros do fluxo completo (aprendizado de Σ + treino final)."""
    k_splits: int = 3
    outer_rounds: int = 20
    inner_steps: int = 1
    inner_lr: float = 0.05
    final_lr: float = 1e-3
    eta: float = 0.05
    tol: float = 1e-4
    epochs: int = 20
    batch_size: int = 32
    patience: int = 3
    valid_fraction: float = 0.2
    mode: WeightingMode = WeightingMode.FULL
    normalize: bool = True
    reset_theta: bool = False
    seed: int = 0
    final_solver: str = "adam"     # "adam" (mini-lotes) ou "lstsq" (mínimo exato)
    final_lr_grid: Tuple[float, ...] = (1e-3, 5e-4, 1e-4, 5e-5)
    select_lr: bool = False

    @classmethod
    def from_defaults(cls, **overrides: Any) -> "QdfConfig":
        names = {f.name for f in fields(cls)}
        values = {k: v for k, v in DATA.defaults.items() if k in names}
        unknown = set(overrides) - names
        if unknown:
            raise InvalidConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update({k: v for k, v in overrides.items() if v is not None})
        values["mode"] = WeightingMode.parse(values.get("mode", WeightingMode.FULL))
        values["final_lr_grid"] = tuple(float(v) for v in values.get("final_lr_grid", cls.final_lr_grid))
        return cls(**values).validate()

    def with_(self, **changes: Any) -> "QdfConfig":
        if "mode" in changes:
            changes["mode"] = WeightingMode.parse(changes["mode"])
        if "final_lr_grid" in changes:
            changes["final_lr_grid"] = tuple(float(v) for v in changes["final_lr_grid"])
        return replace(self, **changes).validate()

    def validate(self) -> "QdfConfig":
        checks = [
            (self.k_splits >= 1, "k_splits must be >= 1"),
            (self.outer_rounds >= 1, "outer_rounds must be >= 1"),
            (self.inner_steps >= 1, "inner_steps must be >= 1"),
            (self.inner_lr > 0, "inner_lr must be > 0"),
            (self.final_lr > 0, "final_lr must be > 0"),
            (self.eta >= 0, "eta must be >= 0"),
            (self.tol > 0, "tol must be > 0"),
            (self.epochs >= 1, "epochs must be >= 1"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.patience >= 1, "patience must be >= 1"),
            (0.0 < self.valid_fraction < 1.0, "valid_fraction must lie in (0, 1)"),
            (self.final_solver in SOLVERS, f"final_solver must be one of {SOLVERS}"),
            (len(self.final_lr_grid) > 0 and min(self.final_lr_grid) > 0,
             "final_lr_grid must be nonempty and positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise InvalidConfigError(msg)
        return self

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["mode"] = self.mode.value
        out["final_lr_grid"] = list(self.final_lr_grid)
        return out
