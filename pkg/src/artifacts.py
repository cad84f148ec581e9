"""
Leitura dos artefatos gravados pela CLI (relatórios, bench, diagnóstico)
para exibição no painel.
"""
import glob
import logging
import os
from typing import Any, Dict, List, Optional

import pandas as pd

from src.errors import DataIOError
from src.utils import read_json, read_matrix_csv

logger = logging.getLogger(__name__)


def _safe_json(path: str) -> Optional[Dict[str, Any]]:
    try:
        return read_json(path)
    except (OSError, ValueError) as e:
        logger.warning("Erro ao carregar %s: %s", path, e)
        return None


def find_reports(directory: str) -> List[str]:
    """Arquivos JSON com 'variant' e 'metrics' (relatórios de `train`)."""
    found = []
    for path in sorted(glob.glob(os.path.join(directory, "**", "*.json"), recursive=True)):
        payload = _safe_json(path)
        if payload and "variant" in payload and "metrics" in payload:
            found.append(path)
    return found


def load_report(path: str) -> Dict[str, Any]:
    payload = _safe_json(path)
    if payload is None:
        raise DataIOError(f"cannot read report {path}", path=path)
    return payload


def report_sigma(report: Dict[str, Any], report_path: str) -> Optional[pd.DataFrame]:
    """Σ do relatório, se foi gravada (`--dump-sigma`); caminho relativo à pasta do relatório."""
    sigma_path = report.get("sigma_path")
    if not sigma_path:
        return None
    if not os.path.isabs(sigma_path) and not os.path.exists(sigma_path):
        sigma_path = os.path.join(os.path.dirname(report_path), os.path.basename(sigma_path))
    if not os.path.exists(sigma_path):
        logger.warning("Σ não encontrada em %s", sigma_path)
        return None
    m = read_matrix_csv(sigma_path)
    steps = [f"t{i + 1}" for i in range(m.shape[0])]
    return pd.DataFrame(m, index=steps, columns=steps)


def timings_table(report: Dict[str, Any]) -> pd.DataFrame:
    total = report.get("timings_ms", {})
    per_step = report.get("per_step_ms", {})
    return pd.DataFrame([{"phase": k, "total_ms": v, "per_call_ms": per_step.get(k, 0.0)}
                         for k, v in total.items()])


def load_bench(out_dir: str) -> Optional[Dict[str, Any]]:
    """summary.json de `bench`, com runs/summary como DataFrames."""
    path = os.path.join(out_dir, "summary.json")
    payload = _safe_json(path) if os.path.exists(path) else None
    if not payload or "runs" not in payload:
        return None
    payload["runs"] = pd.DataFrame(payload["runs"])
    payload["summary"] = pd.DataFrame(payload.get("summary", []))
    return payload


def load_diagnose(out_dir: str) -> Optional[Dict[str, Any]]:
    """summary.json + partial_corr.csv de `diagnose`."""
    summary_path = os.path.join(out_dir, "summary.json")
    matrix_path = os.path.join(out_dir, "partial_corr.csv")
    if not (os.path.exists(summary_path) and os.path.exists(matrix_path)):
        return None
    payload = _safe_json(summary_path)
    if payload is None or "cond_var" not in payload:
        return None
    m = read_matrix_csv(matrix_path)
    steps = [f"t{i + 1}" for i in range(m.shape[0])]
    payload["matrix"] = pd.DataFrame(m, index=steps, columns=steps)
    payload["cond_var"] = pd.DataFrame({"step": steps, "cond_var": payload["cond_var"]})
    return payload
