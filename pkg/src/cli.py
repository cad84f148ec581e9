"""
CLI: synth | train | bench | diagnose.

Relatórios em JSON (schema 1), matrizes e tabelas em CSV. Erros viram JSON
no stderr e código de saída 2 (uso), 3 (dados) ou 4 (numérico).
"""
import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.config import DATA, SOLVERS, QdfConfig
from src.data import (ArSpec, NoiseRamp, SeriesFrame, Standardization, WindowSet,
                      ar_conditional_cov, build_benchmark, gen_ar, load_csv, make_windows,
                      split_windows, write_csv)
from src.diagnostics import covariance_to_correlation, fraction_above, partial_corr_matrix
from src.errors import EXIT_OK, InvalidConfigError, QdfError, error_payload
from src.model import save_checkpoint
from src.utils import fmt_mean_std, fmt_metric, write_json, write_matrix_csv
from src.weighting import dump_sigma, from_sigma
from src.workflow import REPORT_SCHEMA, Variant, evaluate, run_variant, run_with_weighting

logger = logging.getLogger(__name__)

CLI_DEFAULTS = DATA.defaults.get("cli", {})
# hiperparâmetros do estudo de sensibilidade (N_in, K, η)
SWEEP_PARAMS = {"inner_steps": int, "k_splits": int, "eta": float}


# ------------------------------------------------------------------------
# Argumentos
# ------------------------------------------------------------------------
def _add_data_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="CSV com cabeçalho (separador ',', decimal '.')")
    src.add_argument("--preset", choices=sorted(DATA.benchmarks), help="benchmark sintético")
    p.add_argument("--skip-first-column", action="store_true", help="ignora a coluna de data/hora")


def _add_train_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--history", type=int, default=None)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--k-splits", type=int, default=None)
    p.add_argument("--inner-steps", type=int, default=None)
    p.add_argument("--outer-rounds", type=int, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--inner-lr", type=float, default=None)
    p.add_argument("--lr", type=float, default=None, help="taxa do Adam no treino final")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--reset-theta", action="store_true")
    p.add_argument("--solver", choices=list(SOLVERS), default=None, help="treino final: adam ou lstsq")
    p.add_argument("--select-lr", action="store_true",
                   help="escolhe a taxa final em final_lr_grid pela perda de validação")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdf", description="Quadratic-form weighted direct forecasting")
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="gera série AR + covariância oráculo")
    p.add_argument("--phi", type=float, nargs="*", default=[])
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--ramp-to", type=float, default=None)
    p.add_argument("--history", type=int, default=16)
    p.add_argument("--horizon", type=int, default=8)
    p.add_argument("--n", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="synth.csv")

    p = sub.add_parser("train", help="executa o fluxo completo para uma variante")
    _add_data_args(p)
    _add_train_args(p)
    p.add_argument("--variant", choices=[v.value for v in Variant], default=Variant.QDF_FULL.value)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--valid-data", default=None, help="CSV de validação explícito")
    p.add_argument("--dump-sigma", default=None)
    p.add_argument("--checkpoint", default=None, help="diretório para pesos/viés/cabeçalho")
    p.add_argument("--report", default="report.json")

    p = sub.add_parser("bench", help="variantes × sementes, média ± desvio")
    _add_data_args(p)
    _add_train_args(p)
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    p.add_argument("--variants", nargs="+", choices=[v.value for v in Variant],
                   default=[v.value for v in Variant])
    p.add_argument("--with-oracle", action="store_true",
                   help="inclui o braço treinado com a covariância oráculo (só presets)")
    p.add_argument("--sweep", default=None, metavar="PARAM=V1,V2,...",
                   help=f"sensibilidade a um hiperparâmetro ({', '.join(SWEEP_PARAMS)})")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", default="bench_out")

    diag = CLI_DEFAULTS.get("diagnose", {})
    p = sub.add_parser("diagnose", help="correlação parcial dos passos do rótulo")
    _add_data_args(p)
    p.add_argument("--reg-history", type=int, default=diag.get("reg_history", 8))
    p.add_argument("--horizon", type=int, default=diag.get("horizon", 96))
    p.add_argument("--subsample", type=int, default=diag.get("subsample", 5000))
    p.add_argument("--variable", type=int, default=0)
    p.add_argument("--threshold", type=float, default=diag.get("threshold", 0.1))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="diagnose_out")
    return parser


def config_from_args(args: argparse.Namespace, seed: Optional[int] = None) -> QdfConfig:
    return QdfConfig.from_defaults(
        k_splits=args.k_splits, outer_rounds=args.outer_rounds, inner_steps=args.inner_steps,
        inner_lr=args.inner_lr, final_lr=args.lr, eta=args.eta, tol=args.tol, epochs=args.epochs,
        batch_size=args.batch, patience=args.patience,
        normalize=False if args.no_normalize else None,
        reset_theta=True if args.reset_theta else None, final_solver=args.solver,
        select_lr=True if args.select_lr else None, seed=seed)


# ------------------------------------------------------------------------
# Preparação dos dados
# ------------------------------------------------------------------------
def prepare_data(args: argparse.Namespace, seed: int) -> Tuple[List[WindowSet], Standardization, Dict[str, Any]]:
    """(train, valid, test), estatísticas de padronização e a descrição da fonte."""
    fractions = CLI_DEFAULTS.get("split_fractions", [0.7, 0.1, 0.2])
    if args.preset:
        bench = build_benchmark(args.preset, seed)
        history = args.history or bench.history
        horizon = args.horizon or bench.horizon
        windows, stats = split_windows(bench.frame, history, horizon, fractions, bench.stride)
        source = {"preset": args.preset, "spec": bench.spec.to_dict(), "history": history,
                  "horizon": horizon, "stride": bench.stride, "fractions": fractions}
        if horizon == bench.horizon:
            # covariância oráculo na escala padronizada
            source["oracle_cov"] = (ar_conditional_cov(bench.spec, horizon) / stats.std[0] ** 2).tolist()
        return windows, stats, source

    history = args.history or CLI_DEFAULTS.get("history", 96)
    horizon = args.horizon or CLI_DEFAULTS.get("horizon", 96)
    frame = load_csv(args.data, skip_first_column=args.skip_first_column)
    source = {"data": args.data, "history": history, "horizon": horizon}
    if getattr(args, "valid_data", None):
        (train, test), stats = split_windows(frame, history, horizon, [0.8, 0.2])
        test.name = "test"
        vframe = load_csv(args.valid_data, skip_first_column=args.skip_first_column)
        valid = make_windows(standardize_with(vframe, stats), history, horizon)
        valid.name = "valid"
        source.update({"valid_data": args.valid_data, "fractions": [0.8, 0.2]})
        return [train, valid, test], stats, source
    windows, stats = split_windows(frame, history, horizon, fractions)
    source["fractions"] = fractions
    return windows, stats, source


def standardize_with(frame: SeriesFrame, stats: Standardization) -> SeriesFrame:
    """Aplica estatísticas já calculadas (do treino) a outra série."""
    return SeriesFrame(stats.apply(frame.values), frame.names, frame.source, frame.start)


# ------------------------------------------------------------------------
# Comandos
# ------------------------------------------------------------------------
def cmd_synth(args: argparse.Namespace) -> int:
    ramp = NoiseRamp(args.ramp_to, args.history, args.horizon) if args.ramp_to is not None else None
    spec = ArSpec(tuple(args.phi), args.noise, args.n, args.seed, ramp)
    frame = gen_ar(spec)
    write_csv(frame, args.out)
    cov = ar_conditional_cov(spec, args.horizon)
    oracle_path = os.path.splitext(args.out)[0] + ".oracle.json"
    write_json(oracle_path, {"schema": REPORT_SCHEMA, "spec": spec.to_dict(), "horizon": args.horizon,
                             "conditional_cov": cov.tolist(),
                             "partial_correlation": covariance_to_correlation(cov).tolist()})
    print(f"{args.out} ({len(frame)} linhas), oráculo em {oracle_path}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    cfg = config_from_args(args, seed=args.seed)
    (train, valid, test), stats, source = prepare_data(args, cfg.seed)
    report = run_variant(train, valid, test, Variant(args.variant), cfg)
    source.pop("oracle_cov", None)
    report.extra["data"] = source

    if args.dump_sigma:
        dump_sigma(report.weighting, args.dump_sigma)
        report.sigma_path = args.dump_sigma
    if args.checkpoint:
        save_checkpoint(report.model, args.checkpoint, train.n_vars, stats.to_dict())
    write_json(args.report, report.to_dict())
    m = report.metrics
    print(f"{report.variant}: mse={fmt_metric(m['mse'])} mae={fmt_metric(m['mae'])} "
          f"nll={fmt_metric(m['nll'])} -> {args.report}")
    return EXIT_OK


def parse_sweep(text: Optional[str]) -> Optional[Tuple[str, List[Any]]]:
    """'eta=0,0.05,0.1' -> ('eta', [0.0, 0.05, 0.1])."""
    if not text:
        return None
    name, _, raw = text.partition("=")
    name = name.strip().replace("-", "_")
    if name not in SWEEP_PARAMS or not raw:
        raise InvalidConfigError(f"--sweep expects PARAM=V1,V2,... with PARAM in {sorted(SWEEP_PARAMS)}",
                                 value=text)
    try:
        values = [SWEEP_PARAMS[name](v) for v in raw.split(",")]
    except ValueError:
        raise InvalidConfigError(f"invalid --sweep values for {name}: {raw!r}") from None
    return name, values


def _bench_job(job: Tuple[argparse.Namespace, str, int, Dict[str, Any]]) -> Dict[str, Any]:
    args, variant, seed, override = job
    row: Dict[str, Any] = {**override, "variant": variant, "seed": seed}
    try:
        cfg = config_from_args(args, seed=seed).with_(**override)
        (train, valid, test), _, source = prepare_data(args, seed)
        if variant == "oracle":
            report = run_with_weighting(train, valid, test, from_sigma(np.array(source["oracle_cov"])),
                                        "oracle", cfg)
        else:
            report = run_variant(train, valid, test, Variant(variant), cfg)
        row.update(report.metrics)
        if "oracle_cov" in source:
            row["nll_oracle"] = evaluate(report.model, test, from_sigma(np.array(source["oracle_cov"])))["nll"]
        row.update({f"ms_{k}": v for k, v in report.timings_ms.items()})
        row["status"] = "ok"
    except QdfError as e:
        logger.error("execução %s seed=%d %s falhou: %s", variant, seed, override, e)
        row.update({"status": "failed", "error": f"{type(e).__name__}: {e}"})
    return row


def summarize(runs: pd.DataFrame, keys: Sequence[str] = ("variant",)) -> pd.DataFrame:
    keys = list(keys)
    ok = runs[runs["status"] == "ok"]
    metrics = [c for c in ("mse", "mae", "nll", "nll_oracle") if c in ok.columns]
    counts = runs.groupby(keys, sort=False)["status"].agg(
        n="size", failed=lambda s: int((s != "ok").sum()))
    if ok.empty or not metrics:
        return counts.reset_index()
    summary = ok.groupby(keys, sort=False)[metrics].agg(["mean", "std"])
    summary.columns = [f"{m}_{s}" for m, s in summary.columns]
    return counts.join(summary).reset_index()


def cmd_bench(args: argparse.Namespace) -> int:
    variants = list(args.variants)
    if args.with_oracle:
        if not args.preset:
            raise InvalidConfigError("--with-oracle requires --preset")
        variants.append("oracle")
    sweep = parse_sweep(args.sweep)
    overrides = [{}] if sweep is None else [{sweep[0]: v} for v in sweep[1]]
    jobs = [(args, v, s, o) for o in overrides for v in variants for s in args.seeds]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_bench_job, jobs))
    else:
        rows = [_bench_job(j) for j in jobs]

    runs = pd.DataFrame(rows)
    keys = ["variant"] if sweep is None else [sweep[0], "variant"]
    summary = summarize(runs, keys)
    os.makedirs(args.out_dir, exist_ok=True)
    runs.to_csv(os.path.join(args.out_dir, "runs.csv"), index=False, float_format="%.17g")
    summary.to_csv(os.path.join(args.out_dir, "summary.csv"), index=False, float_format="%.17g")
    write_json(os.path.join(args.out_dir, "summary.json"), {
        "schema": REPORT_SCHEMA, "seeds": list(args.seeds), "variants": variants,
        "sweep": None if sweep is None else {"param": sweep[0], "values": sweep[1]},
        "config": config_from_args(args, seed=args.seeds[0]).to_dict(),
        "partial": bool((runs["status"] != "ok").any()),
        "runs": json.loads(runs.to_json(orient="records")),
        "summary": json.loads(summary.to_json(orient="records"))})

    for rec in summary.to_dict(orient="records"):
        label = rec["variant"] if sweep is None else f"{rec['variant']} {sweep[0]}={rec[sweep[0]]}"
        print(f"{label:>12}  mse {fmt_mean_std(rec.get('mse_mean'), rec.get('mse_std'))}"
              f"  mae {fmt_mean_std(rec.get('mae_mean'), rec.get('mae_std'))}  ({rec['n']} runs)")
    return EXIT_OK


def cmd_diagnose(args: argparse.Namespace) -> int:
    if args.preset:
        frame = build_benchmark(args.preset, args.seed).frame
    else:
        frame = load_csv(args.data, skip_first_column=args.skip_first_column)
    report = partial_corr_matrix(frame, args.reg_history, args.horizon, args.subsample,
                                 args.variable, args.seed)
    write_matrix_csv(os.path.join(args.out_dir, "partial_corr.csv"), report.matrix)
    write_json(os.path.join(args.out_dir, "summary.json"), report.to_dict(args.threshold))
    print(f"{report.meta['samples']} amostras, fração |ρ| > {args.threshold:g}: "
          f"{fraction_above(report, args.threshold):.3f} -> {args.out_dir}")
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "bench": cmd_bench, "diagnose": cmd_diagnose}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except QdfError as e:
        print(json.dumps(error_payload(e)), file=sys.stderr)
        return e.exit_code
    except Exception as e:  # noqa: BLE001 - erro inesperado também sai como JSON
        logger.exception("erro inesperado")
        payload = error_payload(e)
        print(json.dumps(payload), file=sys.stderr)
        return payload["exit_code"]
