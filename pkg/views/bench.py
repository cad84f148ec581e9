import pandas as pd
import streamlit as st

from src.artifacts import load_bench
from src.utils import fmt_mean_std

def render_page(T: dict, artifacts_dir: str):
    st.title(T.get("menu_bench", "Benchmark"))

    bench = load_bench(artifacts_dir)
    if bench is None:
        st.info(T.get("no_bench", "Nenhum benchmark encontrado."))
        return
    if bench.get("partial"):
        st.warning(T.get("partial", "Resultados parciais."))

    st.caption(f"seeds: {bench.get('seeds')} | variants: {', '.join(bench.get('variants', []))}")

    # Tabela formatada (média ± desvio) por variante (e valor do hiperparâmetro varrido)
    sweep = (bench.get("sweep") or {}).get("param")
    rows = []
    for rec in bench["summary"].to_dict(orient="records"):
        row = {sweep: rec[sweep]} if sweep else {}
        row.update({T.get("variant", "Variante"): rec["variant"], "n": rec.get("n"), "failed": rec.get("failed")})
        for metric in ("mse", "mae", "nll", "nll_oracle"):
            if f"{metric}_mean" in rec:
                row[metric.upper()] = fmt_mean_std(rec[f"{metric}_mean"], rec.get(f"{metric}_std"))
        rows.append(row)

    tab1, tab2 = st.tabs(["📊 " + T.get("summary", "Resumo"), "📋 " + T.get("runs", "Execuções")])
    with tab1: st.dataframe(pd.DataFrame(rows), use_container_width=True, hide_index=True)
    with tab2: st.dataframe(bench["runs"], use_container_width=True, hide_index=True)
