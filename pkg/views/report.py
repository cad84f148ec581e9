import os

import pandas as pd
import streamlit as st

from src.artifacts import find_reports, load_report, report_sigma, timings_table
from src.styles import card
from src.utils import fmt_metric

def render_page(T: dict, artifacts_dir: str):
    st.title(T.get("menu_report", "Relatório de Treino"))

    paths = find_reports(artifacts_dir)
    if not paths:
        st.info(T.get("no_reports", "Nenhum relatório encontrado."))
        return

    path = st.selectbox(T.get("report_file", "Relatório"), paths,
                        format_func=lambda p: os.path.relpath(p, artifacts_dir))
    report = load_report(path)
    m = report.get("metrics", {})

    c1, c2, c3, c4 = st.columns(4)
    c1.markdown(card(T.get("variant", "Variante"), report.get("variant", "—")), unsafe_allow_html=True)
    c2.markdown(card("MSE", fmt_metric(m.get("mse")), "mse"), unsafe_allow_html=True)
    c3.markdown(card("MAE", fmt_metric(m.get("mae")), "mae"), unsafe_allow_html=True)
    c4.markdown(card("NLL", fmt_metric(m.get("nll")), "nll"), unsafe_allow_html=True)
    st.markdown("<div class='card-row-spacing'></div>", unsafe_allow_html=True)

    tab1, tab2, tab3, tab4 = st.tabs([T.get("tab_metrics", "Métricas"), T.get("tab_sigma", "Σ"),
                                      T.get("tab_timings", "Tempos"), T.get("tab_config", "Config")])
    with tab1:
        st.dataframe(pd.DataFrame([{
            T.get("seed", "Semente"): report.get("seed"),
            T.get("rounds", "Rodadas"): report.get("rounds", 0),
            T.get("converged", "Convergiu"): report.get("converged", False),
            **report.get("windows", {}),
        }]), use_container_width=True, hide_index=True)
        trace = report.get("delta_trace", [])
        if trace:
            st.subheader(T.get("delta_trace", "‖ΔΣ‖_F"))
            st.dataframe(pd.DataFrame({"round": range(1, len(trace) + 1), "delta": trace}),
                         use_container_width=True, hide_index=True)
    with tab2:
        sigma = report_sigma(report, path)
        if sigma is None:
            st.info(T.get("sigma_missing", "Σ não foi gravada."))
        else:
            st.dataframe(sigma.round(4), use_container_width=True)
    with tab3:
        st.dataframe(timings_table(report), use_container_width=True, hide_index=True)
    with tab4:
        st.json(report.get("config", {}))
