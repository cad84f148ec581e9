import streamlit as st

from src.artifacts import load_diagnose
from src.styles import card

def render_page(T: dict, artifacts_dir: str):
    st.title(T.get("menu_diag", "Diagnóstico de Correlação"))

    diag = load_diagnose(artifacts_dir)
    if diag is None:
        st.info(T.get("no_diag", "Nenhum diagnóstico encontrado."))
        return

    meta = diag.get("meta", {})
    fractions = {k: v for k, v in diag.items() if k.startswith("fraction_above_")}
    c1, c2, c3 = st.columns(3)
    c1.markdown(card(T.get("samples", "Amostras"), meta.get("samples", "—")), unsafe_allow_html=True)
    c2.markdown(card("H / T", f"{meta.get('history', '—')} / {meta.get('horizon', '—')}"),
                unsafe_allow_html=True)
    for key, value in fractions.items():
        label = f"{T.get('fraction_above', 'Fração')} ({key.rsplit('_', 1)[-1]})"
        c3.markdown(card(label, f"{value:.1%}", "nll"), unsafe_allow_html=True)
    st.markdown("<div class='card-row-spacing'></div>", unsafe_allow_html=True)

    st.subheader(T.get("matrix", "Correlação parcial"))
    st.dataframe(diag["matrix"].round(3), use_container_width=True)
    st.subheader(T.get("cond_var", "Variância condicional"))
    st.dataframe(diag["cond_var"], use_container_width=True, hide_index=True)
