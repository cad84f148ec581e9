import sys
import os
import streamlit as st

# --- INÍCIO DA CORREÇÃO DE IMPORTAÇÃO ---
# Adiciona o diretório raiz ao path do Python para encontrar 'src' e 'views'
ROOT_DIR = os.path.dirname(os.path.abspath(__file__))
if ROOT_DIR not in sys.path:
    sys.path.insert(0, ROOT_DIR)
# --- FIM DA CORREÇÃO ---

from src.config import DATA
from src.styles import apply_global_styles
from views import bench, diagnostics, report

# Configuração Inicial da Página
st.set_page_config(page_title="QDF", layout="wide", page_icon="📈")
apply_global_styles()

# Inicialização de Estado (idioma padrão e pasta de artefatos)
if 'locale' not in st.session_state:
    st.session_state.locale = 'Português'
if 'artifacts_dir' not in st.session_state:
    st.session_state.artifacts_dir = os.getcwd()

# --- SIDEBAR DE NAVEGAÇÃO ---
with st.sidebar:
    # .get() para não quebrar se o JSON estiver incompleto
    T = DATA.i18n.get(st.session_state.locale, DATA.i18n.get('Português', {}))

    st.markdown(f"<div style='text-align:center; margin-bottom:20px;'><h2>{T.get('sidebar_title', 'QDF')}</h2></div>", unsafe_allow_html=True)

    # Seletor de Idioma
    col_l1, col_l2 = st.columns([0.3, 0.7])
    col_l1.write(f"<div style='margin-top: 15px; font-size: 20px;'>🌐</div>", unsafe_allow_html=True)
    lang_options = list(DATA.i18n.keys())
    try:
        lang_index = lang_options.index(st.session_state.locale)
    except ValueError:
        lang_index = 0

    new_lang = col_l2.selectbox("Language", options=lang_options,
                               index=lang_index,
                               label_visibility="collapsed")
    if new_lang != st.session_state.locale:
        st.session_state.locale = new_lang
        st.rerun()

    artifacts_dir = st.text_input(T.get('artifacts_dir', 'Pasta de artefatos'), key='artifacts_dir')

    st.markdown("---")

    key_report = T.get('menu_report', 'Relatório de Treino')
    key_bench = T.get('menu_bench', 'Benchmark')
    key_diag = T.get('menu_diag', 'Diagnóstico de Correlação')

    MENU_MAP = {
        "📌 " + key_report: "report",
        "🏁 " + key_bench: "bench",
        "🔎 " + key_diag: "diagnose",
    }

    selected_label = st.radio("Navegação Principal", list(MENU_MAP), label_visibility="collapsed")
    current_page = MENU_MAP.get(selected_label, "report")

    st.markdown("---")
    st.caption(f"schema 1 | {st.session_state.locale}")

# --- ROTEAMENTO DE VIZUALIZAÇÕES ---
# O 'T' (dicionário de tradução) e a pasta de artefatos são passados para cada página
if not os.path.isdir(artifacts_dir):
    st.error(f"{artifacts_dir}: not a directory")
elif current_page == "report":
    report.render_page(T, artifacts_dir)
elif current_page == "bench":
    bench.render_page(T, artifacts_dir)
elif current_page == "diagnose":
    diagnostics.render_page(T, artifacts_dir)
