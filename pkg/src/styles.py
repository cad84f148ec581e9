import streamlit as st

# Só o que os cards das páginas usam
CARD_CSS = """
<style>
    .metric-container { border: 1px solid #e0e0e0; border-radius: 8px; padding: 15px; text-align: center; }
    .metric-label { color: #666; font-size: 0.9rem; text-transform: uppercase; }
    .metric-value { color: #0a3d62; font-size: 1.8rem; font-weight: 700; }
    .bg-mse { border-left: 5px solid #2196F3; }
    .bg-mae { border-left: 5px solid #4CAF50; }
    .bg-nll { border-left: 5px solid #F44336; }
    .card-row-spacing { margin-top: 15px; }
</style>
"""

METRIC_CLASSES = {"mse": "bg-mse", "mae": "bg-mae", "nll": "bg-nll"}


def apply_global_styles():
    st.markdown(CARD_CSS, unsafe_allow_html=True)


def card(label, value, type="neutral"):
    """HTML de um card de métrica; `type` escolhe a borda (mse, mae, nll)."""
    return (f"<div class='metric-container {METRIC_CLASSES.get(type, '')}'>"
            f"<div class='metric-label'>{label}</div>"
            f"<div class='metric-value'>{value}</div></div>")
