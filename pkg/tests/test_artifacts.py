import os

import numpy as np
import pytest

from src.artifacts import (find_reports, load_bench, load_diagnose, load_report, report_sigma,
                           timings_table)
from src.cli import main
from src.errors import DataIOError
from src.styles import CARD_CSS, METRIC_CLASSES, card
from src.utils import write_json

APP = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "app.py")
QUICK = ["--outer-rounds", "2", "--epochs", "2"]


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    root = tmp_path_factory.mktemp("artifacts")
    main(["train", "--preset", "correlation_only", "--variant", "qdf", "--report", str(root / "report.json"),
          "--dump-sigma", str(root / "sigma.csv")] + QUICK)
    main(["bench", "--preset", "correlation_only", "--seeds", "0", "--variants", "df", "qdf",
          "--out-dir", str(root / "bench")] + QUICK)
    main(["diagnose", "--preset", "correlation_only", "--reg-history", "4", "--horizon", "5",
          "--subsample", "1000", "--out-dir", str(root / "diag")])
    return root


def test_find_and_load_report(artifacts):
    paths = find_reports(str(artifacts))
    assert paths == [str(artifacts / "report.json")]
    report = load_report(paths[0])
    assert report["variant"] == "qdf"
    sigma = report_sigma(report, paths[0])
    assert sigma.shape == (8, 8)
    assert list(sigma.columns[:2]) == ["t1", "t2"]
    table = timings_table(report)
    assert set(table["phase"]) >= {"inner_fwd", "final_train"}


def test_report_without_sigma(tmp_path):
    write_json(str(tmp_path / "r.json"), {"variant": "df", "metrics": {}})
    assert report_sigma(load_report(str(tmp_path / "r.json")), str(tmp_path / "r.json")) is None


def test_unreadable_report(tmp_path):
    (tmp_path / "r.json").write_text("{")
    assert find_reports(str(tmp_path)) == []
    with pytest.raises(DataIOError):
        load_report(str(tmp_path / "r.json"))


def test_load_bench(artifacts):
    bench = load_bench(str(artifacts / "bench"))
    assert list(bench["summary"]["variant"]) == ["df", "qdf"]
    assert len(bench["runs"]) == 2
    assert load_bench(str(artifacts)) is None


def test_load_diagnose(artifacts):
    diag = load_diagnose(str(artifacts / "diag"))
    assert diag["matrix"].shape == (5, 5)
    np.testing.assert_allclose(np.diag(diag["matrix"].to_numpy()), 1.0)
    assert list(diag["cond_var"].columns) == ["step", "cond_var"]
    assert load_diagnose(str(artifacts / "bench")) is None


def test_dashboard_pages_render(artifacts):
    from streamlit.testing.v1 import AppTest

    at = AppTest.from_file(APP, default_timeout=30)
    at.session_state["artifacts_dir"] = str(artifacts)
    at.run()
    assert not at.exception
    assert at.title[0].value == "Relatório de Treino"
    for idx in (1, 2):
        at.sidebar.radio[0].set_value(at.sidebar.radio[0].options[idx]).run()
        assert not at.exception


# --- cards ---
@pytest.mark.parametrize("kind", ["mse", "mae", "nll"])
def test_card_uses_metric_border(kind):
    html = card("MSE", "0.123", kind)
    assert METRIC_CLASSES[kind] in html and "0.123" in html
    assert f".{METRIC_CLASSES[kind]}" in CARD_CSS


def test_card_neutral_has_no_border_class():
    html = card("Variante", "qdf")
    assert "metric-container " in html
    assert not any(cls in html for cls in METRIC_CLASSES.values())
