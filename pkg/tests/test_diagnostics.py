import numpy as np
import pytest

from conftest import windows_from
from src.data import ArSpec, ar_conditional_cov, gen_ar, make_windows
from src.diagnostics import (PartialCorrReport, _residuals, covariance_to_correlation, fraction_above,
                             partial_corr_matrix, partial_correlation)
from src.errors import InsufficientDataError, InvalidDimensionError, UndefinedCorrelationError


def ar_frame(coeffs, n, seed=0):
    return gen_ar(ArSpec(tuple(coeffs), length=n, seed=seed))


def naive_partial_corr(windows, t, t2):
    """Duas regressões independentes + Pearson à mão."""
    x = windows.x.reshape(len(windows), -1)
    design = np.column_stack([np.ones(len(x)), x])
    resid = []
    for step in (t, t2):
        target = windows.y[:, step, 0]
        beta = np.linalg.lstsq(design, target, rcond=None)[0]
        resid.append(target - design @ beta)
    a, b = (r - r.mean() for r in resid)
    return float(a @ b / np.sqrt((a @ a) * (b @ b)))


# --- partial_correlation ---
def test_ar1_closed_form():
    windows = make_windows(ar_frame([0.5], 5009), 8, 2)
    assert len(windows) == 5000
    assert partial_correlation(windows, 0, 1) == pytest.approx(0.5 / np.sqrt(1.25), abs=0.05)


def test_independent_labels_have_no_partial_correlation(rng):
    x = rng.normal(size=(5000, 6, 1))
    y = 0.7 * x.mean(axis=1, keepdims=True).repeat(3, axis=1) + rng.normal(size=(5000, 3, 1))
    windows = windows_from(x, y)
    assert abs(partial_correlation(windows, 0, 2)) < 0.05


def test_same_step_rejected(noisy_windows):
    with pytest.raises(InvalidDimensionError):
        partial_correlation(noisy_windows, 1, 1)
    with pytest.raises(InvalidDimensionError):
        partial_correlation(noisy_windows, 0, 5)


def test_constant_labels_are_undefined(rng):
    windows = windows_from(rng.normal(size=(50, 3, 1)), np.zeros((50, 2, 1)))
    with pytest.raises(UndefinedCorrelationError):
        partial_correlation(windows, 0, 1)


def test_too_few_samples(rng):
    windows = windows_from(rng.normal(size=(5, 4, 1)), rng.normal(size=(5, 2, 1)))
    with pytest.raises(InsufficientDataError):
        partial_correlation(windows, 0, 1)


# --- partial_corr_matrix ---
def test_matrix_matches_naive_double_regression():
    frame = ar_frame([0.6, -0.2], 800, seed=4)
    report = partial_corr_matrix(frame, history=4, horizon=5, subsample=5000)
    windows = make_windows(frame, 4, 5)
    for t in range(5):
        for t2 in range(t + 1, 5):
            assert report.matrix[t, t2] == pytest.approx(naive_partial_corr(windows, t, t2), abs=1e-10)
            assert report.matrix[t, t2] == pytest.approx(partial_correlation(windows, t, t2), abs=1e-10)


def test_matrix_symmetric_unit_diagonal():
    report = partial_corr_matrix(ar_frame([0.5], 1000), history=4, horizon=6)
    np.testing.assert_array_equal(report.matrix, report.matrix.T)
    np.testing.assert_array_equal(np.diag(report.matrix), np.ones(6))
    assert np.all(np.abs(report.matrix) <= 1.0)
    assert report.cond_var.shape == (6,)


def test_white_noise_matrix_is_near_zero():
    report = partial_corr_matrix(ar_frame([], 8000), history=8, horizon=8, subsample=5000)
    off = report.matrix[~np.eye(8, dtype=bool)]
    assert np.mean(np.abs(off) < 0.05) >= 0.95
    assert report.meta["samples"] == 5000


def test_ar08_decays_along_first_row():
    report = partial_corr_matrix(ar_frame([0.8], 6000), history=8, horizon=5, subsample=5000)
    row = report.matrix[0, 1:]
    assert np.all(row > 0)
    assert np.all(np.diff(row) < 0)
    implied = covariance_to_correlation(ar_conditional_cov(ArSpec((0.8,)), 5))
    np.testing.assert_allclose(report.matrix, implied, atol=0.05)


def test_conditional_variance_matches_innovations():
    report = partial_corr_matrix(ar_frame([0.5], 6000), history=8, horizon=3, subsample=5000)
    np.testing.assert_allclose(report.cond_var, np.diag(ar_conditional_cov(ArSpec((0.5,)), 3)), rtol=0.1)


def test_subsample_clamped_to_available():
    report = partial_corr_matrix(ar_frame([0.5], 300), history=4, horizon=4, subsample=5000)
    assert report.meta["samples"] == 300 - 8 + 1


def test_subsample_is_seeded():
    frame = ar_frame([0.5], 3000)
    a = partial_corr_matrix(frame, history=4, horizon=4, subsample=500, seed=1)
    b = partial_corr_matrix(frame, history=4, horizon=4, subsample=500, seed=1)
    c = partial_corr_matrix(frame, history=4, horizon=4, subsample=500, seed=2)
    np.testing.assert_array_equal(a.matrix, b.matrix)
    assert not np.array_equal(a.matrix, c.matrix)


def test_variable_out_of_range():
    with pytest.raises(InvalidDimensionError):
        partial_corr_matrix(ar_frame([0.5], 300), history=4, horizon=4, variable=2)


def test_rank_deficient_design_falls_back_to_ridge(rng):
    x = rng.normal(size=(100, 2))
    design = np.column_stack([np.ones(100), x, x[:, 0]])
    targets = x @ [1.0, -2.0] + rng.normal(size=100)
    resid, degraded = _residuals(design, targets[:, None])
    assert degraded
    np.testing.assert_allclose(design.T @ resid, 0.0, atol=1e-5)


# --- fraction_above / to_dict ---
def report_of(matrix):
    return PartialCorrReport(np.asarray(matrix, dtype=float), np.ones(len(matrix)))


def test_fraction_above_examples():
    assert fraction_above(report_of(np.eye(4)), 0.1) == 0.0
    assert fraction_above(report_of(np.full((4, 4), 0.5)), 0.1) == 1.0
    m = np.eye(4)
    m[0, 1] = m[1, 0] = 0.3
    m[0, 2] = m[2, 0] = -0.4
    m[1, 3] = m[3, 1] = 0.2
    m[2, 3] = m[3, 2] = 0.05
    assert fraction_above(report_of(m), 0.1) == 0.5


def test_to_dict_keys():
    payload = report_of(np.eye(3)).to_dict(0.1)
    assert payload["fraction_above_0.1"] == 0.0
    assert payload["cond_var"] == [1.0, 1.0, 1.0]


def test_covariance_to_correlation():
    np.testing.assert_allclose(covariance_to_correlation(np.array([[4.0, 2.0], [2.0, 9.0]])),
                               [[1.0, 1 / 3], [1 / 3, 1.0]])
