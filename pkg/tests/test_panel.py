import numpy as np
import pytest

from suffcast import DataPanel, center_panel
from suffcast.exceptions import DataQualityError


def test_center_removes_row_means():
    panel = DataPanel(np.array([[1.0, 2.0, 3.0]]), np.zeros(3))
    out = center_panel(panel)
    np.testing.assert_array_equal(out.predictors, [[-1.0, 0.0, 1.0]])
    assert out.centered


def test_center_constant_row_is_zero():
    panel = DataPanel(np.full((1, 4), 7.0), np.zeros(4))
    out = center_panel(panel)
    np.testing.assert_array_equal(out.predictors, np.zeros((1, 4)))


def test_center_leaves_target_alone():
    y = np.array([3.0, -1.0, 4.0])
    out = center_panel(DataPanel(np.ones((2, 3)), y))
    np.testing.assert_array_equal(out.target, y)


def test_center_is_idempotent_bitwise():
    rng = np.random.default_rng(42)
    panel = DataPanel(rng.standard_normal((5, 9)), rng.standard_normal(9))
    once = center_panel(panel)
    twice = center_panel(once)
    assert twice is once  # no-op, not merely close


def test_centered_rows_have_zero_mean():
    rng = np.random.default_rng(7)
    X = 100.0 + 5.0 * rng.standard_normal((8, 31))
    out = center_panel(DataPanel(X, rng.standard_normal(31)))
    scale = np.abs(X).max()
    assert np.abs(out.predictors.mean(axis=1)).max() < 1e-10 * scale


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_nonfinite_predictor_rejected(bad):
    X = np.ones((2, 5))
    X[1, 3] = bad
    with pytest.raises(DataQualityError, match="non-finite"):
        DataPanel(X, np.zeros(5))


def test_nonfinite_target_rejected():
    with pytest.raises(DataQualityError, match="period 2"):
        DataPanel(np.ones((2, 5)), np.array([0.0, 0.0, np.nan, 0.0, 0.0]))


def test_shape_mismatch_rejected():
    with pytest.raises(DataQualityError, match="periods"):
        DataPanel(np.ones((2, 5)), np.zeros(4))
