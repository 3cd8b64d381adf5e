"""Predictor-panel container and centering.

A panel holds a p x T matrix of predictor series (rows are series, columns
are time periods) together with the scalar target series of length T.
Forecasting pairs the predictors at time t with the target at t+1, so both
live on the same time grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import DataQualityError

__all__ = ["DataPanel", "center_panel"]


@dataclass(frozen=True)
class DataPanel:
    """High-dimensional predictor panel with a scalar forecast target.

    Parameters
    ----------
    predictors : ndarray, shape (p, T)
        One row per predictor series, one column per time period.
    target : ndarray, shape (T,)
        Scalar series aligned with the predictor columns.
    centered : bool
        True once each predictor row has had its time-mean removed.
    """

    predictors: np.ndarray
    target: np.ndarray
    centered: bool = False
    names: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        X = np.asarray(self.predictors, dtype=float)
        y = np.asarray(self.target, dtype=float)
        if X.ndim != 2:
            raise DataQualityError(f"predictors must be 2-d, got shape {X.shape}")
        if y.ndim != 1:
            raise DataQualityError(f"target must be 1-d, got shape {y.shape}")
        if X.shape[1] != y.shape[0]:
            raise DataQualityError(
                f"predictors have {X.shape[1]} periods but target has {y.shape[0]}"
            )
        if X.shape[0] < 1 or X.shape[1] < 2:
            raise DataQualityError(f"panel too small: shape {X.shape}")
        if not np.isfinite(X).all():
            bad = np.argwhere(~np.isfinite(X))
            i, t = bad[0]
            raise DataQualityError(
                f"predictors contain {len(bad)} non-finite entries "
                f"(first at series {i}, period {t})"
            )
        if not np.isfinite(y).all():
            t = int(np.flatnonzero(~np.isfinite(y))[0])
            raise DataQualityError(f"target contains non-finite entry at period {t}")
        object.__setattr__(self, "predictors", X)
        object.__setattr__(self, "target", y)

    @property
    def num_series(self) -> int:
        return self.predictors.shape[0]

    @property
    def num_periods(self) -> int:
        return self.predictors.shape[1]


def center_panel(panel: DataPanel) -> DataPanel:
    """Remove the time-mean of each predictor series.

    The target is left untouched.  Centering an already-centered panel is a
    no-op (bit-identical predictors).

    Returns
    -------
    DataPanel
        New panel with ``centered=True``.
    """
    if panel.centered:
        return panel
    X = panel.predictors - panel.predictors.mean(axis=1, keepdims=True)
    return replace(panel, predictors=X, centered=True)
