"""Forecasting models on estimated factors and their recursive evaluation.

Five linear forecasters share one least-squares core and differ in the
regressor set: all estimated factors (principal-component regression, and
a variant adding the product of the first two), the first factor alone,
L predictive indices, or two indices plus their product.  A nonparametric
forecaster smooths the target on one or two indices by local-linear
regression with a Gaussian product kernel.

Out-of-sample evaluation is fully recursive: for each target position
after the training split, the whole pipeline — window centering, optional
sieve projection, factor extraction, slicing, direction estimation, model
fitting — is re-run on data up to the period before the target, and the
target is predicted one step ahead.  Factor extraction across the growing
windows reuses one precomputed T x T Gram matrix: its leading principal
blocks are the uncentered window Grams, and each window's centered Gram
follows from such a block and its column sums, so the per-window cost is
independent of the number of predictors.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh, qr

from .exceptions import ConfigError, DegeneracyWarning, NumericalError, SuffcastError
from .factors import FactorFit, loading_pseudoinverse, _ratio_choice, _RANK_RTOL
from .panel import DataPanel
from .projection import build_sieve_basis
from .sir import (
    assign_slices,
    sdr_directions,
    select_num_indices,
    sliced_covariance_factors,
)

__all__ = [
    "LinearForecast",
    "KernelSmoother",
    "EvalReport",
    "PipelineConfig",
    "pcr_coefficients",
    "fit_linear_forecast",
    "local_linear_fit",
    "local_linear_predict",
    "in_sample_r2",
    "evaluate_methods",
    "out_of_sample_r2",
]

_REGRESSOR_SPECS = ("all_factors", "first_pc", "indices", "indices_with_interaction")
_METHODS = ("pcr", "pc1", "sf1", "sf2", "sfi", "pcri")
_SF_METHODS = ("sf1", "sf2", "sfi")
_MIN_INDICES = {"sf1": 1, "sf2": 2, "sfi": 2}
_MAX_INDICES = {"sf2": 2}  # the local-linear smoother supports at most 2 indices

# Errors that mean "this window could not be processed" rather than a bug.
_STEP_ERRORS = (SuffcastError, np.linalg.LinAlgError)


@dataclass(frozen=True, eq=False)
class LinearForecast:
    """Linear model  y_hat = intercept + design(x)' coefficients.

    ``regressor_spec`` records which regressor set the model was fit on:
    "all_factors" (principal-component regression), "first_pc" (first
    factor only), "indices" (L predictive indices), or
    "indices_with_interaction" (two or more indices plus the product of
    the first two, which ``design`` appends automatically).
    """

    coefficients: np.ndarray
    intercept: float
    regressor_spec: str

    def __post_init__(self):
        coef = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "intercept", float(self.intercept))
        if self.regressor_spec not in _REGRESSOR_SPECS:
            raise ConfigError(
                f"unknown regressor_spec {self.regressor_spec!r}; "
                f"choose from {_REGRESSOR_SPECS}"
            )
        if coef.ndim != 1 or coef.size < 1:
            raise ConfigError("coefficients must be a nonempty vector")
        if not (np.all(np.isfinite(coef)) and np.isfinite(self.intercept)):
            raise NumericalError("forecast coefficients are not finite")
        if self.regressor_spec == "first_pc" and coef.size != 1:
            raise ConfigError("first_pc forecasts have exactly one coefficient")
        if self.regressor_spec == "indices_with_interaction" and coef.size < 3:
            raise ConfigError(
                "interaction forecasts need at least 3 coefficients "
                "(two indices plus their product)"
            )

    @property
    def num_regressors(self) -> int:
        """Columns expected from the caller (before interaction expansion)."""
        if self.regressor_spec == "indices_with_interaction":
            return self.coefficients.size - 1
        return self.coefficients.size

    def design(self, regressors: np.ndarray) -> np.ndarray:
        """Expand raw regressor rows to the fitted design (no intercept)."""
        X = np.asarray(regressors, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.num_regressors:
            raise ConfigError(
                f"model expects {self.num_regressors} regressors, got {X.shape[1]}"
            )
        if self.regressor_spec == "indices_with_interaction":
            X = np.column_stack([X, X[:, 0] * X[:, 1]])
        return X

    def predict(self, regressors: np.ndarray):
        """Forecast for one regressor row (scalar) or a stack of rows."""
        single = np.ndim(regressors) == 1
        out = self.design(regressors) @ self.coefficients + self.intercept
        return float(out[0]) if single else out


@dataclass(frozen=True, eq=False)
class KernelSmoother:
    """Training data and bandwidths of a local-linear regression.

    Attributes
    ----------
    training_indices : ndarray, shape (n, L)
    training_targets : ndarray, shape (n,)
    bandwidths : ndarray, shape (L,)
        Positive kernel scale per index.
    kernel : str
        Only "gaussian" is supported.
    """

    training_indices: np.ndarray
    training_targets: np.ndarray
    bandwidths: np.ndarray
    kernel: str = "gaussian"

    def __post_init__(self):
        X = np.asarray(self.training_indices, dtype=float)
        y = np.asarray(self.training_targets, dtype=float).ravel()
        h = np.atleast_1d(np.asarray(self.bandwidths, dtype=float))
        object.__setattr__(self, "training_indices", X)
        object.__setattr__(self, "training_targets", y)
        object.__setattr__(self, "bandwidths", h)
        if self.kernel != "gaussian":
            raise ConfigError(f"unsupported kernel {self.kernel!r}")
        if X.ndim != 2:
            raise ConfigError("training_indices must be an n x L matrix")
        n, L = X.shape
        if y.shape[0] != n:
            raise ConfigError(
                f"{n} training rows but {y.shape[0]} targets"
            )
        if h.shape != (L,):
            raise ConfigError(f"need one bandwidth per index, got shape {h.shape}")
        if not (np.isfinite(h).all() and (h > 0).all()):
            raise ConfigError("bandwidths must be positive and finite")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise ConfigError("training data contain non-finite values")
        if n < L + 2:
            raise ConfigError(
                f"local-linear smoothing needs at least L+2 = {L + 2} "
                f"observations, got {n}"
            )

    @property
    def num_indices(self) -> int:
        return self.training_indices.shape[1]


@dataclass(frozen=True, eq=False)
class EvalReport:
    """Forecast evaluation summary.

    Attributes
    ----------
    r2_in : float
        In-sample R-squared of the full-sample fit, in [0, 1].
    r2_oos : float
        Out-of-sample R-squared: 1 - SSE / SST with SST about the
        test-sample mean.  At most 1; negative means the forecasts did
        worse than that mean.
    forecasts : ndarray
        One-step-ahead predictions for target positions split_index..T-1.
    split_index : int
        Position of the first forecast target (0-based).
    num_failures : int
        Evaluation steps whose pipeline failed; those forecasts were
        replaced by the training-window mean.
    """

    r2_in: float
    r2_oos: float
    forecasts: np.ndarray
    split_index: int
    num_failures: int = 0

    def __post_init__(self):
        object.__setattr__(self, "r2_in", float(self.r2_in))
        object.__setattr__(self, "r2_oos", float(self.r2_oos))
        f = np.asarray(self.forecasts, dtype=float)
        object.__setattr__(self, "forecasts", f)
        if not -1e-8 <= self.r2_in <= 1.0 + 1e-8:
            raise NumericalError(f"in-sample R² {self.r2_in} outside [0, 1]")
        if self.r2_oos > 1.0 + 1e-8:
            raise NumericalError(f"out-of-sample R² {self.r2_oos} exceeds 1")
        if not np.isfinite(f).all():
            raise NumericalError("forecasts contain non-finite values")
        if self.split_index < 1:
            raise ConfigError("split_index must be positive")
        if self.num_failures < 0:
            raise ConfigError("num_failures must be nonnegative")


# ------------------------------------------------------------ model fitting


def pcr_coefficients(fit: FactorFit, target: np.ndarray) -> LinearForecast:
    """Moment-form regression coefficients on all estimated factors.

    Exploits the factor normalization (1/T) F'F = I_K: the coefficient
    vector is the average over the T-1 forecasting pairs of y_{t+1} f_t,
    and the intercept is the mean of y_2..y_T.  Equivalent to least
    squares up to the sample mean of the factors.
    """
    y = np.asarray(target, dtype=float).ravel()
    T = fit.num_periods
    if y.shape[0] != T:
        raise ConfigError(f"fit covers {T} periods but target has {y.shape[0]}")
    if T < 2:
        raise ConfigError("need at least 2 periods to form a forecasting pair")
    coef = fit.factors[:-1].T @ y[1:] / (T - 1)
    return LinearForecast(coef, float(y[1:].mean()), "all_factors")


def fit_linear_forecast(
    regressors: np.ndarray, target: np.ndarray, spec: str = "indices"
) -> LinearForecast:
    """Ordinary least squares of the target on the regressors plus an
    intercept.

    With spec "indices_with_interaction" the product of the first two
    regressor columns is appended before fitting (so the returned model
    has one more coefficient than the input has columns).

    Raises
    ------
    ConfigError
        On unknown spec, too few rows, or shape violations.
    NumericalError
        On rank deficiency, naming the offending column: column indices
        count the supplied regressors left to right, with the appended
        interaction product last.
    """
    if spec not in _REGRESSOR_SPECS:
        raise ConfigError(
            f"unknown regressor_spec {spec!r}; choose from {_REGRESSOR_SPECS}"
        )
    X = np.asarray(regressors, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(target, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise ConfigError(f"{X.shape[0]} regressor rows but {y.shape[0]} targets")
    if spec == "first_pc" and X.shape[1] != 1:
        raise ConfigError("first_pc uses exactly one regressor column")
    if spec == "indices_with_interaction":
        if X.shape[1] < 2:
            raise ConfigError("interaction forecasts need at least 2 index columns")
        X = np.column_stack([X, X[:, 0] * X[:, 1]])
    n, m = X.shape
    if n <= m + 1:
        raise ConfigError(
            f"need more observations than regressors plus intercept "
            f"({m + 1}), got {n}"
        )
    design = np.column_stack([np.ones(n), X])
    R = np.linalg.qr(design, mode="r")
    norms = np.sqrt((design * design).sum(axis=0))
    diag = np.abs(np.diag(R))
    for j in range(design.shape[1]):
        if diag[j] <= 1e-10 * max(norms[j], 1e-300):
            raise NumericalError(
                f"regressor column {j - 1} is collinear with the intercept "
                "or preceding columns"
            )
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    return LinearForecast(beta[1:], float(beta[0]), spec)


def local_linear_fit(
    indices: np.ndarray,
    target: np.ndarray,
    bandwidths: np.ndarray | None = None,
    bandwidth_multiplier: float = 1.0,
) -> KernelSmoother:
    """Prepare a local-linear smoother of the target on 1 or 2 indices.

    The default bandwidth per index is the normal-reference rule
    1.06 * sd * n^(-1/(4+L)), scaled by ``bandwidth_multiplier``;
    explicit ``bandwidths`` are stored verbatim.

    Raises
    ------
    ConfigError
        If L is not 1 or 2, fewer than 10 observations, or nonpositive
        bandwidths/multiplier.
    NumericalError
        If an index has zero variance.
    """
    X = np.asarray(indices, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[1] not in (1, 2):
        raise ConfigError(
            f"local-linear smoothing supports 1 or 2 indices, got shape {X.shape}"
        )
    n, L = X.shape
    if n < 10:
        raise ConfigError(f"local-linear smoothing needs at least 10 rows, got {n}")
    y = np.asarray(target, dtype=float).ravel()
    sd = X.std(axis=0, ddof=1)
    bad = np.flatnonzero(~(sd > 0))
    if bad.size:
        raise NumericalError(f"index {int(bad[0])} has zero variance")
    if bandwidths is None:
        if not bandwidth_multiplier > 0:
            raise ConfigError("bandwidth multiplier must be positive")
        h = 1.06 * sd * n ** (-1.0 / (4 + L)) * bandwidth_multiplier
    else:
        h = np.broadcast_to(np.asarray(bandwidths, dtype=float), (L,)).copy()
        if not ((h > 0) & np.isfinite(h)).all():
            raise ConfigError("bandwidths must be positive and finite")
    return KernelSmoother(X.copy(), y.copy(), h)


def local_linear_predict(smoother: KernelSmoother, point: np.ndarray) -> float:
    """Local-linear prediction at one point.

    Fits a weighted least-squares plane through the training data with
    Gaussian product-kernel weights centered at the point and returns the
    plane's value there.  If essentially no training mass lies near the
    point (weight sum below 1e-8) the prediction falls back to the global
    unweighted linear fit, flagged by a DegeneracyWarning.
    """
    x0 = np.asarray(point, dtype=float).ravel()
    L = smoother.num_indices
    if x0.shape[0] != L:
        raise ConfigError(f"smoother has {L} indices but point has {x0.shape[0]}")
    if not np.isfinite(x0).all():
        raise ConfigError("evaluation point contains non-finite values")
    Z = smoother.training_indices - x0
    w = np.exp(-0.5 * ((Z / smoother.bandwidths) ** 2).sum(axis=1))
    n = Z.shape[0]
    if w.sum() < 1e-8:
        warnings.warn(
            "no training mass near the evaluation point; falling back to a "
            "global linear fit",
            DegeneracyWarning,
            stacklevel=2,
        )
        design = np.column_stack([np.ones(n), Z])
        beta, *_ = np.linalg.lstsq(design, smoother.training_targets, rcond=None)
        return float(beta[0])
    sqrt_w = np.sqrt(w)
    design = np.column_stack([np.ones(n), Z]) * sqrt_w[:, None]
    beta, *_ = np.linalg.lstsq(design, smoother.training_targets * sqrt_w, rcond=None)
    return float(beta[0])


def in_sample_r2(model, regressors: np.ndarray, target: np.ndarray) -> float:
    """1 - SSR/SST of the model's fitted values on its training data.

    ``model`` is a LinearForecast or a KernelSmoother; ``regressors`` are
    the raw training columns (for interaction models, without the product
    column, which the model re-appends itself).

    Raises
    ------
    NumericalError
        If the target has zero variance.
    """
    y = np.asarray(target, dtype=float).ravel()
    if isinstance(model, LinearForecast):
        fitted = model.predict(np.asarray(regressors, dtype=float))
    elif isinstance(model, KernelSmoother):
        X = np.asarray(regressors, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        fitted = np.array([local_linear_predict(model, row) for row in X])
    else:
        raise ConfigError(f"unsupported model type {type(model).__name__}")
    fitted = np.asarray(fitted, dtype=float).ravel()
    if fitted.shape != y.shape:
        raise ConfigError(f"{fitted.shape[0]} fitted values but {y.shape[0]} targets")
    sst = float(((y - y.mean()) ** 2).sum())
    if sst <= 0.0:
        raise NumericalError("target has zero variance; R-squared is undefined")
    ssr = float(((y - fitted) ** 2).sum())
    return 1.0 - ssr / sst


# -------------------------------------------------------------- evaluation


@dataclass(frozen=True)
class PipelineConfig:
    """Configuration of the end-to-end forecasting pipeline.

    Attributes
    ----------
    method : str
        "pcr", "pc1", "sf1", "sf2", "sfi", or "pcri" (principal-component
        regression augmented with the product of the first two factors).
    num_factors : int, optional
        Number of factors K; None selects it per window by the
        eigenvalue-ratio rule.
    num_slices : int
        Response slices H for the inverse-regression step.
    num_indices : int, str, or None
        Predictive indices L for the sf methods.  None uses the method
        default (1 for sf1, 2 for sf2/sfi); "auto" selects L per window
        by the sequential chi-square test, floored at the method default.
    bandwidth_multiplier : float
        Scales the rule-of-thumb bandwidths of the sf2 smoother.
    train_fraction : float
        Fraction of the sample used before the first forecast; the first
        target position is floor(T * train_fraction).
    refit_every : int
        Refit the pipeline every k evaluation steps (1 = fully recursive).
        Between refits, new factor values come from the stale loadings
        applied to the new cross-sections.
    """

    method: str = "sf1"
    num_factors: int | None = None
    num_slices: int = 10
    num_indices: int | str | None = None
    bandwidth_multiplier: float = 1.0
    train_fraction: float = 0.5
    refit_every: int = 1

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {_METHODS}")
        if self.num_factors is not None and self.num_factors < 1:
            raise ConfigError("num_factors must be at least 1")
        if self.num_slices < 2:
            raise ConfigError("need at least 2 slices")
        L = self.num_indices
        if L is not None and L != "auto":
            if not isinstance(L, (int, np.integer)) or isinstance(L, bool):
                raise ConfigError(
                    f"num_indices must be an integer, 'auto', or None, got {L!r}"
                )
            if L < 1:
                raise ConfigError("num_indices must be at least 1")
            floor = _MIN_INDICES.get(self.method)
            if floor is not None and L < floor:
                raise ConfigError(
                    f"method {self.method!r} needs at least {floor} indices, got {L}"
                )
            cap = _MAX_INDICES.get(self.method)
            if cap is not None and L > cap:
                raise ConfigError(
                    f"method {self.method!r} supports at most {cap} indices, got {L}"
                )
        if not self.bandwidth_multiplier > 0:
            raise ConfigError("bandwidth_multiplier must be positive")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must be strictly between 0 and 1")
        if self.refit_every < 1:
            raise ConfigError("refit_every must be at least 1")


def _centered_matmul(Z: np.ndarray, s: int, F: np.ndarray) -> np.ndarray:
    """(Z[:, :s] - row means) @ F without materializing the centered block."""
    block = Z[:, :s]
    return block @ F - np.outer(block.mean(axis=1), F.sum(axis=0))


class _PanelSource:
    """Window factor fits for a (possibly sieve-projected) predictor panel.

    ``gram_driver`` is the matrix whose T x T Gram determines the factors:
    the predictors themselves, or Q'X for an orthonormal sieve basis Q
    (the projected panel QQ'X has the same factor-side Gram).  ``lift``
    maps driver-space loadings back to predictor space (Q, or None for
    the identity).
    """

    def __init__(self, predictors, gram_driver, lift, num_factors):
        self.X = predictors
        self.Z = gram_driver
        self.lift = lift
        self.gram = gram_driver.T @ gram_driver
        self.rows = gram_driver.shape[0]
        self.num_factors = num_factors

    def max_factors(self, s: int) -> int:
        return min(self.rows, s)

    def window_fit(self, s: int):
        """FactorFit on the first s periods, plus a stale-factor closure
        mapping a period index to its factor value under this fit."""
        g = self.gram[:s, :s]
        u = g.sum(axis=0)
        Gc = g - (u[:, None] + u[None, :]) / s + u.sum() / (s * s)
        if self.num_factors is None:
            kmax = max(1, min(20, min(self.rows, s) // 2))
            need = min(kmax + 1, s)
            w, V = eigh(Gc, subset_by_index=(s - need, s - 1))
            w, V = w[::-1], V[:, ::-1]
            K = _ratio_choice(w, min(kmax, need - 1))
        else:
            K = int(self.num_factors)
            if K > min(self.rows, s):
                raise ConfigError(
                    f"num_factors {K} exceeds the window limit {min(self.rows, s)}"
                )
            w, V = eigh(Gc, subset_by_index=(s - K, s - 1))
            w, V = w[::-1], V[:, ::-1]
        lead = w[0] if w[0] > 0 else 0.0
        if lead <= 0.0:
            raise NumericalError("window is identically zero after centering")
        if np.count_nonzero(w[:K] > _RANK_RTOL * lead) < K:
            raise NumericalError(
                f"window has numerical rank below the requested {K} factors"
            )
        F = math.sqrt(s) * V[:, :K]
        B = _centered_matmul(self.Z, s, F) / s
        if self.lift is not None:
            B = self.lift @ B
        flip = np.take_along_axis(B, np.abs(B).argmax(axis=0)[None, :], axis=0)[0] < 0
        F = np.where(flip, -F, F)
        B = np.where(flip, -B, B)
        fit = FactorFit(factors=F, loadings=B, eigenvalues=w[:K] / s)

        X = self.X
        cache = {}

        def stale_row(t: int) -> np.ndarray:
            if not cache:
                lam = loading_pseudoinverse(fit)
                cache["lam"] = lam
                cache["offset"] = lam @ X[:, :s].mean(axis=1)
            return cache["lam"] @ X[:, t] - cache["offset"]

        return fit, stale_row


class _KnownFactorSource:
    """Window fits built from externally supplied (true) factors.

    Each window's factors are centered and whitened so downstream slicing
    and regression see the same normalization as estimated factors; the
    loadings are the least-squares loadings of the panel on those factors.
    The supplied orientation is kept (no sign normalization).
    """

    def __init__(self, factors, predictors):
        self.F = factors
        self.X = predictors
        self.num_factors = factors.shape[1]

    def max_factors(self, s: int) -> int:
        return self.num_factors

    def window_fit(self, s: int):
        Fw = self.F[:s]
        mu = Fw.mean(axis=0)
        C = (Fw - mu).T @ (Fw - mu) / s
        w, V = eigh(C)
        if w.min() <= _RANK_RTOL * max(w.max(), 1e-300):
            raise NumericalError("window factor covariance is singular")
        invroot = (V / np.sqrt(w)) @ V.T
        Ft = (Fw - mu) @ invroot
        B = _centered_matmul(self.X, s, Ft) / s
        fit = FactorFit(
            factors=Ft, loadings=B, eigenvalues=np.diag(B.T @ B).copy()
        )
        F_all = self.F

        def stale_row(t: int) -> np.ndarray:
            return (F_all[t] - mu) @ invroot

        return fit, stale_row


@dataclass(eq=False)
class _MethodState:
    kind: str = "none"  # "linear" | "smoother" | "none"
    model: object | None = None
    num_indices: int = 0
    regressors: np.ndarray | None = None
    error: Exception | None = None


@dataclass(eq=False)
class _WindowState:
    end: int
    fit: FactorFit | None = None
    stale_row: object = None
    directions: np.ndarray | None = None
    fit_error: Exception | None = None
    methods: dict = field(default_factory=dict)


def _resolve_num_indices(config, method, cov, window_len):
    floor = _MIN_INDICES[method]
    cap = _MAX_INDICES.get(method)
    L = config.num_indices
    if L is None:
        L = floor
    elif L == "auto":
        L = max(select_num_indices(cov, window_len, config.num_slices), floor)
        if cap is not None:
            L = min(L, cap)
    else:
        L = int(L)
    identified = min(cov.matrix.shape[0], cov.slice_means.shape[0])
    if L > identified:
        raise ConfigError(
            f"method {method!r} needs {L} indices but only {identified} are "
            "identified (the smaller of the factor count and the slice count)"
        )
    return L


def _build_state(source, y, s, methods, config, keep_regressors=False):
    """Fit the pipeline on the first s periods for every method."""
    state = _WindowState(end=s)
    try:
        state.fit, state.stale_row = source.window_fit(s)
    except _STEP_ERRORS as err:
        state.fit_error = err
        return state
    fit = state.fit
    pairs = fit.factors[:-1]
    target = y[1:s]

    sf_requested = [m for m in methods if m in _SF_METHODS]
    num_indices = {}
    index_errors = {}
    sir_error = None
    if sf_requested:
        try:
            slices = assign_slices(y[:s], config.num_slices)
            cov = sliced_covariance_factors(fit, slices)
        except _STEP_ERRORS as err:
            sir_error = err
        if sir_error is None:
            for m in sf_requested:
                try:
                    num_indices[m] = _resolve_num_indices(config, m, cov, s)
                except _STEP_ERRORS as err:
                    index_errors[m] = err
            if num_indices:
                try:
                    basis = sdr_directions(cov, fit, max(num_indices.values()))
                    state.directions = basis.directions
                except _STEP_ERRORS as err:
                    sir_error = err

    for m in methods:
        ms = _MethodState()
        state.methods[m] = ms
        if m in _SF_METHODS:
            err = index_errors.get(m, sir_error)
            if err is not None:
                ms.error = err
                continue
        try:
            if m == "pcr":
                regs, spec = pairs, "all_factors"
            elif m == "pcri":
                regs, spec = pairs, "indices_with_interaction"
            elif m == "pc1":
                regs, spec = pairs[:, :1], "first_pc"
            else:
                ms.num_indices = num_indices[m]
                regs = pairs @ state.directions[:, : ms.num_indices]
                spec = "indices" if m == "sf1" else "indices_with_interaction"
            if m == "sf2":
                ms.model = local_linear_fit(
                    regs, target, bandwidth_multiplier=config.bandwidth_multiplier
                )
                ms.kind = "smoother"
            else:
                ms.model = fit_linear_forecast(regs, target, spec)
                ms.kind = "linear"
            if keep_regressors:
                ms.regressors = regs
        except _STEP_ERRORS as err:
            ms.error = err
    return state


def _predict_step(state, method, s):
    """One-step-ahead forecast of y[s] from the (possibly stale) state."""
    if state.fit_error is not None:
        raise state.fit_error
    ms = state.methods[method]
    if ms.error is not None:
        raise ms.error
    f_row = state.fit.factors[-1] if s == state.end else state.stale_row(s - 1)
    if method in ("pcr", "pcri"):
        x = f_row
    elif method == "pc1":
        x = f_row[:1]
    else:
        x = f_row @ state.directions[:, : ms.num_indices]
    if ms.kind == "smoother":
        return local_linear_predict(ms.model, x)
    return ms.model.predict(x)


def _make_source(panel, config, covariates, known_factors):
    X = panel.predictors
    p, T = X.shape
    if covariates is not None and known_factors is not None:
        raise ConfigError("pass covariates or known_factors, not both")
    if known_factors is not None:
        F = np.asarray(known_factors, dtype=float)
        if F.ndim == 1:
            F = F[:, None]
        if F.ndim != 2 or F.shape[0] != T:
            raise ConfigError(
                f"known_factors must be T x K with T = {T}, got shape {F.shape}"
            )
        if not np.isfinite(F).all():
            raise ConfigError("known_factors contain non-finite values")
        return _KnownFactorSource(F, X)
    if covariates is not None:
        basis = build_sieve_basis(np.asarray(covariates, dtype=float))
        Q, R = qr(basis.design, mode="economic")
        diag = np.abs(np.diag(R))
        keep = diag > 1e-12 * max(diag.max(), 1e-300)
        rank = int(np.count_nonzero(keep))
        if rank < Q.shape[1]:
            warnings.warn(
                f"sieve design has rank {rank} < {Q.shape[1]} columns; "
                "projection uses the reduced subspace",
                DegeneracyWarning,
                stacklevel=3,
            )
            Q = Q[:, keep]
        return _PanelSource(X, Q.T @ X, Q, config.num_factors)
    return _PanelSource(X, X, None, config.num_factors)


def evaluate_methods(
    panel: DataPanel,
    methods,
    config: PipelineConfig | None = None,
    *,
    covariates: np.ndarray | None = None,
    known_factors: np.ndarray | None = None,
) -> dict:
    """Recursive out-of-sample evaluation of several methods on one panel.

    All methods share each window's centering, factor extraction, slicing,
    and direction estimation, so comparing methods costs little more than
    evaluating one.  Every window is centered internally with its own
    means, so no full-sample statistics leak into early windows; a panel
    that was already centered over the full sample gives the same answers
    up to floating-point roundoff, because window centering absorbs any
    prior constant shift per series.

    Parameters
    ----------
    panel : DataPanel
    methods : sequence of str
        Method tags from {"pcr", "pc1", "sf1", "sf2", "sfi", "pcri"}.
    config : PipelineConfig, optional
    covariates : ndarray (p,) or (p, d), optional
        Entity covariates; when given, factors come from the panel
        projected onto an additive B-spline sieve in these covariates.
    known_factors : ndarray (T, K), optional
        Bypass estimation and use these factor values (centered and
        whitened per window).  Mutually exclusive with ``covariates``.

    Returns
    -------
    dict mapping method tag -> EvalReport.

    Raises
    ------
    ConfigError
        On invalid methods, too few periods (< 20), or a split leaving
        under 2 training or test periods.
    NumericalError
        If the test-sample target is constant, or the full-sample fit of
        any requested method fails outright.
    """
    if config is None:
        config = PipelineConfig()
    methods = list(dict.fromkeys(methods))
    if not methods:
        raise ConfigError("no methods requested")
    for m in methods:
        if m not in _METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {_METHODS}")
    T = panel.num_periods
    if T < 20:
        raise ConfigError(f"recursive evaluation needs at least 20 periods, got {T}")
    split = int(math.floor(T * config.train_fraction))
    if split < 2 or T - split < 2:
        raise ConfigError(
            f"train_fraction {config.train_fraction} leaves {split} training "
            f"and {T - split} test periods; need at least 2 of each"
        )
    y = panel.target
    source = _make_source(panel, config, covariates, known_factors)

    test_y = y[split:]
    sst = float(((test_y - test_y.mean()) ** 2).sum())
    if sst <= 0.0:
        raise NumericalError(
            "test-sample target is constant; out-of-sample R² is undefined"
        )

    # Full-sample fits give the in-sample R²; failure here is fatal.
    full = _build_state(source, y, T, methods, config, keep_regressors=True)
    if full.fit_error is not None:
        raise full.fit_error
    r2_in = {}
    for m in methods:
        ms = full.methods[m]
        if ms.error is not None:
            raise ms.error
        r2_in[m] = in_sample_r2(ms.model, ms.regressors, y[1:])

    forecasts = {m: np.empty(T - split) for m in methods}
    failures = {m: 0 for m in methods}
    state = None
    for s in range(split, T):
        if (s - split) % config.refit_every == 0:
            state = _build_state(source, y, s, methods, config)
        for m in methods:
            try:
                value = _predict_step(state, m, s)
            except _STEP_ERRORS:
                value = float(np.mean(y[1:s]))
                failures[m] += 1
            forecasts[m][s - split] = value

    reports = {}
    for m in methods:
        sse = float(((test_y - forecasts[m]) ** 2).sum())
        reports[m] = EvalReport(
            r2_in=r2_in[m],
            r2_oos=1.0 - sse / sst,
            forecasts=forecasts[m],
            split_index=split,
            num_failures=failures[m],
        )
    return reports


def out_of_sample_r2(
    config: PipelineConfig,
    panel: DataPanel,
    *,
    covariates: np.ndarray | None = None,
    known_factors: np.ndarray | None = None,
) -> EvalReport:
    """Fully recursive out-of-sample evaluation of the configured method.

    For each target position from floor(T * train_fraction) to T-1, the
    pipeline (window centering, optional projection, factor extraction,
    slicing, direction estimation, model fit) is re-run on the data before
    the target and a one-step-ahead forecast is made.  Steps whose
    pipeline fails contribute the training-window mean instead and are
    counted in the report.
    """
    reports = evaluate_methods(
        panel,
        [config.method],
        config,
        covariates=covariates,
        known_factors=known_factors,
    )
    return reports[config.method]
