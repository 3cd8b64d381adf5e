"""Sliced inverse regression on estimated factors.

The forecasting pairs are (f_t, y_{t+1}) for t = 1..T-1.  Sorting the pairs
by the response and averaging the factor estimates within response slices
gives a covariance-of-slice-means matrix whose top eigenvectors span the
sufficient predictive directions.  The same matrix can be built from
predictor-space slice means through the loading pseudo-inverse; for a
least-squares PCA fit the two routes agree to rounding.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh
from scipy.stats import chi2

from .exceptions import ConfigError, DegeneracyWarning
from .factors import FactorFit, loading_pseudoinverse
from .panel import DataPanel

__all__ = [
    "SliceAssignment",
    "SlicedCovariance",
    "SdrBasis",
    "assign_slices",
    "sliced_covariance_factors",
    "sliced_covariance_loadings",
    "sdr_directions",
    "predictive_indices",
    "select_num_indices",
]


@dataclass(frozen=True, eq=False)
class SliceAssignment:
    """Partition of the T-1 forecasting pairs into response slices.

    Attributes
    ----------
    num_slices : int
        Slice count H.
    slice_size : int
        Observations per full slice, c = ceil((T-1)/H).
    order : ndarray, shape (T-1,)
        Time indices t (0-based) sorted ascending by y_{t+1}, ties broken by
        time index (stable sort).
    slice_ids : ndarray, shape (T-1,)
        Slice number of each ordered position.
    sizes : ndarray, shape (H,)
        Observations in each slice.
    """

    num_slices: int
    slice_size: int
    order: np.ndarray
    slice_ids: np.ndarray
    sizes: np.ndarray

    @property
    def num_pairs(self) -> int:
        return self.order.size

    def members(self, h: int) -> np.ndarray:
        """Original time indices t belonging to slice h."""
        return self.order[self.slice_ids == h]


@dataclass(frozen=True, eq=False)
class SlicedCovariance:
    """Covariance of slice means, the kernel matrix of sliced inverse
    regression.

    Attributes
    ----------
    matrix : ndarray, shape (K, K)
        Symmetric PSD estimate of cov(E[f | y]).
    slice_means : ndarray, shape (H, K)
        Mean factor estimate within each slice.
    source : str
        "factor_form" or "loading_form".
    """

    matrix: np.ndarray
    slice_means: np.ndarray
    source: str


@dataclass(frozen=True, eq=False)
class SdrBasis:
    """Sufficient-direction basis extracted from a SlicedCovariance.

    Attributes
    ----------
    directions : ndarray, shape (K, L)
        Orthonormal eigenvectors of the sliced covariance, leading first.
    eigenvalues : ndarray, shape (L,)
        Matching eigenvalues, descending.
    predictor_directions : ndarray, shape (p, L)
        The same directions mapped to predictor space via the loading
        pseudo-inverse transpose.
    """

    directions: np.ndarray
    eigenvalues: np.ndarray
    predictor_directions: np.ndarray

    @property
    def num_indices(self) -> int:
        return self.directions.shape[1]


def assign_slices(target: np.ndarray, num_slices: int) -> SliceAssignment:
    """Sort the forecasting pairs by response and cut them into slices.

    The pair for time t uses the response y_{t+1}, so a target of length T
    yields T-1 pairs.  The first H-1 slices hold c = ceil((T-1)/H)
    observations each and the last absorbs the remainder.  When T-1 is too
    small for that scheme (the remainder would be empty), the partition
    falls back to a balanced split with sizes differing by at most one.

    Raises
    ------
    ConfigError
        If H < 2 or H > T-1.
    """
    y = np.asarray(target, dtype=float)
    H = int(num_slices)
    n = y.shape[0] - 1
    if H < 2:
        raise ConfigError(f"need at least 2 slices, got {H}")
    if H > n:
        raise ConfigError(f"{H} slices need at least {H + 1} periods, got {n + 1}")
    order = np.argsort(y[1:], kind="stable")
    c = math.ceil(n / H)
    if n - (H - 1) * c >= 1:
        sizes = np.full(H, c)
        sizes[-1] = n - (H - 1) * c
    else:
        sizes = np.full(H, n // H)
        sizes[: n % H] += 1
    slice_ids = np.repeat(np.arange(H), sizes)
    return SliceAssignment(
        num_slices=H,
        slice_size=c,
        order=order,
        slice_ids=slice_ids,
        sizes=sizes,
    )


def _check_aligned(fit: FactorFit, slices: SliceAssignment) -> None:
    if fit.num_periods != slices.num_pairs + 1:
        raise ConfigError(
            f"fit covers {fit.num_periods} periods but slices were built "
            f"for {slices.num_pairs + 1}"
        )


def _slice_means(values: np.ndarray, slices: SliceAssignment) -> np.ndarray:
    """Mean of ``values`` (rows indexed by time t = 0..T-2) within each slice."""
    ordered = values[slices.order]
    starts = np.concatenate([[0], np.cumsum(slices.sizes)[:-1]])
    sums = np.add.reduceat(ordered, starts, axis=0)
    return sums / slices.sizes[:, None]


def _cov_of_means(means: np.ndarray) -> np.ndarray:
    S = means.T @ means / means.shape[0]
    return (S + S.T) / 2.0


def sliced_covariance_factors(
    fit: FactorFit, slices: SliceAssignment
) -> SlicedCovariance:
    """Sliced covariance from factor-space slice means:
    (1/H) sum_h mbar_h mbar_h'."""
    _check_aligned(fit, slices)
    means = _slice_means(fit.factors[: slices.num_pairs], slices)
    return SlicedCovariance(
        matrix=_cov_of_means(means), slice_means=means, source="factor_form"
    )


def sliced_covariance_loadings(
    panel: DataPanel, fit: FactorFit, slices: SliceAssignment
) -> SlicedCovariance:
    """Sliced covariance from predictor-space slice means mapped through the
    loading pseudo-inverse.

    Equals the factor form to rounding when ``fit`` came from
    ``estimate_factors`` on this panel; if the supplied factors do not
    satisfy that least-squares identity, the two forms may differ and a
    warning is issued.
    """
    _check_aligned(fit, slices)
    if not panel.centered:
        raise ConfigError("sliced_covariance_loadings requires a centered panel")
    if panel.num_periods != fit.num_periods:
        raise ConfigError(
            f"panel covers {panel.num_periods} periods but fit covers {fit.num_periods}"
        )
    lam = loading_pseudoinverse(fit)
    projected = lam @ panel.predictors  # (K, T); equals factors' for LS fits
    gap = np.abs(projected.T - fit.factors).max()
    if gap > 1e-8 * max(1.0, np.abs(fit.factors).max()):
        warnings.warn(
            "supplied factors are not the least-squares PCA solution for this "
            "panel; factor-form and loading-form covariances may differ",
            UserWarning,
            stacklevel=2,
        )
    means = _slice_means(projected.T[: slices.num_pairs], slices)
    return SlicedCovariance(
        matrix=_cov_of_means(means), slice_means=means, source="loading_form"
    )


def sdr_directions(cov: SlicedCovariance, fit: FactorFit, num_indices: int) -> SdrBasis:
    """Leading eigenvectors of the sliced covariance and their predictor-space
    images.

    Parameters
    ----------
    cov : SlicedCovariance
    fit : FactorFit
        Supplies the loadings used to map directions to predictor space.
    num_indices : int
        Number of directions L, 1 <= L <= K and L <= H.

    Warns
    -----
    DegeneracyWarning
        When the eigenvalue gap at the cut, lambda_L - lambda_{L+1}, is
        below 1e-10: the selected subspace is not numerically identified
        (directions are still returned deterministically).
    """
    K = cov.matrix.shape[0]
    H = cov.slice_means.shape[0]
    L = int(num_indices)
    if not 1 <= L <= K:
        raise ConfigError(f"num_indices must be in [1, {K}], got {L}")
    if L > H:
        raise ConfigError(
            f"num_indices {L} exceeds the {H} slices; directions beyond H are "
            "not identified"
        )
    if fit.num_factors != K:
        raise ConfigError(
            f"fit has {fit.num_factors} factors but covariance is {K} x {K}"
        )
    w, V = eigh(cov.matrix)
    w, V = w[::-1], V[:, ::-1]
    tail = w[L] if L < K else 0.0
    if w[L - 1] - tail < 1e-10:
        warnings.warn(
            f"eigenvalue gap at L={L} is below 1e-10; the predictive subspace "
            "is numerically degenerate",
            DegeneracyWarning,
            stacklevel=2,
        )
    psi = V[:, :L]
    flip = np.take_along_axis(psi, np.abs(psi).argmax(axis=0)[None, :], axis=0)[0] < 0
    psi = np.where(flip, -psi, psi)
    xi = loading_pseudoinverse(fit).T @ psi
    return SdrBasis(directions=psi, eigenvalues=w[:L], predictor_directions=xi)


def predictive_indices(basis: SdrBasis, fit: FactorFit) -> np.ndarray:
    """Predictive indices psi_j'f_t for t = 1..T-1, shape (T-1, L)."""
    if basis.directions.shape[0] != fit.num_factors:
        raise ConfigError(
            f"basis lives in {basis.directions.shape[0]} dimensions but fit "
            f"has {fit.num_factors} factors"
        )
    return fit.factors[:-1] @ basis.directions


def select_num_indices(
    cov: SlicedCovariance, num_periods: int, num_slices: int, alpha: float = 0.05
) -> int:
    """Choose the number of predictive indices by a sequential chi-square test.

    For L = 0, 1, ... the statistic (T-1) * (sum of the K-L smallest
    eigenvalues of the sliced covariance) is compared to the chi-square
    quantile with (K-L)(H-L-1) degrees of freedom at level ``alpha``; the
    smallest L not rejected is returned.  The scan cannot pass H-1: if it
    gets there, that L is returned with a warning.

    Parameters
    ----------
    cov : SlicedCovariance
    num_periods : int
        The T whose T-1 pairs produced ``cov``.
    num_slices : int
        The H used in slicing.
    alpha : float
        Test level, default 0.05.
    """
    K = cov.matrix.shape[0]
    T = int(num_periods)
    H = int(num_slices)
    if K < 2:
        raise ConfigError("index selection needs at least 2 factors")
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")
    if T - 1 < H:
        raise ConfigError(f"{H} slices need at least {H + 1} periods, got {T}")
    eigs = np.sort(eigh(cov.matrix, eigvals_only=True))[::-1]
    for L in range(K + 1):
        if H - L - 1 <= 0:
            warnings.warn(
                f"index scan reached the slice bound H-1 = {H - 1} without "
                "acceptance; returning it",
                DegeneracyWarning,
                stacklevel=2,
            )
            return L
        stat = (T - 1) * max(float(np.sum(eigs[L:])), 0.0)
        df = (K - L) * (H - L - 1)
        if stat <= chi2.ppf(1.0 - alpha, df):
            return L
    return min(K, H - 1)  # unreachable: L = K always accepts (statistic 0)
