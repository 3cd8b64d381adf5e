"""Latent-factor extraction by constrained least-squares principal components.

For a centered p x T panel X the factor estimate solves

    min_{B, F}  || X - B F' ||_F^2   s.t.  (1/T) F'F = I_K,  B'B diagonal.

The solution sets the columns of F/sqrt(T) to the top-K eigenvectors of the
T x T matrix X'X, and B = X F / T.  When T > p the p x p matrix X X' is
decomposed instead and the eigenvectors converted; the output contract is
identical.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .exceptions import ConfigError, DegeneracyWarning, NumericalError
from .panel import DataPanel

__all__ = [
    "FactorFit",
    "estimate_factors",
    "eigenvalue_spectrum",
    "loading_pseudoinverse",
    "select_num_factors",
]

# Relative threshold below which an eigenvalue counts as numerically zero.
_RANK_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class FactorFit:
    """Result of a least-squares factor extraction.

    Attributes
    ----------
    factors : ndarray, shape (T, K)
        Estimated factor series, normalized so (1/T) F'F = I_K.
    loadings : ndarray, shape (p, K)
        Estimated loadings with diagonal Gram matrix B'B.
    eigenvalues : ndarray, shape (K,)
        Top-K eigenvalues of (1/T) X'X, descending.  Equal to the diagonal
        of B'B.
    """

    factors: np.ndarray
    loadings: np.ndarray
    eigenvalues: np.ndarray

    @property
    def num_factors(self) -> int:
        return self.factors.shape[1]

    @property
    def num_periods(self) -> int:
        return self.factors.shape[0]


def _top_eigenpairs(panel: DataPanel, k: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Top-k eigenvalues of X'X (descending) and the matching factor block
    F = sqrt(T) * eigenvectors, working on whichever Gram side is smaller."""
    X = panel.predictors
    p, T = X.shape
    if T <= p:
        G = X.T @ X
        w, V = eigh(G, subset_by_index=(T - k, T - 1))
        w, V = w[::-1], V[:, ::-1]
        lead = w[0] if w[0] > 0 else 0.0
        return w, np.sqrt(T) * V, lead
    G = X @ X.T
    w, U = eigh(G, subset_by_index=(p - k, p - 1))
    w, U = w[::-1], U[:, ::-1]
    lead = w[0] if w[0] > 0 else 0.0
    # Convert eigenvectors of XX' to eigenvectors of X'X: v = X'u / sqrt(w).
    # Guard the division; callers reject rank-deficient requests first.
    safe = np.where(w > 0, w, 1.0)
    V = (X.T @ U) / np.sqrt(safe)
    return w, np.sqrt(T) * V, lead


def _require_centered(panel: DataPanel, op: str) -> None:
    if not panel.centered:
        raise ConfigError(f"{op} requires a centered panel; call center_panel first")


def estimate_factors(panel: DataPanel, num_factors: int) -> FactorFit:
    """Extract ``num_factors`` latent factors from a centered panel.

    Parameters
    ----------
    panel : DataPanel
        Centered predictor panel (p x T).
    num_factors : int
        Number of factors K, 1 <= K <= min(p, T).

    Returns
    -------
    FactorFit

    Raises
    ------
    ConfigError
        If the panel is not centered or K is out of range.
    NumericalError
        If K exceeds the numerical rank of the panel.
    """
    _require_centered(panel, "estimate_factors")
    p, T = panel.predictors.shape
    K = int(num_factors)
    if not 1 <= K <= min(p, T):
        raise ConfigError(
            f"num_factors must be in [1, {min(p, T)}] for a {p} x {T} panel, got {K}"
        )
    w, F, lead = _top_eigenpairs(panel, K)
    if lead <= 0.0:
        raise NumericalError("panel is identically zero after centering (rank 0)")
    rank = int(np.count_nonzero(w > _RANK_RTOL * lead))
    if rank < K:
        raise NumericalError(
            f"requested {K} factors but the panel has numerical rank {rank}"
        )
    B = panel.predictors @ F / T
    # Deterministic signs: the largest-|entry| loading in each column is positive.
    flip = np.take_along_axis(
        B, np.abs(B).argmax(axis=0)[None, :], axis=0
    )[0] < 0
    F = np.where(flip, -F, F)
    B = np.where(flip, -B, B)
    return FactorFit(factors=F, loadings=B, eigenvalues=w / T)


def loading_pseudoinverse(fit: FactorFit) -> np.ndarray:
    """Left inverse of the loadings, (B'B)^{-1} B', shape (K, p).

    For a least-squares fit this satisfies the exact identity
    ``loading_pseudoinverse(fit) @ X == fit.factors.T`` on the panel the fit
    came from, which lets factor-space and predictor-space computations be
    interchanged.

    Raises
    ------
    NumericalError
        If B'B is singular.
    """
    B = fit.loadings
    BtB = B.T @ B
    d = np.diag(BtB)
    if d.min() <= _RANK_RTOL * max(d.max(), 1e-300):
        raise NumericalError("loading Gram matrix B'B is singular")
    return np.linalg.solve(BtB, B.T)


def select_num_factors(panel: DataPanel, kmax: int | None = None) -> int:
    """Choose the number of factors by the eigenvalue-ratio rule.

    Scans i = 1..kmax and returns the i maximizing the ratio of adjacent
    eigenvalues of X'X, with ties broken toward the smallest i.  When the
    panel's numerical rank r lies inside the scan range, the ratio at i = r
    has a vanishing denominator; that boundary wins (the ratio is effectively
    infinite), the ratios beyond it are excluded as 0/0 noise, and a
    DegeneracyWarning reports the rank.

    Parameters
    ----------
    panel : DataPanel
        Centered panel.
    kmax : int, optional
        Largest candidate; defaults to min(20, min(p, T) // 2).
    """
    _require_centered(panel, "select_num_factors")
    p, T = panel.predictors.shape
    n = min(p, T)
    if kmax is None:
        kmax = max(1, min(20, n // 2))
    kmax = int(kmax)
    if not 1 <= kmax <= n - 1:
        raise ConfigError(f"kmax must be in [1, {n - 1}] for a {p} x {T} panel, got {kmax}")
    w, _, lead = _top_eigenpairs(panel, kmax + 1)
    if lead <= 0.0:
        raise NumericalError("panel is identically zero after centering (rank 0)")
    return _ratio_choice(w, kmax)


def _ratio_choice(eigenvalues: np.ndarray, kmax: int) -> int:
    """Eigenvalue-ratio rule on a descending spectrum of length >= kmax + 1."""
    lam = np.maximum(np.asarray(eigenvalues, dtype=float)[: kmax + 1], 0.0)
    if lam[0] <= 0.0:
        raise NumericalError("panel is identically zero after centering (rank 0)")
    tol = _RANK_RTOL * lam[0]
    degenerate = lam[1:] <= tol  # denominator of ratio i is lam[i] (0-based)
    if degenerate.any():
        rank = int(np.flatnonzero(degenerate)[0]) + 1
        warnings.warn(
            f"panel numerical rank is {rank} (< kmax+1 = {kmax + 1}); "
            "ratios past the rank boundary are excluded",
            DegeneracyWarning,
            stacklevel=2,
        )
        return rank
    ratios = lam[:-1] / lam[1:]
    return int(np.argmax(ratios)) + 1


def eigenvalue_spectrum(panel: DataPanel, k: int) -> np.ndarray:
    """Top-k eigenvalues of (1/T) X'X in descending order (no factor build)."""
    _require_centered(panel, "eigenvalue_spectrum")
    p, T = panel.predictors.shape
    if not 1 <= k <= min(p, T):
        raise ConfigError(f"k must be in [1, {min(p, T)}], got {k}")
    w, _, _ = _top_eigenpairs(panel, k)
    return np.maximum(w, 0.0) / T
