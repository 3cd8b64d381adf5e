"""Projected principal components: smooth the panel onto observed
entity-level covariates before extracting factors.

When loadings are (approximately) smooth functions of observed covariates
z_i, projecting each time period's cross-section onto an additive B-spline
sieve in z removes most idiosyncratic noise while keeping the common
component, so PCA on the projected panel recovers factors well even for
short samples.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline
from scipy.linalg import lstsq

from .exceptions import ConfigError, DegeneracyWarning
from .factors import FactorFit, estimate_factors
from .panel import DataPanel

__all__ = [
    "SieveBasis",
    "default_num_basis",
    "build_sieve_basis",
    "project_panel",
    "projected_factors",
]


@dataclass(frozen=True, eq=False)
class SieveBasis:
    """Additive B-spline design over entity covariates.

    Attributes
    ----------
    covariates : ndarray, shape (p, d)
    degree : int
        Spline degree (3 = cubic).
    num_basis : int
        Requested basis functions J per covariate.
    knots : tuple of ndarray
        Full (clamped) knot vector per covariate.
    design : ndarray, shape (p, sum of block sizes)
        Basis evaluations, one contiguous block per covariate.  Blocks have
        J columns unless tied knots forced a reduction.
    block_sizes : tuple of int
        Actual number of columns per covariate block.
    """

    covariates: np.ndarray
    degree: int
    num_basis: int
    knots: tuple
    design: np.ndarray
    block_sizes: tuple


def default_num_basis(p: int, degree: int = 3) -> int:
    """Default sieve size: max(degree + 1, ceil(p**0.25))."""
    return max(degree + 1, math.ceil(p**0.25))


def _covariate_block(z: np.ndarray, J: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Design block and knot vector for one covariate."""
    lo, hi = z.min(), z.max()
    if lo == hi:
        warnings.warn(
            "constant covariate column: falling back to a single constant "
            "basis function (rank 1)",
            DegeneracyWarning,
            stacklevel=3,
        )
        return np.ones((z.size, 1)), np.array([lo, hi])
    n_interior = J - degree - 1
    qs = np.linspace(0.0, 1.0, n_interior + 2)[1:-1]
    interior = np.quantile(z, qs) if n_interior > 0 else np.empty(0)
    interior = np.unique(interior)
    interior = interior[(interior > lo) & (interior < hi)]
    if interior.size < n_interior:
        warnings.warn(
            f"tied covariate quantiles: basis reduced from {J} to "
            f"{degree + 1 + interior.size} functions",
            DegeneracyWarning,
            stacklevel=3,
        )
    t = np.concatenate([np.full(degree + 1, lo), interior, np.full(degree + 1, hi)])
    block = BSpline.design_matrix(z, t, degree, extrapolate=False).toarray()
    return block, t


def build_sieve_basis(
    covariates: np.ndarray, num_basis: int | None = None, degree: int = 3
) -> SieveBasis:
    """Assemble the additive B-spline design over one or more covariates.

    Parameters
    ----------
    covariates : array, shape (p,) or (p, d)
        Observed covariate(s) per entity.
    num_basis : int, optional
        Basis functions J per covariate; default max(degree+1, ceil(p^0.25)).
        Interior knots sit at equally spaced sample quantiles.
    degree : int
        Spline degree, default cubic.

    Raises
    ------
    ConfigError
        If J < degree + 1 or the design is not a strict smoother (p <= J*d).
    """
    Z = np.asarray(covariates, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.ndim != 2 or Z.shape[0] < 2:
        raise ConfigError(f"covariates must be (p, d) with p >= 2, got shape {Z.shape}")
    if not np.isfinite(Z).all():
        raise ConfigError("covariates contain non-finite values")
    p, d = Z.shape
    if degree < 0:
        raise ConfigError(f"degree must be nonnegative, got {degree}")
    J = default_num_basis(p, degree) if num_basis is None else int(num_basis)
    if J < degree + 1:
        raise ConfigError(f"num_basis must be at least degree+1 = {degree + 1}, got {J}")
    if p <= J * d:
        raise ConfigError(
            f"projection must be a strict smoother: need p > J*d, got p={p}, J*d={J * d}"
        )
    blocks, knots = [], []
    for j in range(d):
        block, t = _covariate_block(Z[:, j], J, degree)
        blocks.append(block)
        knots.append(t)
    design = np.hstack(blocks)
    return SieveBasis(
        covariates=Z,
        degree=degree,
        num_basis=J,
        knots=tuple(knots),
        design=design,
        block_sizes=tuple(b.shape[1] for b in blocks),
    )


def project_panel(panel: DataPanel, basis: SieveBasis) -> DataPanel:
    """Project the panel onto the sieve space: X_hat = P X with
    P = Phi (Phi'Phi)^{-1} Phi'.

    The solve is rank-revealing (SVD-based least squares), so an
    ill-conditioned design degrades to the pseudo-inverse with a warning
    instead of failing.
    """
    if not panel.centered:
        raise ConfigError("project_panel requires a centered panel")
    A = basis.design
    if A.shape[0] != panel.num_series:
        raise ConfigError(
            f"basis was built for {A.shape[0]} entities but panel has "
            f"{panel.num_series} series"
        )
    coef, _, rank, _ = lstsq(A, panel.predictors)
    if rank < A.shape[1]:
        warnings.warn(
            f"sieve design has rank {rank} < {A.shape[1]} columns; "
            "projection used the pseudo-inverse",
            DegeneracyWarning,
            stacklevel=2,
        )
    from dataclasses import replace

    return replace(panel, predictors=A @ coef)


def projected_factors(panel: DataPanel, basis: SieveBasis, num_factors: int) -> FactorFit:
    """Factor extraction on the projected panel; loadings are the projected
    loadings T^{-1} X_hat F_hat."""
    return estimate_factors(project_panel(panel, basis), num_factors)
