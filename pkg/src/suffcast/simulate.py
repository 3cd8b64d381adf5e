"""Synthetic factor-model panels for calibration and method studies.

Four data-generating processes share the same panel mechanics
(x_it = b_i'f_t + u_it with AR(1) factors and AR(1) idiosyncratic noise)
and differ in how the target is built from the factors:

- ``linear``:         y_{t+1} = phi'f_t + sigma_y * eps,  K defaults to 5
- ``interaction``:    y_{t+1} = f_1t (f_2t + f_3t + 1) + eps,  K defaults to 7
- ``semiparametric``: interaction target with K = 3 and loadings that are
                      smooth functions of an observed covariate
- ``null``:           y independent of everything

AR coefficients are drawn once per master seed from U[0.2, 0.8] and shared
by every replication; loadings, factor paths, noise, and (for the
semiparametric process) covariates are redrawn per replication from a
deterministic per-rep stream.

Because the raw factors are not variance-standardized, they only match what
PCA estimates after the canonical rotation that makes (1/T) F'F = I with a
diagonal loading Gram; ``canonical_rotation`` builds it and ``TrueModel``
carries the rotated objects that estimates should be compared against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .exceptions import ConfigError, NumericalError
from .panel import DataPanel

__all__ = [
    "SimConfig",
    "TrueModel",
    "SimulatedData",
    "ar_coefficients",
    "rep_rng",
    "generate",
    "semiparametric_loadings",
    "canonical_rotation",
    "subspace_r2",
]

_DGPS = ("linear", "interaction", "semiparametric", "null")
_DEFAULT_K = {"linear": 5, "interaction": 7, "semiparametric": 3, "null": 5}
_PHI_LINEAR = (0.8, 0.5, 0.3)  # remaining entries are zero


@dataclass(frozen=True)
class SimConfig:
    """Configuration of a simulation study.

    Attributes
    ----------
    dgp : str
        One of "linear", "interaction", "semiparametric", "null".
    p, T : int
        Panel dimensions.
    K : int, optional
        Number of factors; defaults to 5 / 7 / 3 / 5 by process.
    ar_factor, ar_idio : float or array, optional
        AR(1) coefficients of factors (length K) and idiosyncratic noise
        (length p).  Default: drawn from U[0.2, 0.8] once per master seed.
        Coefficients set persistence only; every series is normalized to
        unit stationary variance.
    sigma_y : float, optional
        Target noise scale.  Default for "linear": sqrt(Var(phi'f)) = ||phi||
        given the unit-variance factors, which puts the infeasible best
        forecast at exactly 50% R-squared.  Default 1.0 elsewhere.
    phi : array, optional
        Index vector of the linear target; default (0.8, 0.5, 0.3, 0, ...).
    idio_scale : float
        Multiplier on the idiosyncratic series (0 gives a noiseless
        factor panel).
    loading_noise : float
        Scale of additive loading noise for the semiparametric process.
    seed : int
        Master seed.
    reps : int
        Replication count used by study drivers; generate() takes a rep index.
    """

    dgp: str
    p: int
    T: int
    K: int | None = None
    ar_factor: object | None = None
    ar_idio: object | None = None
    sigma_y: float | None = None
    phi: object | None = None
    idio_scale: float = 1.0
    loading_noise: float = 0.0
    seed: int = 0
    reps: int = 1

    def __post_init__(self):
        if self.dgp not in _DGPS:
            raise ConfigError(f"unknown dgp {self.dgp!r}; choose from {_DGPS}")
        if self.p < 1 or self.T < 3:
            raise ConfigError(f"panel must be at least 1 x 3, got {self.p} x {self.T}")
        K = self.num_factors
        if K < 1 or K > min(self.p, self.T):
            raise ConfigError(f"K={K} out of range for a {self.p} x {self.T} panel")
        if self.dgp in ("interaction", "semiparametric") and K < 3:
            raise ConfigError(f"the {self.dgp} target needs K >= 3, got {K}")
        if self.dgp == "semiparametric" and K != 3:
            raise ConfigError("the semiparametric process defines exactly 3 loadings")
        if self.phi is not None and len(np.atleast_1d(self.phi)) != K:
            raise ConfigError(f"phi must have length K={K}")
        if self.sigma_y is not None and self.sigma_y < 0:
            raise ConfigError("sigma_y must be nonnegative")
        if self.idio_scale < 0 or self.loading_noise < 0:
            raise ConfigError("noise scales must be nonnegative")
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        for name, val, m in (
            ("ar_factor", self.ar_factor, K),
            ("ar_idio", self.ar_idio, self.p),
        ):
            if val is not None:
                arr = np.broadcast_to(np.asarray(val, dtype=float), (m,))
                if np.abs(arr).max() >= 1.0:
                    raise ConfigError(f"{name} must be inside (-1, 1) for stationarity")

    @property
    def num_factors(self) -> int:
        return self.K if self.K is not None else _DEFAULT_K[self.dgp]


@dataclass(frozen=True, eq=False)
class TrueModel:
    """Ground truth of one simulated panel, in both raw and rotated form.

    ``rotation`` is the K x K matrix H for which the rotated factors
    f~_t = H f_t satisfy (1/T) F~'F~ = I_K and the rotated loadings
    B~ = B H^{-1} have a diagonal Gram matrix — the normalization PCA
    estimates.  ``central_basis`` is an orthonormal basis (K x L) of the
    predictive subspace expressed in rotated coordinates; it is what
    estimated directions should be compared against.
    """

    factors: np.ndarray
    loadings: np.ndarray
    rotation: np.ndarray
    central_basis: np.ndarray

    @property
    def rotated_factors(self) -> np.ndarray:
        return self.factors @ self.rotation.T

    @property
    def rotated_loadings(self) -> np.ndarray:
        return self.loadings @ np.linalg.inv(self.rotation)


@dataclass(frozen=True, eq=False)
class SimulatedData:
    panel: DataPanel
    truth: TrueModel
    covariates: np.ndarray | None = None


def _param_rng(config: SimConfig) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(0,)))


def rep_rng(config: SimConfig, rep: int) -> np.random.Generator:
    """Deterministic per-replication stream derived from the master seed."""
    if rep < 0:
        raise ConfigError(f"rep index must be nonnegative, got {rep}")
    return np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(rep + 1,)))


def ar_coefficients(config: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """AR(1) coefficients (alpha for factors, rho for noise), fixed across
    replications of one master seed."""
    K = config.num_factors
    rng = _param_rng(config)
    alpha = rng.uniform(0.2, 0.8, size=K)
    rho = rng.uniform(0.2, 0.8, size=config.p)
    if config.ar_factor is not None:
        alpha = np.broadcast_to(np.asarray(config.ar_factor, dtype=float), (K,)).copy()
    if config.ar_idio is not None:
        rho = np.broadcast_to(np.asarray(config.ar_idio, dtype=float), (config.p,)).copy()
    return alpha, rho


def _ar1_paths(rng: np.random.Generator, n: int, coeffs: np.ndarray) -> np.ndarray:
    """n steps of independent AR(1) series with unit stationary variance,
    started from the stationary law.  Returns shape (n, len(coeffs)).

    Innovations are scaled by sqrt(1 - a^2), so the coefficient controls
    persistence only, never the marginal scale.  Keeping every factor at
    variance one separates the two roles of the AR draw — memory vs.
    magnitude — and gives the studies their designed geometry: factors are
    exchangeable for the principal-component basis (a flat profile of
    target correlations), population fits sit at fixed fractions of the
    target variance regardless of the persistence draw, and no single
    component dominates the first principal component.  Letting the
    marginal variance ride with the coefficient would break all of
    those."""
    e = rng.standard_normal((n, coeffs.size))
    scale = np.sqrt(1.0 - coeffs**2)
    out = np.empty_like(e)
    out[0] = e[0]
    for t in range(1, n):
        out[t] = coeffs * out[t - 1] + scale * e[t]
    return out


def _phi_linear(K: int) -> np.ndarray:
    phi = np.zeros(K)
    head = min(K, len(_PHI_LINEAR))
    phi[:head] = _PHI_LINEAR[:head]
    return phi


def _interaction_link(factors: np.ndarray) -> np.ndarray:
    """Noiseless interaction target: f_1 (f_2 + f_3 + 1) rowwise."""
    return factors[:, 0] * (factors[:, 1] + factors[:, 2] + 1.0)


def semiparametric_loadings(z: np.ndarray) -> np.ndarray:
    """Loading curves of the semiparametric process at covariate values z.

    Returns the len(z) x 3 matrix with columns (z, z^2 - 1, z^3 - 2z).  Each
    curve has mean zero under a standard normal covariate, and adjacent
    pairs are uncorrelated; the first and third are not (E[z(z^3-2z)] = 1).
    """
    z = np.asarray(z, dtype=float).ravel()
    return np.column_stack([z, z**2 - 1.0, z**3 - 2.0 * z])


def _interaction_basis(K: int) -> np.ndarray:
    phi1 = np.zeros(K)
    phi1[0] = 1.0
    phi2 = np.zeros(K)
    phi2[1] = phi2[2] = 1.0 / math.sqrt(2.0)
    return np.column_stack([phi1, phi2])


def generate(config: SimConfig, rep: int = 0) -> SimulatedData:
    """Generate one replication of the configured process.

    Per-rep draw order (fixed for reproducibility): covariates (if any),
    loadings, factor innovations, idiosyncratic innovations, target noise.
    """
    K = config.num_factors
    p, T = config.p, config.T
    alpha, rho = ar_coefficients(config)
    rng = rep_rng(config, rep)

    covariates = None
    if config.dgp == "semiparametric":
        z = rng.standard_normal(p)
        noise = rng.standard_normal((p, K))
        B = semiparametric_loadings(z) + config.loading_noise * noise
        covariates = z[:, None]
    else:
        B = rng.standard_normal((p, K))

    F = _ar1_paths(rng, T, alpha)
    U = config.idio_scale * _ar1_paths(rng, T, rho).T
    X = B @ F.T + U

    eps = rng.standard_normal(T)
    y = np.empty(T)
    if config.dgp == "linear":
        phi = (
            np.asarray(config.phi, dtype=float)
            if config.phi is not None
            else _phi_linear(K)
        )
        if config.sigma_y is not None:
            sigma_y = float(config.sigma_y)
        else:
            var_signal = float(np.sum(phi**2))
            sigma_y = math.sqrt(var_signal)
        y[1:] = F[:-1] @ phi + sigma_y * eps[1:]
        y[0] = sigma_y * eps[0]
        raw_basis = phi[:, None]
    elif config.dgp in ("interaction", "semiparametric"):
        sigma_y = 1.0 if config.sigma_y is None else float(config.sigma_y)
        y[1:] = _interaction_link(F[:-1]) + sigma_y * eps[1:]
        y[0] = sigma_y * eps[0]
        raw_basis = _interaction_basis(K)
    else:  # null
        sigma_y = 1.0 if config.sigma_y is None else float(config.sigma_y)
        y = sigma_y * eps
        raw_basis = np.empty((K, 0))

    H = canonical_rotation(F, B)
    central = _rotate_basis(raw_basis, H)
    truth = TrueModel(factors=F, loadings=B, rotation=H, central_basis=central)
    return SimulatedData(panel=DataPanel(X, y), truth=truth, covariates=covariates)


def _rotate_basis(raw_basis: np.ndarray, rotation: np.ndarray) -> np.ndarray:
    """Express index vectors in rotated-factor coordinates and orthonormalize.

    phi'f = ((H^{-1})'phi)'(Hf), so each raw phi maps to (H^{-1})'phi.
    """
    if raw_basis.shape[1] == 0:
        return raw_basis
    mapped = np.linalg.inv(rotation).T @ raw_basis
    Q, R = np.linalg.qr(mapped)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def canonical_rotation(factors: np.ndarray, loadings: np.ndarray) -> np.ndarray:
    """The K x K matrix H that normalizes a factor model like PCA does.

    With f~_t = H f_t and B~ = B H^{-1}: (1/T) F~'F~ = I_K and B~'B~ is
    diagonal with descending diagonal.  Built by whitening the factor Gram
    and rotating with the eigenvectors of the whitened loading Gram; column
    signs follow the max-|entry|-positive loading convention.

    Raises
    ------
    NumericalError
        If the factor sample covariance is singular.
    """
    F = np.asarray(factors, dtype=float)
    B = np.asarray(loadings, dtype=float)
    T, K = F.shape
    if B.shape[1] != K:
        raise ConfigError(
            f"factors have {K} columns but loadings have {B.shape[1]}"
        )
    S_F = F.T @ F / T
    w, V = eigh(S_F)
    if w.min() <= 1e-12 * max(w.max(), 1e-300):
        raise NumericalError("factor sample covariance is singular; cannot whiten")
    root = V @ np.diag(np.sqrt(w)) @ V.T
    inv_root = V @ np.diag(1.0 / np.sqrt(w)) @ V.T
    M = root @ (B.T @ B) @ root
    mw, Q = eigh(M)
    Q = Q[:, ::-1]  # descending loading-Gram diagonal
    rotated_loadings = B @ root @ Q
    flip = np.take_along_axis(
        rotated_loadings, np.abs(rotated_loadings).argmax(axis=0)[None, :], axis=0
    )[0] < 0
    Q = np.where(flip, -Q, Q)
    return Q.T @ inv_root


def subspace_r2(estimate: np.ndarray, basis: np.ndarray) -> float:
    """Squared length of the projection of a unit-normalized vector onto an
    orthonormal basis: 1.0 means the estimate lies in the subspace, 0.0
    means it is orthogonal to it.

    Raises
    ------
    NumericalError
        If the estimate has zero norm.
    ConfigError
        If the basis is not orthonormal.
    """
    v = np.asarray(estimate, dtype=float).ravel()
    Psi = np.asarray(basis, dtype=float)
    if Psi.ndim == 1:
        Psi = Psi[:, None]
    if v.shape[0] != Psi.shape[0]:
        raise ConfigError(
            f"estimate has dimension {v.shape[0]} but basis lives in {Psi.shape[0]}"
        )
    gram = Psi.T @ Psi
    if np.abs(gram - np.eye(Psi.shape[1])).max() > 1e-8:
        raise ConfigError("basis columns must be orthonormal")
    nrm = np.sqrt(v @ v)
    if nrm == 0.0 or not np.isfinite(nrm):
        raise NumericalError("cannot measure the direction of a zero vector")
    proj = Psi.T @ (v / nrm)
    return float(proj @ proj)
