import numpy as np
import pytest

from suffcast import DataPanel, center_panel, estimate_factors
from suffcast.exceptions import ConfigError, DegeneracyWarning
from suffcast.factors import FactorFit
from suffcast.sir import (
    SdrBasis,
    SlicedCovariance,
    assign_slices,
    predictive_indices,
    sdr_directions,
    select_num_indices,
    sliced_covariance_factors,
    sliced_covariance_loadings,
)
from suffcast.simulate import SimConfig, generate
from oracles import jacobi_eigh


def fit_of(rng, p, T, K):
    panel = center_panel(DataPanel(rng.standard_normal((p, T)), rng.standard_normal(T)))
    return panel, estimate_factors(panel, K)


def manual_fit(factors, loadings=None):
    """FactorFit built directly from arrays, bypassing estimation."""
    F = np.atleast_2d(np.asarray(factors, dtype=float))
    if F.shape[0] == 1:
        F = F.T
    K = F.shape[1]
    B = np.ones((2, K)) if loadings is None else np.asarray(loadings, dtype=float)
    return FactorFit(factors=F, loadings=B, eigenvalues=np.ones(K))


# -------------------------------------------------------------------- slicing


def test_even_split():
    s = assign_slices(np.arange(7.0), 2)  # T-1 = 6
    assert s.slice_size == 3
    np.testing.assert_array_equal(s.sizes, [3, 3])


def test_last_slice_absorbs_remainder():
    s = assign_slices(np.arange(8.0), 3)  # T-1 = 7
    assert s.slice_size == 3
    np.testing.assert_array_equal(s.sizes, [3, 3, 1])


def test_tied_target_ordered_by_time():
    s = assign_slices(np.zeros(6), 2)
    np.testing.assert_array_equal(s.order, [0, 1, 2, 3, 4])


def test_sort_is_by_next_period_response():
    y = np.array([99.0, 3.0, 1.0, 2.0, 0.0])  # pairs use y[1:]
    s = assign_slices(y, 2)
    np.testing.assert_array_equal(s.order, [3, 1, 2, 0])


def test_slices_partition_all_pairs():
    rng = np.random.default_rng(0)
    y = rng.standard_normal(30)
    s = assign_slices(y, 7)
    members = np.concatenate([s.members(h) for h in range(7)])
    assert sorted(members) == list(range(29))


def test_balanced_fallback_when_ceil_scheme_infeasible():
    # T-1 = 19, H = 15: ceil gives c = 2 but 14 full slices would need 28 obs.
    s = assign_slices(np.arange(20.0), 15)
    assert s.sizes.sum() == 19
    assert s.sizes.min() >= 1
    assert s.sizes.max() - s.sizes.min() <= 1


def test_too_many_slices_rejected():
    with pytest.raises(ConfigError, match="slices"):
        assign_slices(np.arange(6.0), 6)
    with pytest.raises(ConfigError, match="at least 2"):
        assign_slices(np.arange(6.0), 1)


# ---------------------------------------------------------- sliced covariance


def test_hand_computed_scalar_covariance():
    # Slice means 2 and -2 -> (4 + 4)/2 = 4.
    fit = manual_fit([1.0, 3.0, -1.0, -3.0, 0.0])
    s = assign_slices(np.arange(5.0), 2)
    cov = sliced_covariance_factors(fit, s)
    np.testing.assert_allclose(cov.matrix, [[4.0]], atol=1e-12)
    np.testing.assert_allclose(cov.slice_means, [[2.0], [-2.0]], atol=1e-12)


def test_constant_factor_gives_outer_product():
    v = np.array([1.5, -0.5])
    fit = manual_fit(np.tile(v, (9, 1)))
    cov = sliced_covariance_factors(fit, assign_slices(np.arange(9.0), 4))
    np.testing.assert_allclose(cov.matrix, np.outer(v, v), atol=1e-12)


def test_null_target_gives_small_covariance():
    rng = np.random.default_rng(1)
    T = 20000
    fit = manual_fit(rng.standard_normal((T, 3)))
    y = rng.standard_normal(T)
    cov = sliced_covariance_factors(fit, assign_slices(y, 10))
    assert np.linalg.norm(cov.matrix, 2) < 0.01


def test_loading_form_hand_example():
    b = np.array([1.0, 2.0])
    f = np.array([1.0, 3.0, -1.0, -3.0, 0.0])
    panel = DataPanel(np.outer(b, f), np.arange(5.0), centered=True)
    fit = manual_fit(f, loadings=b[:, None])
    cov = sliced_covariance_loadings(panel, fit, assign_slices(panel.target, 2))
    np.testing.assert_allclose(cov.matrix, [[4.0]], atol=1e-12)
    assert cov.source == "loading_form"


@pytest.mark.parametrize("p,T,K,H", [(12, 25, 3, 4), (6, 40, 2, 10), (30, 20, 4, 6)])
def test_factor_and_loading_forms_agree(p, T, K, H):
    rng = np.random.default_rng(10 * p + H)
    panel, fit = fit_of(rng, p, T, K)
    s = assign_slices(panel.target, H)
    c1 = sliced_covariance_factors(fit, s)
    c2 = sliced_covariance_loadings(panel, fit, s)
    assert np.abs(c1.matrix - c2.matrix).max() < 1e-8


def test_non_ls_factors_warn_but_return():
    rng = np.random.default_rng(3)
    panel, fit = fit_of(rng, 8, 15, 2)
    bent = FactorFit(
        factors=fit.factors + 0.1 * rng.standard_normal(fit.factors.shape),
        loadings=fit.loadings,
        eigenvalues=fit.eigenvalues,
    )
    s = assign_slices(panel.target, 4)
    with pytest.warns(UserWarning, match="least-squares"):
        cov = sliced_covariance_loadings(panel, bent, s)
    assert cov.matrix.shape == (2, 2)


def test_psd_and_rank_bound():
    rng = np.random.default_rng(4)
    for H in (2, 3, 10):
        panel, fit = fit_of(rng, 9, 41, 5)
        cov = sliced_covariance_factors(fit, assign_slices(panel.target, H))
        assert np.abs(cov.matrix - cov.matrix.T).max() < 1e-12
        eigs = np.linalg.eigvalsh(cov.matrix)
        assert eigs.min() > -1e-10
        rank = int(np.sum(eigs > 1e-10 * max(eigs.max(), 1.0)))
        assert rank <= min(5, H)


def test_misaligned_fit_and_slices_rejected():
    fit = manual_fit(np.ones((8, 1)))
    s = assign_slices(np.arange(6.0), 2)
    with pytest.raises(ConfigError, match="periods"):
        sliced_covariance_factors(fit, s)


# ------------------------------------------------------------ SDR directions


def test_diagonal_covariance_picks_leading_axis():
    cov = SlicedCovariance(np.diag([3.0, 1.0, 0.0]), np.zeros((5, 3)), "factor_form")
    fit = manual_fit(np.zeros((4, 3)), loadings=np.eye(3))
    basis = sdr_directions(cov, fit, 1)
    np.testing.assert_allclose(basis.directions[:, 0], [1.0, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(basis.eigenvalues, [3.0], atol=1e-12)


def test_tied_eigenvalues_warn_but_stay_deterministic():
    cov = SlicedCovariance(np.eye(2), np.zeros((4, 2)), "factor_form")
    fit = manual_fit(np.zeros((3, 2)), loadings=np.eye(2))
    with pytest.warns(DegeneracyWarning, match="gap"):
        a = sdr_directions(cov, fit, 1)
    with pytest.warns(DegeneracyWarning):
        b = sdr_directions(cov, fit, 1)
    assert np.array_equal(a.directions, b.directions)


def test_directions_match_jacobi_oracle():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((4, 6))
    M = A @ A.T / 6.0
    cov = SlicedCovariance(M, np.zeros((8, 4)), "factor_form")
    fit = manual_fit(np.zeros((5, 4)), loadings=np.eye(4))
    basis = sdr_directions(cov, fit, 2)
    vals, vecs = jacobi_eigh(M)
    np.testing.assert_allclose(basis.eigenvalues, vals[:2], atol=1e-8)
    for j in range(2):
        d = basis.directions[:, j]
        v = vecs[:, j]
        assert min(np.abs(d - v).max(), np.abs(d + v).max()) < 1e-8


def test_direction_sign_convention():
    M = np.diag([2.0, 1.0])
    cov = SlicedCovariance(M, np.zeros((4, 2)), "factor_form")
    fit = manual_fit(np.zeros((3, 2)), loadings=np.eye(2))
    basis = sdr_directions(cov, fit, 2)
    for j in range(2):
        col = basis.directions[:, j]
        assert col[np.abs(col).argmax()] > 0


def test_predictor_directions_reproduce_indices():
    rng = np.random.default_rng(6)
    panel, fit = fit_of(rng, 10, 30, 3)
    s = assign_slices(panel.target, 5)
    cov = sliced_covariance_factors(fit, s)
    basis = sdr_directions(cov, fit, 2)
    via_factors = predictive_indices(basis, fit)
    via_predictors = panel.predictors[:, :-1].T @ basis.predictor_directions
    assert np.abs(via_factors - via_predictors).max() < 1e-8


def test_l_out_of_range_rejected():
    cov = SlicedCovariance(np.eye(3), np.zeros((2, 3)), "factor_form")
    fit = manual_fit(np.zeros((3, 3)), loadings=np.eye(3))
    with pytest.raises(ConfigError, match="num_indices"):
        sdr_directions(cov, fit, 4)
    with pytest.raises(ConfigError, match="slices"):
        sdr_directions(cov, fit, 3)  # L=3 > H=2


# ---------------------------------------------------------------- indices


def test_coordinate_direction_returns_factor_column():
    rng = np.random.default_rng(7)
    F = rng.standard_normal((12, 3))
    fit = manual_fit(F, loadings=np.eye(3))
    basis = SdrBasis(
        directions=np.eye(3)[:, :1],
        eigenvalues=np.array([1.0]),
        predictor_directions=np.eye(3)[:, :1],
    )
    idx = predictive_indices(basis, fit)
    np.testing.assert_array_equal(idx[:, 0], F[:-1, 0])


def test_rotating_directions_rotates_indices():
    rng = np.random.default_rng(8)
    F = rng.standard_normal((15, 3))
    fit = manual_fit(F, loadings=np.eye(3))
    Q, _ = np.linalg.qr(rng.standard_normal((2, 2)))
    psi = np.linalg.qr(rng.standard_normal((3, 2)))[0]
    base = SdrBasis(psi, np.array([2.0, 1.0]), psi)
    rotated = SdrBasis(psi @ Q, np.array([2.0, 1.0]), psi @ Q)
    np.testing.assert_allclose(
        predictive_indices(rotated, fit),
        predictive_indices(base, fit) @ Q,
        atol=1e-12,
    )


# ----------------------------------------------------- monotone invariance


@pytest.mark.parametrize("transform", [np.exp, lambda y: y**3, lambda y: 2.0 * y + 3.0])
def test_monotone_transform_leaves_everything_bit_identical(transform):
    rng = np.random.default_rng(9)
    panel, fit = fit_of(rng, 8, 26, 3)
    s0 = assign_slices(panel.target, 5)
    s1 = assign_slices(transform(panel.target), 5)
    assert np.array_equal(s0.order, s1.order)
    assert np.array_equal(s0.sizes, s1.sizes)
    c0 = sliced_covariance_factors(fit, s0)
    c1 = sliced_covariance_factors(fit, s1)
    assert np.array_equal(c0.matrix, c1.matrix)
    b0 = sdr_directions(c0, fit, 2)
    b1 = sdr_directions(c1, fit, 2)
    assert np.array_equal(b0.directions, b1.directions)
    assert np.array_equal(b0.predictor_directions, b1.predictor_directions)


# ------------------------------------------------------------- L selection


def test_exact_zero_tail_accepts_immediately():
    cov = SlicedCovariance(np.diag([5.0, 0.0, 0.0, 0.0]), np.zeros((10, 4)), "factor_form")
    assert select_num_indices(cov, num_periods=1000, num_slices=10) == 1


def test_scan_stops_at_slice_bound_with_warning():
    cov = SlicedCovariance(1e6 * np.eye(3), np.zeros((3, 3)), "factor_form")
    with pytest.warns(DegeneracyWarning, match="slice bound"):
        assert select_num_indices(cov, num_periods=500, num_slices=3) == 2


def test_needs_two_factors():
    cov = SlicedCovariance(np.eye(1), np.zeros((4, 1)), "factor_form")
    with pytest.raises(ConfigError, match="at least 2 factors"):
        select_num_indices(cov, num_periods=100, num_slices=4)


@pytest.mark.slow
def test_null_calibration_accepts_l0_at_nominal_rate():
    # Level-0.05 test on a null panel should return L=0 about 95% of the time.
    config = SimConfig(dgp="null", p=150, T=200, seed=2024, reps=500)
    hits = 0
    for rep in range(config.reps):
        data = generate(config, rep)
        panel = center_panel(data.panel)
        fit = estimate_factors(panel, 5)
        s = assign_slices(panel.target, 10)
        cov = sliced_covariance_factors(fit, s)
        if select_num_indices(cov, config.T, 10) == 0:
            hits += 1
    assert 0.90 <= hits / config.reps <= 0.99


@pytest.mark.slow
def test_interaction_process_selects_two_indices():
    config = SimConfig(dgp="interaction", p=500, T=500, seed=7, reps=15)
    chosen = []
    for rep in range(config.reps):
        data = generate(config, rep)
        panel = center_panel(data.panel)
        fit = estimate_factors(panel, 7)
        s = assign_slices(panel.target, 10)
        cov = sliced_covariance_factors(fit, s)
        chosen.append(select_num_indices(cov, config.T, 10))
    assert sum(1 for L in chosen if L == 2) > config.reps / 2
