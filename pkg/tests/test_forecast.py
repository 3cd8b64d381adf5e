"""Tests for forecasting models and recursive out-of-sample evaluation."""

import numpy as np
import pytest

from oracles import local_linear_reference, ols_normal_equations

from suffcast.exceptions import ConfigError, DegeneracyWarning, NumericalError
from suffcast.factors import FactorFit, estimate_factors, loading_pseudoinverse
from suffcast.forecast import (
    EvalReport,
    KernelSmoother,
    LinearForecast,
    PipelineConfig,
    evaluate_methods,
    fit_linear_forecast,
    in_sample_r2,
    local_linear_fit,
    local_linear_predict,
    out_of_sample_r2,
    pcr_coefficients,
)
from suffcast.panel import DataPanel, center_panel
from suffcast.projection import build_sieve_basis, project_panel
from suffcast.simulate import SimConfig, generate
from suffcast.sir import assign_slices, sdr_directions, sliced_covariance_factors


def orthonormal_factors(rng, T, K):
    """Random factors satisfying the estimation normalization F'F/T = I."""
    Q, _ = np.linalg.qr(rng.standard_normal((T, K)))
    return np.sqrt(T) * Q


def manual_fit(rng, T, K, p=8):
    F = orthonormal_factors(rng, T, K)
    B = rng.standard_normal((p, K))
    return FactorFit(factors=F, loadings=B, eigenvalues=np.arange(K, 0, -1.0))


# ----------------------------------------------------------- LinearForecast


def test_linear_forecast_rejects_unknown_spec():
    with pytest.raises(ConfigError, match="regressor_spec"):
        LinearForecast(np.ones(2), 0.0, "quadratic")


def test_linear_forecast_first_pc_needs_one_coefficient():
    with pytest.raises(ConfigError, match="exactly one"):
        LinearForecast(np.ones(2), 0.0, "first_pc")


def test_linear_forecast_interaction_needs_three_coefficients():
    with pytest.raises(ConfigError, match="at least 3"):
        LinearForecast(np.ones(2), 0.0, "indices_with_interaction")


def test_linear_forecast_rejects_nonfinite():
    with pytest.raises(NumericalError, match="finite"):
        LinearForecast(np.array([1.0, np.nan]), 0.0, "indices")


def test_linear_forecast_predict_scalar_and_matrix():
    model = LinearForecast(np.array([2.0, -1.0]), 0.5, "indices")
    single = model.predict(np.array([1.0, 3.0]))
    assert isinstance(single, float)
    assert single == pytest.approx(2.0 - 3.0 + 0.5)
    batch = model.predict(np.array([[1.0, 3.0], [0.0, 0.0]]))
    np.testing.assert_allclose(batch, [-0.5, 0.5])


def test_linear_forecast_interaction_design_appends_product():
    model = LinearForecast(np.array([1.0, 1.0, 2.0]), 0.0, "indices_with_interaction")
    # Raw input has 2 columns; the model appends x0 * x1 itself.
    assert model.num_regressors == 2
    value = model.predict(np.array([3.0, 4.0]))
    assert value == pytest.approx(3.0 + 4.0 + 2.0 * 12.0)


def test_linear_forecast_rejects_wrong_width():
    model = LinearForecast(np.array([1.0, 1.0]), 0.0, "indices")
    with pytest.raises(ConfigError, match="expects 2"):
        model.predict(np.ones(3))


# ------------------------------------------------------- moment regression


def test_pcr_coefficients_match_direct_summation():
    rng = np.random.default_rng(0)
    T, K = 10, 2
    fit = manual_fit(rng, T, K)
    y = rng.standard_normal(T)
    model = pcr_coefficients(fit, y)
    expected = np.array(
        [sum(y[t + 1] * fit.factors[t, k] for t in range(T - 1)) / (T - 1)
         for k in range(K)]
    )
    np.testing.assert_allclose(model.coefficients, expected, atol=1e-12)
    assert model.intercept == pytest.approx(y[1:].mean(), abs=1e-12)
    assert model.regressor_spec == "all_factors"


def test_pcr_coefficients_zero_target_gives_zero_model():
    fit = manual_fit(np.random.default_rng(1), 12, 3)
    model = pcr_coefficients(fit, np.zeros(12))
    np.testing.assert_array_equal(model.coefficients, np.zeros(3))
    assert model.intercept == 0.0


def test_pcr_coefficients_rejects_length_mismatch():
    fit = manual_fit(np.random.default_rng(2), 12, 2)
    with pytest.raises(ConfigError, match="12 periods"):
        pcr_coefficients(fit, np.zeros(10))


# -------------------------------------------------------- least squares


def test_fit_linear_forecast_matches_normal_equations():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((50, 3))
    y = rng.standard_normal(50)
    model = fit_linear_forecast(X, y, "indices")
    beta = ols_normal_equations(np.column_stack([np.ones(50), X]), y)
    assert model.intercept == pytest.approx(beta[0], abs=1e-8)
    np.testing.assert_allclose(model.coefficients, beta[1:], atol=1e-8)


def test_fit_linear_forecast_exact_fit_recovered():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((30, 2))
    y = 1.5 + X @ np.array([2.0, -3.0])
    model = fit_linear_forecast(X, y, "indices")
    np.testing.assert_allclose(model.coefficients, [2.0, -3.0], atol=1e-10)
    assert model.intercept == pytest.approx(1.5, abs=1e-10)
    np.testing.assert_allclose(model.predict(X), y, atol=1e-10)


def test_fit_linear_forecast_interaction_recovers_product_term():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((40, 2))
    y = 3.0 + 2.0 * X[:, 0] - X[:, 1] + 0.5 * X[:, 0] * X[:, 1]
    model = fit_linear_forecast(X, y, "indices_with_interaction")
    np.testing.assert_allclose(model.coefficients, [2.0, -1.0, 0.5], atol=1e-10)
    assert model.intercept == pytest.approx(3.0, abs=1e-10)
    np.testing.assert_allclose(model.predict(X), y, atol=1e-10)


def test_fit_linear_forecast_names_constant_column():
    X = np.column_stack([np.full(20, 2.5), np.arange(20.0)])
    with pytest.raises(NumericalError, match="column 0"):
        fit_linear_forecast(X, np.arange(20.0), "indices")


def test_fit_linear_forecast_names_duplicate_column():
    rng = np.random.default_rng(6)
    x = rng.standard_normal(25)
    X = np.column_stack([x, 2.0 * x])
    with pytest.raises(NumericalError, match="column 1"):
        fit_linear_forecast(X, rng.standard_normal(25), "indices")


def test_fit_linear_forecast_needs_spare_rows():
    rng = np.random.default_rng(7)
    with pytest.raises(ConfigError, match="more observations"):
        fit_linear_forecast(rng.standard_normal((4, 3)), np.zeros(4), "indices")


def test_fit_linear_forecast_first_pc_is_single_column():
    rng = np.random.default_rng(8)
    with pytest.raises(ConfigError, match="one regressor column"):
        fit_linear_forecast(rng.standard_normal((20, 2)), np.zeros(20), "first_pc")


def test_fit_linear_forecast_rejects_unknown_spec():
    with pytest.raises(ConfigError, match="regressor_spec"):
        fit_linear_forecast(np.ones((20, 1)), np.zeros(20), "cubic")


# ------------------------------------------------------- kernel smoothing


def test_default_bandwidth_follows_reference_rule():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((100, 2))
    X = (X - X.mean(axis=0)) / X.std(axis=0, ddof=1)  # unit sample sd
    smoother = local_linear_fit(X, rng.standard_normal(100))
    expected = 1.06 * 100 ** (-1.0 / 6.0)
    np.testing.assert_allclose(smoother.bandwidths, [expected, expected], rtol=1e-12)


def test_default_bandwidth_one_index_uses_fifth_root():
    rng = np.random.default_rng(10)
    x = rng.standard_normal(64)
    x = (x - x.mean()) / x.std(ddof=1)
    smoother = local_linear_fit(x, rng.standard_normal(64), bandwidth_multiplier=2.0)
    np.testing.assert_allclose(
        smoother.bandwidths, [2.0 * 1.06 * 64 ** (-0.2)], rtol=1e-12
    )


def test_explicit_bandwidths_stored_verbatim():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((30, 2))
    smoother = local_linear_fit(X, rng.standard_normal(30), bandwidths=(0.5, 0.7))
    np.testing.assert_array_equal(smoother.bandwidths, [0.5, 0.7])
    scalar = local_linear_fit(X, rng.standard_normal(30), bandwidths=0.3)
    np.testing.assert_array_equal(scalar.bandwidths, [0.3, 0.3])


def test_local_linear_fit_validation():
    rng = np.random.default_rng(12)
    X = rng.standard_normal((30, 2))
    y = rng.standard_normal(30)
    with pytest.raises(ConfigError, match="1 or 2"):
        local_linear_fit(rng.standard_normal((30, 3)), y)
    with pytest.raises(ConfigError, match="at least 10"):
        local_linear_fit(X[:9], y[:9])
    with pytest.raises(ConfigError, match="positive"):
        local_linear_fit(X, y, bandwidths=(0.5, -0.7))
    with pytest.raises(ConfigError, match="multiplier"):
        local_linear_fit(X, y, bandwidth_multiplier=0.0)
    flat = X.copy()
    flat[:, 1] = 4.0
    with pytest.raises(NumericalError, match="index 1"):
        local_linear_fit(flat, y)


def test_kernel_smoother_validation():
    rng = np.random.default_rng(13)
    X = rng.standard_normal((10, 2))
    y = rng.standard_normal(10)
    with pytest.raises(ConfigError, match="kernel"):
        KernelSmoother(X, y, np.ones(2), kernel="epanechnikov")
    with pytest.raises(ConfigError, match="one bandwidth per index"):
        KernelSmoother(X, y, np.ones(3))
    with pytest.raises(ConfigError, match="targets"):
        KernelSmoother(X, y[:8], np.ones(2))
    with pytest.raises(ConfigError, match="L\\+2"):
        KernelSmoother(X[:3], y[:3], np.ones(2))


def test_local_linear_predict_matches_weighted_least_squares():
    rng = np.random.default_rng(14)
    X = rng.standard_normal((50, 2))
    y = np.sin(X[:, 0]) + 0.5 * X[:, 1] ** 2 + 0.1 * rng.standard_normal(50)
    smoother = local_linear_fit(X, y, bandwidths=(0.8, 0.6))
    for x0 in [np.zeros(2), np.array([0.5, -0.3]), np.array([-1.0, 1.0])]:
        expected = local_linear_reference(x0, X, y, np.array([0.8, 0.6]))
        assert local_linear_predict(smoother, x0) == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize("bandwidth", [0.1, 1.0, 10.0])
def test_local_linear_reproduces_affine_functions(bandwidth):
    rng = np.random.default_rng(15)
    x = rng.standard_normal(40)
    y = 2.0 * x + 1.0
    smoother = local_linear_fit(x, y, bandwidths=bandwidth)
    assert local_linear_predict(smoother, [0.5]) == pytest.approx(2.0, abs=1e-8)


def test_local_linear_reproduces_constants():
    rng = np.random.default_rng(16)
    X = rng.standard_normal((25, 2))
    smoother = local_linear_fit(X, np.full(25, 7.0))
    assert local_linear_predict(smoother, [0.3, -0.4]) == pytest.approx(7.0, abs=1e-10)


def test_local_linear_far_point_falls_back_with_warning():
    rng = np.random.default_rng(17)
    x = rng.standard_normal(30)
    y = 2.0 * x + 1.0
    smoother = local_linear_fit(x, y, bandwidths=0.05)
    with pytest.warns(DegeneracyWarning, match="training mass"):
        value = local_linear_predict(smoother, [50.0])
    # The global-linear fallback is still exact for an affine target.
    assert value == pytest.approx(2.0 * 50.0 + 1.0, abs=1e-6)


def test_local_linear_predict_validates_point():
    rng = np.random.default_rng(18)
    smoother = local_linear_fit(rng.standard_normal((20, 2)), rng.standard_normal(20))
    with pytest.raises(ConfigError, match="2 indices"):
        local_linear_predict(smoother, [1.0])
    with pytest.raises(ConfigError, match="finite"):
        local_linear_predict(smoother, [np.inf, 0.0])


# ---------------------------------------------------------- in-sample R^2


def test_in_sample_r2_perfect_fit_is_one():
    rng = np.random.default_rng(19)
    X = rng.standard_normal((30, 2))
    y = 1.0 + X @ np.array([1.0, -2.0])
    model = fit_linear_forecast(X, y, "indices")
    assert in_sample_r2(model, X, y) == pytest.approx(1.0, abs=1e-12)


def test_in_sample_r2_intercept_only_is_zero():
    rng = np.random.default_rng(20)
    X = rng.standard_normal((30, 1))
    y = rng.standard_normal(30)
    model = LinearForecast(np.array([0.0]), float(y.mean()), "indices")
    assert in_sample_r2(model, X, y) == pytest.approx(0.0, abs=1e-12)


def test_in_sample_r2_constant_target_rejected():
    model = LinearForecast(np.array([0.0]), 1.0, "indices")
    with pytest.raises(NumericalError, match="zero variance"):
        in_sample_r2(model, np.arange(10.0)[:, None], np.ones(10))


def test_in_sample_r2_kernel_smoother_path():
    rng = np.random.default_rng(21)
    X = rng.standard_normal((40, 2))
    y = X[:, 0] ** 2 + X[:, 1] + 0.05 * rng.standard_normal(40)
    smoother = local_linear_fit(X, y)
    r2 = in_sample_r2(smoother, X, y)
    assert 0.5 < r2 <= 1.0


# ------------------------------------------------------------ config/report


def test_pipeline_config_validation():
    with pytest.raises(ConfigError, match="method"):
        PipelineConfig(method="ols")
    with pytest.raises(ConfigError, match="train_fraction"):
        PipelineConfig(train_fraction=1.0)
    with pytest.raises(ConfigError, match="train_fraction"):
        PipelineConfig(train_fraction=0.0)
    with pytest.raises(ConfigError, match="at least 2 indices"):
        PipelineConfig(method="sf2", num_indices=1)
    with pytest.raises(ConfigError, match="at most 2"):
        PipelineConfig(method="sf2", num_indices=3)
    with pytest.raises(ConfigError, match="at least 2 indices"):
        PipelineConfig(method="sfi", num_indices=1)
    with pytest.raises(ConfigError, match="at least 1"):
        PipelineConfig(method="sf1", num_indices=0)
    with pytest.raises(ConfigError, match="integer"):
        PipelineConfig(num_indices=1.5)
    with pytest.raises(ConfigError, match="integer"):
        PipelineConfig(num_indices=True)
    with pytest.raises(ConfigError, match="refit_every"):
        PipelineConfig(refit_every=0)
    with pytest.raises(ConfigError, match="bandwidth_multiplier"):
        PipelineConfig(bandwidth_multiplier=0.0)
    with pytest.raises(ConfigError, match="slices"):
        PipelineConfig(num_slices=1)
    with pytest.raises(ConfigError, match="num_factors"):
        PipelineConfig(num_factors=0)
    # Valid corner cases construct fine.
    PipelineConfig(method="sf2", num_indices=2)
    PipelineConfig(num_indices="auto")


def test_eval_report_validation():
    ok = np.zeros(5)
    with pytest.raises(NumericalError, match="in-sample"):
        EvalReport(r2_in=1.2, r2_oos=0.0, forecasts=ok, split_index=10)
    with pytest.raises(NumericalError, match="exceeds 1"):
        EvalReport(r2_in=0.5, r2_oos=1.2, forecasts=ok, split_index=10)
    with pytest.raises(NumericalError, match="finite"):
        EvalReport(r2_in=0.5, r2_oos=0.0, forecasts=np.array([np.nan]), split_index=10)
    with pytest.raises(ConfigError, match="split_index"):
        EvalReport(r2_in=0.5, r2_oos=0.0, forecasts=ok, split_index=0)
    with pytest.raises(ConfigError, match="num_failures"):
        EvalReport(r2_in=0.5, r2_oos=0.0, forecasts=ok, split_index=10, num_failures=-1)
    # Badly negative out-of-sample fit is legal (worse than the test mean).
    EvalReport(r2_in=0.5, r2_oos=-4.0, forecasts=ok, split_index=10)


# ------------------------------------------------------ recursive evaluation


def sim_panel(seed=7, p=30, T=60, K=3, dgp="linear"):
    data = generate(SimConfig(dgp=dgp, p=p, T=T, K=K, seed=seed))
    return data


def naive_recursive_forecasts(X, y, K, num_slices, split, basis=None):
    """Reimplement the recursive loop with the plain building blocks."""
    T = len(y)
    pcr_vals, sf1_vals = [], []
    for s in range(split, T):
        window = center_panel(DataPanel(X[:, :s], y[:s]))
        if basis is not None:
            window = project_panel(window, basis)
        fit = estimate_factors(window, K)
        model = fit_linear_forecast(fit.factors[:-1], y[1:s], "all_factors")
        pcr_vals.append(model.predict(fit.factors[-1]))
        slices = assign_slices(y[:s], num_slices)
        cov = sliced_covariance_factors(fit, slices)
        sdr = sdr_directions(cov, fit, 1)
        idx = fit.factors[:-1] @ sdr.directions
        model = fit_linear_forecast(idx, y[1:s], "indices")
        sf1_vals.append(model.predict(fit.factors[-1] @ sdr.directions))
    return np.array(pcr_vals), np.array(sf1_vals)


def test_recursive_evaluator_matches_naive_reimplementation():
    data = sim_panel(seed=23)
    X, y = data.panel.predictors, data.panel.target
    config = PipelineConfig(method="sf1", num_factors=3)
    reports = evaluate_methods(data.panel, ["pcr", "sf1"], config)
    split = reports["pcr"].split_index
    assert split == 30
    naive_pcr, naive_sf1 = naive_recursive_forecasts(X, y, 3, 10, split)
    np.testing.assert_allclose(reports["pcr"].forecasts, naive_pcr, atol=1e-8)
    np.testing.assert_allclose(reports["sf1"].forecasts, naive_sf1, atol=1e-8)
    assert reports["pcr"].num_failures == 0
    assert reports["sf1"].num_failures == 0
    # In-sample values agree with a full-sample naive fit too.
    full = estimate_factors(center_panel(data.panel), 3)
    model = fit_linear_forecast(full.factors[:-1], y[1:], "all_factors")
    assert reports["pcr"].r2_in == pytest.approx(
        in_sample_r2(model, full.factors[:-1], y[1:]), abs=1e-8
    )


def test_projected_evaluator_matches_naive_reimplementation():
    data = sim_panel(seed=29, p=60, T=60, K=None, dgp="semiparametric")
    X, y = data.panel.predictors, data.panel.target
    config = PipelineConfig(method="sf1", num_factors=3)
    reports = evaluate_methods(
        data.panel, ["pcr", "sf1"], config, covariates=data.covariates
    )
    basis = build_sieve_basis(data.covariates)
    naive_pcr, naive_sf1 = naive_recursive_forecasts(X, y, 3, 10, 30, basis=basis)
    np.testing.assert_allclose(reports["pcr"].forecasts, naive_pcr, atol=1e-8)
    np.testing.assert_allclose(reports["sf1"].forecasts, naive_sf1, atol=1e-8)


def test_out_of_sample_r2_formula_recomputed_from_forecasts():
    data = sim_panel(seed=31)
    report = out_of_sample_r2(PipelineConfig(method="sf1", num_factors=3), data.panel)
    y = data.panel.target
    test_y = y[report.split_index:]
    sse = float(((test_y - report.forecasts) ** 2).sum())
    sst = float(((test_y - test_y.mean()) ** 2).sum())
    assert report.r2_oos == pytest.approx(1.0 - sse / sst, abs=1e-12)
    assert len(report.forecasts) == len(y) - report.split_index


def test_forecasts_never_use_future_data():
    data = sim_panel(seed=37)
    X, y = data.panel.predictors, data.panel.target
    config = PipelineConfig(method="sf1", num_factors=3)
    before = evaluate_methods(data.panel, ["pcr", "sf1", "sf2"], config)
    cut = before["pcr"].split_index + 5
    rng = np.random.default_rng(1)
    X2, y2 = X.copy(), y.copy()
    X2[:, cut:] += rng.standard_normal(X2[:, cut:].shape)
    y2[cut:] += rng.standard_normal(y2[cut:].shape)
    after = evaluate_methods(DataPanel(X2, y2), ["pcr", "sf1", "sf2"], config)
    for m in ("pcr", "sf1", "sf2"):
        np.testing.assert_array_equal(
            before[m].forecasts[:5], after[m].forecasts[:5]
        )


def test_precentered_panel_gives_equivalent_results():
    data = sim_panel(seed=41)
    config = PipelineConfig(method="pcr", num_factors=3)
    raw = out_of_sample_r2(config, data.panel)
    centered = out_of_sample_r2(config, center_panel(data.panel))
    np.testing.assert_allclose(centered.forecasts, raw.forecasts, rtol=1e-8, atol=1e-10)
    assert centered.r2_oos == pytest.approx(raw.r2_oos, abs=1e-8)


def test_known_factor_forecasts_invariant_to_affine_transforms():
    data = sim_panel(seed=43)
    F = data.truth.factors
    rng = np.random.default_rng(2)
    A = rng.standard_normal((3, 3)) + 2.0 * np.eye(3)
    shift = rng.standard_normal(3)
    config = PipelineConfig(method="sf1", num_factors=3)
    base = evaluate_methods(data.panel, ["pcr", "sf1"], config, known_factors=F)
    moved = evaluate_methods(
        data.panel, ["pcr", "sf1"], config, known_factors=F @ A + shift
    )
    for m in ("pcr", "sf1"):
        np.testing.assert_allclose(
            moved[m].forecasts, base[m].forecasts, rtol=1e-7, atol=1e-9
        )


def test_known_factors_accept_single_column():
    data = sim_panel(seed=47)
    config = PipelineConfig(method="pc1", num_factors=1)
    report = out_of_sample_r2(config, data.panel, known_factors=data.truth.factors[:, 0])
    assert np.isfinite(report.r2_oos)


def test_failed_steps_fall_back_to_training_mean():
    data = sim_panel(seed=53, p=10, T=24, K=2)
    y = data.panel.target
    config = PipelineConfig(num_factors=2, train_fraction=0.09)
    reports = evaluate_methods(data.panel, ["pcr", "sf1"], config)
    assert reports["pcr"].split_index == 2
    # s = 2: the 2-period window has rank 1 < 2 factors, so both methods
    # fail and forecast the training mean, which is just y[1].
    assert reports["pcr"].forecasts[0] == y[1]
    assert reports["sf1"].forecasts[0] == y[1]
    # s = 3: factors fit, but 2 forecasting pairs cannot support either
    # model (pcr needs > K+1 rows, slicing needs >= 10 pairs).
    assert reports["pcr"].forecasts[1] == y[1:3].mean()
    assert reports["sf1"].forecasts[1] == y[1:3].mean()
    # pcr recovers once the window holds K+2 pairs; sf1 once it holds
    # 10 pairs for the 10 slices.
    assert reports["pcr"].num_failures == 3
    assert reports["sf1"].num_failures == 9
    assert np.isfinite(reports["pcr"].r2_oos)


def test_refit_interval_reuses_stale_loadings():
    data = sim_panel(seed=59)
    X, y = data.panel.predictors, data.panel.target
    T = len(y)
    split = 30
    config = PipelineConfig(method="pcr", num_factors=3, refit_every=T - split)
    report = out_of_sample_r2(config, data.panel)
    window = center_panel(DataPanel(X[:, :split], y[:split]))
    fit = estimate_factors(window, 3)
    model = fit_linear_forecast(fit.factors[:-1], y[1:split], "all_factors")
    lam = loading_pseudoinverse(fit)
    offset = lam @ X[:, :split].mean(axis=1)
    expected = [model.predict(fit.factors[-1])]
    for s in range(split + 1, T):
        expected.append(model.predict(lam @ X[:, s - 1] - offset))
    np.testing.assert_allclose(report.forecasts, expected, atol=1e-8)


def test_refit_interval_one_and_large_disagree_but_both_work():
    data = sim_panel(seed=61)
    fresh = out_of_sample_r2(
        PipelineConfig(method="pcr", num_factors=3, refit_every=1), data.panel
    )
    stale = out_of_sample_r2(
        PipelineConfig(method="pcr", num_factors=3, refit_every=10), data.panel
    )
    assert fresh.forecasts[0] == pytest.approx(stale.forecasts[0], abs=1e-10)
    assert not np.allclose(fresh.forecasts, stale.forecasts)


def test_evaluate_methods_validation():
    data = sim_panel(seed=67)
    config = PipelineConfig(num_factors=3)
    with pytest.raises(ConfigError, match="no methods"):
        evaluate_methods(data.panel, [], config)
    with pytest.raises(ConfigError, match="unknown method"):
        evaluate_methods(data.panel, ["pcr", "arima"], config)
    with pytest.raises(ConfigError, match="not both"):
        evaluate_methods(
            data.panel, ["pcr"], config,
            covariates=np.ones(30), known_factors=data.truth.factors,
        )
    with pytest.raises(ConfigError, match="known_factors must be"):
        evaluate_methods(
            data.panel, ["pcr"], config, known_factors=np.ones((5, 3))
        )
    short = generate(SimConfig(dgp="linear", p=10, T=19, K=2))
    with pytest.raises(ConfigError, match="at least 20 periods"):
        evaluate_methods(short.panel, ["pcr"], PipelineConfig(num_factors=2))
    with pytest.raises(ConfigError, match="test periods"):
        evaluate_methods(
            data.panel, ["pcr"], PipelineConfig(num_factors=3, train_fraction=0.99)
        )


def test_evaluate_methods_rejects_infeasible_full_sample_fit():
    data = sim_panel(seed=71)
    # 5 indices can never come out of 3 factors; the full-sample fit fails
    # loudly rather than silently forecasting the mean everywhere.
    config = PipelineConfig(method="sfi", num_factors=3, num_indices=5)
    with pytest.raises(ConfigError, match="identified"):
        evaluate_methods(data.panel, ["sfi"], config)


def test_evaluate_methods_rejects_oversized_factor_request():
    data = sim_panel(seed=73, p=10, T=40, K=2)
    config = PipelineConfig(num_factors=15)
    with pytest.raises(ConfigError, match="num_factors 15"):
        evaluate_methods(data.panel, ["pcr"], config)


def test_evaluate_methods_constant_test_target_rejected():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((10, 40))
    y = np.concatenate([rng.standard_normal(20), np.full(20, 1.0)])
    with pytest.raises(NumericalError, match="constant"):
        evaluate_methods(DataPanel(X, y), ["pcr"], PipelineConfig(num_factors=2))


def test_duplicate_methods_are_deduplicated():
    data = sim_panel(seed=79)
    config = PipelineConfig(num_factors=3)
    reports = evaluate_methods(data.panel, ["pcr", "pcr", "pc1"], config)
    assert sorted(reports) == ["pc1", "pcr"]


def test_out_of_sample_r2_matches_evaluate_methods():
    data = sim_panel(seed=83)
    config = PipelineConfig(method="sfi", num_factors=3)
    single = out_of_sample_r2(config, data.panel)
    joint = evaluate_methods(data.panel, ["sfi"], config)["sfi"]
    np.testing.assert_array_equal(single.forecasts, joint.forecasts)
    assert single.r2_in == joint.r2_in
    assert single.r2_oos == joint.r2_oos


def test_auto_factor_and_index_selection_runs():
    data = sim_panel(seed=89, p=40, T=80)
    config = PipelineConfig(method="sf1", num_indices="auto")
    report = out_of_sample_r2(config, data.panel)
    assert report.split_index == 40
    assert np.isfinite(report.r2_oos)
    assert report.num_failures == 0


def test_rank_deficient_sieve_design_warns_and_projects_reduced():
    data = sim_panel(seed=97, p=60, T=60, K=None, dgp="semiparametric")
    doubled = np.column_stack([data.covariates, data.covariates])
    config = PipelineConfig(method="pcr", num_factors=3)
    with pytest.warns(DegeneracyWarning, match="rank"):
        report = out_of_sample_r2(config, data.panel, covariates=doubled)
    baseline = out_of_sample_r2(config, data.panel, covariates=data.covariates)
    np.testing.assert_allclose(report.forecasts, baseline.forecasts, atol=1e-8)
