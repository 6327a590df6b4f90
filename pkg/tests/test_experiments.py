"""
Tests for the synthetic studies.

The fast studies run with their own parameters; the quadrature-heavy ones run
on shrunken grids and carry the slow marker.
"""

import math

import numpy as np
import pytest

from renyi_portfolio.dists import Marginal
from renyi_portfolio.entropy import asymptotic_bias
from renyi_portfolio.errors import ObjectiveError, ParameterError, StudyError
from renyi_portfolio.experiments import (
    StudyKind,
    StudySpec,
    best_two_asset_weight,
    run_study,
    small_sample_weight_study,
    study_names,
)


class TestStudySpec:
    """Study selection and parameter resolution."""

    def test_names(self):
        assert len(study_names()) == 10
        assert "small-sample" in study_names()

    def test_string_study_is_coerced(self):
        assert StudySpec("levy").study is StudyKind.LEVY

    def test_unknown_study(self):
        with pytest.raises(ParameterError):
            StudySpec("weather")

    def test_unknown_parameter(self):
        with pytest.raises(ParameterError):
            StudySpec("copula", parameters={"draw_count": 10})

    def test_workers_must_be_positive(self):
        with pytest.raises(ParameterError):
            StudySpec("levy", workers=0)

    def test_desk_scale_then_overrides(self):
        assert StudySpec("copula").resolved_parameters()["draws"] == 500_000
        assert StudySpec("copula", desk_scale=True).resolved_parameters()["draws"] == 50_000
        spec = StudySpec("copula", parameters={"draws": 10}, desk_scale=True)
        assert spec.resolved_parameters()["draws"] == 10


class TestBestTwoAssetWeight:
    """Grid search plus bounded refinement on [0, 1]."""

    def test_interior_minimum(self):
        assert best_two_asset_weight(lambda w: (w - 0.37) ** 2) == pytest.approx(0.37, abs=1e-5)

    def test_boundary_minimum(self):
        assert best_two_asset_weight(lambda w: w) == pytest.approx(0.0, abs=1e-5)

    def test_undefined_points_are_skipped(self):
        def objective(w):
            return math.nan if w < 0.5 else (w - 0.8) ** 2

        assert best_two_asset_weight(objective) == pytest.approx(0.8, abs=1e-5)

    def test_undefined_everywhere(self):
        with pytest.raises(ObjectiveError):
            best_two_asset_weight(lambda w: math.inf)


class TestClosedFormStudies:
    """Studies that need no sampling."""

    def test_comonotonic_counter_example(self):
        row = run_study(StudySpec("comonotonic")).iloc[0]
        assert row["expectation_w"] == pytest.approx(0.59634, abs=1e-5)
        assert row["e_times_gamma_0_1"] == pytest.approx(row["e_times_exp1"], rel=1e-7)
        assert row["expectation_w"] == pytest.approx(row["e_times_exp1"], rel=1e-7)
        assert row["expectation_z"] == pytest.approx(-np.euler_gamma, abs=1e-8)
        assert row["exp_expectation_w"] == pytest.approx(1.815, abs=1e-3)
        assert row["one_plus_exp_expectation_z"] == pytest.approx(1.561, abs=1e-3)
        assert bool(row["super_additive"])

    def test_levy_is_super_additive(self):
        table = run_study(StudySpec("levy"))
        assert len(table) == 15
        np.testing.assert_allclose(table["gap"], table["analytic_gap"], rtol=1e-10)
        assert (table["gap"] > 0).all()

    def test_gaussian_gap(self):
        table = run_study(StudySpec("gaussian", parameters={"draws": 0}))
        assert "estimated_gap" not in table.columns
        perfect = table[table["rho"] == 1.0]
        assert perfect["perfect_correlation_identity"].astype(bool).all()
        assert (table[table["rho"] < 1.0]["gap"] < 0).all()

    def test_gaussian_estimated_gap(self):
        table = run_study(StudySpec("gaussian", parameters={"rhos": [0.0], "alphas": [1.0], "draws": 20_000}))
        row = table.iloc[0]
        assert row["estimated_gap"] == pytest.approx(row["gap"], abs=0.05)

    def test_tail_reference_at_shannon_order(self):
        table = run_study(
            StudySpec("tail", parameters={"nus": [3.0, 5.0, 30.0], "alphas": [1.0], "sample_size": 0})
        )
        assert (table["ratio"] < 1.0).all()
        ratios = table.sort_values("nu")["ratio"].to_numpy()
        assert np.all(np.diff(ratios) > 0)

    def test_tail_needs_finite_variance(self):
        with pytest.raises(ParameterError):
            run_study(StudySpec("tail", parameters={"nus": [2.0]}))


class TestSampledStudies:
    """Studies driven by random draws."""

    def test_copula_layout_and_reproducibility(self):
        params = {"draws": 2000, "rhos": [-1.0, 0.0, 1.0], "alphas": [0.5, 1.0]}
        first = run_study(StudySpec("copula", parameters=params, seed=3))
        second = run_study(StudySpec("copula", parameters=params, seed=3))
        assert list(first.columns) == ["rho", "alpha", "m", "h_x", "h_y", "h_sum", "gap"]
        assert len(first) == 6
        assert first.equals(second)
        # the marginal draws do not depend on rho
        x_entropies = first[first["alpha"] == 1.0]["h_x"].to_numpy()
        np.testing.assert_allclose(x_entropies, x_entropies[0])

    def test_copula_rejects_levy_marginal(self):
        params = {"x": Marginal.levy(0.0, 1.0), "draws": 100, "rhos": [0.0], "alphas": [1.0]}
        with pytest.raises(StudyError) as info:
            run_study(StudySpec("copula", parameters=params))
        assert info.value.study == "copula"

    def test_marginal_from_mapping(self):
        params = {
            "x": {"kind": "gaussian", "params": [0.0, 1.0]},
            "y": {"kind": "gaussian", "params": [0.0, 2.0]},
            "draws": 500,
            "rhos": [0.0],
            "alphas": [1.0],
        }
        assert len(run_study(StudySpec("copula", parameters=params))) == 1

    def test_bias_matches_asymptotic_theory(self):
        params = {
            "densities": [("uniform", Marginal.uniform(0.0, 1.0))],
            "ms": [1, 20],
            "alphas": [1.0],
            "sample_size": 20_000,
        }
        table = run_study(StudySpec("bias", parameters=params, seed=1))
        assert len(table) == 2
        for _, row in table.iterrows():
            assert row["truth"] == pytest.approx(0.0, abs=1e-12)
            assert row["theory"] == pytest.approx(asymptotic_bias(int(row["m"])))
            assert row["bias"] == pytest.approx(row["theory"], abs=0.05)

    @pytest.mark.slow
    def test_copula_gap_grows_with_dependence(self):
        params = {"draws": 50_000, "alphas": [0.7]}
        table = run_study(StudySpec("copula", parameters=params, seed=0))
        gaps = table.sort_values("rho")["gap"].to_numpy()
        assert np.all(np.diff(gaps) > 0)
        assert gaps.argmin() == 0

    @pytest.mark.slow
    def test_outlier_weights_rise_with_width_and_order(self):
        table = run_study(StudySpec("outliers", seed=0))
        cells = table.drop(columns="alpha").to_numpy()
        assert np.all(np.diff(cells, axis=1) >= -0.25)
        assert np.all(np.diff(cells, axis=0) >= -0.25)
        assert cells[-1, -1] == pytest.approx(47.80, abs=1.5)
        assert np.all((cells > 40.0) & (cells < 50.0))

    @pytest.mark.slow
    def test_outlier_weights_stay_below_half(self):
        params = {"alphas": [0.3, 1.0], "repetitions": 20}
        table = run_study(StudySpec("outliers", parameters=params, seed=0))
        assert list(table.columns) == ["alpha", "m=N^(1/4)", "m=N^(1/3)", "m=N^(1/2)", "m=N^(1/1.5)"]
        cells = table.drop(columns="alpha").to_numpy()
        assert np.all((cells > 20.0) & (cells < 60.0))

    @pytest.mark.slow
    def test_small_sample_weight_study(self):
        table = small_sample_weight_study(seed=0, alphas=[1.0], repetitions=4, sample_size=60)
        assert list(table["m"]) == [1, 8]
        assert table["repetitions"].eq(4).all()
        assert 0.0 < table["true_weight"].iloc[0] < 100.0
        assert ((table["mean_weight"] >= 0.0) & (table["mean_weight"] <= 100.0)).all()

    @pytest.mark.slow
    def test_small_sample_true_weight_and_smoothing(self):
        table = small_sample_weight_study(seed=0, desk_scale=True)
        half = table[table["alpha"] == 0.5]
        assert half["true_weight"].iloc[0] == pytest.approx(32.27, abs=0.1)
        for _, rows in table.groupby("alpha"):
            by_m = rows.set_index("m")
            assert by_m["std_weight"].iloc[1] < by_m["std_weight"].iloc[0]
            assert np.all(np.abs(by_m["mean_weight"] - by_m["true_weight"]) < 4.0)


@pytest.mark.slow
class TestQuadratureStudies:
    """Convolution-based studies on shrunken grids."""

    def test_independent_t_pair_is_subadditive(self):
        pairs = [("student_t", Marginal.student_t(0.03, 0.2, 10.0), Marginal.student_t(0.1, 0.4, 4.0))]
        table = run_study(StudySpec("subadditivity", parameters={"pairs": pairs, "alphas": [1.0], "abs_tol": 1e-6}))
        assert bool(table.iloc[0]["subadditive"])

    def test_skew_normal_pair_is_subadditive(self):
        pairs = [("skew_normal", Marginal.skew_normal(0.03, 0.2, -2.0), Marginal.skew_normal(0.1, 0.4, -5.0))]
        params = {"pairs": pairs, "alphas": [0.3, 1.0, 2.0], "abs_tol": 1e-6}
        table = run_study(StudySpec("subadditivity", parameters=params))
        assert len(table) == 3
        assert table["subadditive"].all()

    def test_tradeoff_reference_weights(self):
        table = run_study(StudySpec("tradeoff", parameters={"alphas": [1.0], "step": 0.5, "abs_tol": 1e-6}))
        kinds = table.groupby("record_type").size()
        assert kinds["grid"] == 3
        assert kinds["optimum"] == 1
        min_variance = table[table["record_type"] == "min_variance"].iloc[0]
        assert min_variance["w"] == pytest.approx(0.06 / 0.1725)
        optimum = table[table["record_type"] == "optimum"].iloc[0]
        assert 0.0 <= optimum["w"] <= 1.0
