"""Tests for the multinomial-logit estimation and inference machinery."""

import numpy as np
import pytest

from pvconflict.errors import DegenerateFit, InvalidInput
from pvconflict.labeling import ReactionClass
from pvconflict.mnl import (
    DEFAULT_PREDICTORS,
    FittedModel,
    LabeledDataset,
    ModelSpec,
    backward_select,
    backward_select_path,
    fit,
    goodness_of_fit,
    load_model,
    loglik_grad_hess,
    model_from_dict,
    model_to_dict,
    predict_proba,
    save_model,
    z_tests,
)
from pvconflict.trajectory import UserKind

from simulate_mnl import (
    VEHICLE_CALIBRATION,
    balanced_null_dataset,
    coeff_matrix,
    simulate_dataset,
)


def make_model(coeffs, kind=UserKind.VEHICLE, converged=True):
    names = tuple(n for n in coeffs if n != "intercept")
    return FittedModel(
        spec=ModelSpec(kind, names),
        params=coeff_matrix(coeffs),
        se=None,
        deviance=0.0,
        null_deviance=0.0,
        n_obs=0,
        converged=converged,
        iterations=0,
    )


class TestFit:
    def test_independent_outcome_recovers_null_model(self):
        # Cartesian construction: the MLE is exactly the intercept-only model
        data, spec = balanced_null_dataset(class_counts=(2, 3, 5))
        model = fit(data, spec)
        assert model.converged
        np.testing.assert_allclose(model.coefficients, 0.0, atol=1e-6)
        np.testing.assert_allclose(
            model.intercepts, [np.log(3 / 2), np.log(5 / 2)], atol=1e-6
        )

    def test_recovers_generating_coefficients(self):
        data, spec, truth = simulate_dataset(VEHICLE_CALIBRATION, 5000, seed=42)
        model = fit(data, spec)
        assert model.converged
        z_gap = np.abs(model.params - truth) / model.se
        assert np.all(z_gap < 3.0)

    def test_missing_class_is_degenerate(self):
        data, spec, _ = simulate_dataset(VEHICLE_CALIBRATION, 500, seed=1)
        keep = data.y != 2
        clipped = LabeledDataset(
            predictor_names=data.predictor_names, X=data.X[keep], y=data.y[keep],
            user_kind=data.user_kind,
        )
        with pytest.raises(DegenerateFit):
            fit(clipped, spec)

    def test_collinear_column_is_degenerate(self):
        data, spec, _ = simulate_dataset(VEHICLE_CALIBRATION, 500, seed=2)
        X = np.column_stack([data.X, 2.0 * data.X[:, 0]])
        names = data.predictor_names + ("MinDistTwice",)
        doubled = LabeledDataset(predictor_names=names, X=X, y=data.y)
        with pytest.raises(DegenerateFit) as err:
            fit(doubled, ModelSpec(UserKind.VEHICLE, names))
        assert "MinDistTwice" in err.value.columns

    def test_constant_column_is_degenerate(self):
        data, _, _ = simulate_dataset(VEHICLE_CALIBRATION, 200, seed=3)
        X = np.column_stack([data.X[:, :2], np.full(len(data), 7.0)])
        names = ("MinDist", "TimeMinDist", "Stuck")
        with pytest.raises(DegenerateFit) as err:
            fit(LabeledDataset(predictor_names=names, X=X, y=data.y),
                ModelSpec(UserKind.VEHICLE, names))
        assert "Stuck" in err.value.columns

    def test_deviance_never_exceeds_null(self):
        for seed in range(5):
            data, spec, _ = simulate_dataset(VEHICLE_CALIBRATION, 400, seed=seed)
            model = fit(data, spec)
            assert model.deviance <= model.null_deviance

    def test_gradient_at_optimum_below_tolerance(self):
        data, spec, _ = simulate_dataset(VEHICLE_CALIBRATION, 800, seed=5)
        model = fit(data, spec, tol=1e-8)
        design = np.column_stack([np.ones(len(data)), data.columns(spec.predictor_names)])
        _, grad, _ = loglik_grad_hess(model.params, design, data.y)
        assert np.abs(grad).max() < 1e-8

    def test_standardized_fit_matches_raw_fit(self):
        data, spec, _ = simulate_dataset(VEHICLE_CALIBRATION, 1500, seed=6)
        raw = fit(data, spec)
        std = fit(data, spec, standardize=True)
        np.testing.assert_allclose(std.params, raw.params, rtol=1e-5, atol=1e-7)
        np.testing.assert_allclose(std.se, raw.se, rtol=1e-4, atol=1e-7)
        assert std.deviance == pytest.approx(raw.deviance, abs=1e-6)

    def test_consistency_error_shrinks_with_n(self):
        errors = []
        for n in (500, 5000, 50000):
            data, spec, truth = simulate_dataset(VEHICLE_CALIBRATION, n, seed=7)
            model = fit(data, spec)
            errors.append(float(np.abs(model.params - truth).max()))
        assert errors[0] > errors[1] > errors[2]

    def test_empty_dataset_rejected(self):
        data = LabeledDataset(predictor_names=("MinDist",), X=np.empty((0, 1)),
                              y=np.empty(0, dtype=int))
        with pytest.raises(InvalidInput):
            fit(data, ModelSpec(UserKind.VEHICLE, ("MinDist",)))


class TestGradient:
    def test_analytic_gradient_matches_central_differences(self):
        data, spec, _ = simulate_dataset(VEHICLE_CALIBRATION, 200, seed=11)
        design = np.column_stack([np.ones(len(data)), data.columns(spec.predictor_names)])
        rng = np.random.default_rng(0)
        h = 1e-6
        for _ in range(10):
            theta = rng.normal(0, 0.5, size=design.shape[1] * 2)
            _, grad, _ = loglik_grad_hess(theta, design, data.y)
            fd = np.empty_like(grad)
            for j in range(len(theta)):
                up, dn = theta.copy(), theta.copy()
                up[j] += h
                dn[j] -= h
                fd[j] = (loglik_grad_hess(up, design, data.y)[0]
                         - loglik_grad_hess(dn, design, data.y)[0]) / (2 * h)
            rel = np.linalg.norm(grad - fd) / np.linalg.norm(grad)
            assert rel < 1e-6

    def test_hessian_matches_gradient_differences(self):
        data, spec, _ = simulate_dataset(VEHICLE_CALIBRATION, 150, seed=12)
        design = np.column_stack([np.ones(len(data)), data.columns(spec.predictor_names)])
        theta = np.random.default_rng(1).normal(0, 0.3, size=design.shape[1] * 2)
        _, _, hess = loglik_grad_hess(theta, design, data.y)
        h = 1e-6
        for j in range(0, len(theta), 5):
            up, dn = theta.copy(), theta.copy()
            up[j] += h
            dn[j] -= h
            fd_col = (loglik_grad_hess(up, design, data.y)[1]
                      - loglik_grad_hess(dn, design, data.y)[1]) / (2 * h)
            np.testing.assert_allclose(hess[:, j], fd_col, rtol=1e-4, atol=1e-4)


class TestPredictProba:
    def test_all_zero_parameters_give_thirds(self):
        model = make_model({"intercept": (0.0, 0.0), "MinDist": (0.0, 0.0)})
        probs = predict_proba(model, np.array([2.5]))
        np.testing.assert_allclose(probs, 1 / 3, atol=1e-12)

    def test_published_intercepts_at_zero_vector(self):
        # direct softmax evaluation of utilities (0, 0.196, -0.309)
        model = make_model(VEHICLE_CALIBRATION)
        x = np.zeros(len(model.spec.predictor_names))
        probs = predict_proba(model, x)
        expected = np.exp([0.0, 0.196, -0.309])
        expected /= expected.sum()
        np.testing.assert_allclose(probs, expected, atol=1e-12)

    def test_probabilities_sum_to_one(self):
        model = make_model(VEHICLE_CALIBRATION)
        rng = np.random.default_rng(3)
        for _ in range(50):
            x = rng.normal(0, 3, len(model.spec.predictor_names))
            probs = predict_proba(model, x)
            assert abs(probs.sum() - 1.0) < 1e-12
            assert np.all(probs > 0)

    def test_non_finite_input_rejected(self):
        model = make_model(VEHICLE_CALIBRATION)
        x = np.zeros(len(model.spec.predictor_names))
        x[0] = np.inf
        with pytest.raises(InvalidInput):
            predict_proba(model, x)

    def test_utility_shift_invariance(self):
        # adding a constant to all three utilities leaves the softmax alone
        rng = np.random.default_rng(4)
        for _ in range(20):
            util = rng.normal(0, 2, 3)
            shift = rng.normal(0, 5)
            p0 = np.exp(util - util.max())
            p0 /= p0.sum()
            shifted = util + shift
            p1 = np.exp(shifted - shifted.max())
            p1 /= p1.sum()
            np.testing.assert_allclose(p0, p1, atol=1e-12)
            assert np.argmax(p0) == np.argmax(p1)


class TestInference:
    def test_zero_coefficient_gives_unit_p(self):
        data, spec = balanced_null_dataset()
        model = fit(data, spec)
        z, p = z_tests(model)
        np.testing.assert_allclose(z[:, 1:], 0.0, atol=1e-4)
        np.testing.assert_allclose(p[:, 1:], 1.0, atol=1e-3)

    def test_z_is_estimate_over_se(self):
        data, spec, _ = simulate_dataset(VEHICLE_CALIBRATION, 1000, seed=21)
        model = fit(data, spec)
        z, p = z_tests(model)
        np.testing.assert_allclose(z, model.params / model.se, atol=1e-12)
        # the published rounded pair: -0.38 / 0.06
        assert -0.38 / 0.06 == pytest.approx(-6.33, abs=0.01)

    def test_null_simulation_p_values_roughly_uniform(self):
        # Monte Carlo calibration: under the null the p-value of a noise
        # coefficient is uniform; check mean and small-p mass
        rng = np.random.default_rng(31)
        pvals = []
        for _ in range(200):
            n = 300
            X = rng.normal(0, 1, (n, 1))
            y = rng.integers(0, 3, n)
            data = LabeledDataset(predictor_names=("Noise",), X=X, y=y)
            model = fit(data, ModelSpec(UserKind.VEHICLE, ("Noise",)))
            _, p = z_tests(model)
            pvals.append(p[0, 1])
        pvals = np.array(pvals)
        assert abs(pvals.mean() - 0.5) < 0.06
        assert 0.02 < np.mean(pvals < 0.1) < 0.2

    def test_goodness_of_fit_null_against_itself(self):
        data, spec = balanced_null_dataset()
        model = fit(data, spec)
        chi2, df, p = goodness_of_fit(model)
        assert chi2 == pytest.approx(0.0, abs=1e-6)
        assert p == pytest.approx(1.0, abs=1e-6)

    def test_predictive_data_gives_tiny_p(self):
        data, spec, _ = simulate_dataset(VEHICLE_CALIBRATION, 3000, seed=22)
        model = fit(data, spec)
        chi2, df, p = goodness_of_fit(model)
        assert chi2 > 100
        assert p < 1e-6

    def test_eleven_predictor_spec_has_df_22(self):
        names = DEFAULT_PREDICTORS[UserKind.VEHICLE]
        assert len(names) == 11
        coeffs = {"intercept": (0.2, -0.3)}
        rng = np.random.default_rng(23)
        for name in names:
            coeffs[name] = tuple(rng.normal(0, 0.2, 2))
        data, spec, _ = simulate_dataset(coeffs, 2000, seed=23)
        model = fit(data, spec)
        _, df, _ = goodness_of_fit(model)
        assert df == 22


class TestBackwardSelect:
    def test_noise_column_dropped_first(self):
        coeffs = {
            "intercept": (0.2, -0.3),
            "MinDist": (-0.5, -0.3),
            "TimeMinDist": (0.5, 0.6),
            "AccVeh": (-1.5, 1.1),
            "Noise": (0.0, 0.0),
        }
        data, spec, _ = simulate_dataset(coeffs, 3000, seed=33)
        result, dropped = backward_select_path(data, spec)
        assert dropped and dropped[0] == "Noise"
        assert "Noise" not in result.predictor_names

    def test_all_strong_predictors_keep_full_spec(self):
        coeffs = {
            "intercept": (0.2, -0.3),
            "MinDist": (-0.9, -0.6),
            "TimeMinDist": (0.8, 0.9),
            "AccVeh": (-1.8, 1.4),
        }
        data, spec, _ = simulate_dataset(coeffs, 4000, seed=34)
        result = backward_select(data, spec)
        assert result.predictor_names == spec.predictor_names

    def test_criterion_validation(self):
        data, spec = balanced_null_dataset()
        with pytest.raises(InvalidInput):
            backward_select(data, spec, criterion=0.0)


class TestSerialization:
    def test_round_trip_is_exact(self, tmp_path):
        data, spec, _ = simulate_dataset(VEHICLE_CALIBRATION, 600, seed=41)
        model = fit(data, spec)
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        assert np.array_equal(loaded.params, model.params)
        assert np.array_equal(loaded.se, model.se)
        assert loaded.deviance == model.deviance
        assert loaded.null_deviance == model.null_deviance
        assert loaded.n_obs == model.n_obs
        assert loaded.iterations == model.iterations
        assert loaded.spec == model.spec

    def test_dict_round_trip_without_errors_field(self):
        model = make_model(VEHICLE_CALIBRATION)
        doc = model_to_dict(model)
        assert doc["standard_errors"] is None
        again = model_from_dict(doc)
        assert np.array_equal(again.params, model.params)

    def test_malformed_file_reports_input_error(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(InvalidInput):
            load_model(path)


class TestModelSpec:
    def test_duplicate_predictors_rejected(self):
        with pytest.raises(InvalidInput):
            ModelSpec(UserKind.VEHICLE, ("MinDist", "MinDist"))

    def test_empty_predictors_rejected(self):
        with pytest.raises(InvalidInput):
            ModelSpec(UserKind.VEHICLE, ())

    def test_baseline_is_fixed(self):
        with pytest.raises(InvalidInput):
            ModelSpec(UserKind.VEHICLE, ("MinDist",), baseline=ReactionClass.PRUDENT)
