import math

import numpy as np
import pytest

import csiloc
from csiloc import gpr, pipeline, training
from csiloc.errors import DomainError, TrainingError


def sample_from_se_gp(rng, n, length_scale=0.5, noise=0.1, box=2.0, d=2):
    X = rng.uniform(0, box, size=(n, d))
    true = gpr.KernelSpec(kind=gpr.SQUARED_EXPONENTIAL, signal_std=1.0,
                          length_scale=length_scale, noise_std=noise)
    K = gpr.gram(true, X)
    y = np.linalg.cholesky(K + 1e-10 * np.eye(n)) @ rng.normal(size=n)
    return X, y + noise * rng.normal(size=n), true


class TestOptimizeHyperparams:
    def test_recovers_length_scale_from_se_sample(self):
        rng = np.random.default_rng(0)
        X, y, true = sample_from_se_gp(rng, 80)
        budget = training.OptimizationBudget(rng_seed=0)
        spec, value = training.optimize_hyperparams(X, y, gpr.SQUARED_EXPONENTIAL, budget)
        assert 0.25 <= spec.length_scale <= 1.0  # within x2 of the true 0.5
        assert value <= gpr.nlml(X, y, true) + 1e-3

    def test_deterministic_under_seed(self, rng):
        X, y, _ = sample_from_se_gp(rng, 30)
        budget = training.OptimizationBudget(n_restarts=2, max_iterations=8, rng_seed=7)
        a = training.optimize_hyperparams(X, y, gpr.MATERN52, budget)
        b = training.optimize_hyperparams(X, y, gpr.MATERN52, budget)
        assert a.spec == b.spec
        assert a.nlml == b.nlml

    def test_constant_targets_leave_no_model_fit_term(self, rng):
        X = rng.normal(size=(20, 2))
        y = np.full(20, 4.2)
        budget = training.OptimizationBudget(n_restarts=2, max_iterations=10, rng_seed=1)
        spec, value = training.optimize_hyperparams(X, y, gpr.SQUARED_EXPONENTIAL, budget)
        model = gpr.fit(X, y, spec)
        model_fit_term = 0.5 * model.y_centered @ model.weights
        assert model_fit_term == 0.0
        complexity_plus_norm = np.sum(np.log(np.diag(model.chol))) + 10 * np.log(2 * np.pi)
        assert value == pytest.approx(complexity_plus_norm, rel=1e-9)

    def test_descent_property_per_trace(self, rng):
        X, y, _ = sample_from_se_gp(rng, 40)
        budget = training.OptimizationBudget(n_restarts=3, max_iterations=15, rng_seed=3)
        result = training.optimize_hyperparams(X, y, gpr.MATERN32, budget)
        for restart in result.restarts:
            assert len(restart.trace) >= 1
            assert np.all(np.diff(restart.trace) <= 0.0)

    def test_too_few_samples_rejected(self, rng):
        with pytest.raises(DomainError):
            training.optimize_hyperparams(
                rng.normal(size=(4, 2)), rng.normal(size=4),
                gpr.SQUARED_EXPONENTIAL, training.OptimizationBudget(),
            )


class TestCvLoss:
    def test_smooth_function_beats_target_variance(self, rng):
        X = rng.uniform(0, 4, size=(40, 1))
        y = 2.0 * X[:, 0] + 1.0
        spec = gpr.KernelSpec(kind=gpr.SQUARED_EXPONENTIAL, signal_std=float(np.std(y)),
                              length_scale=3.0, noise_std=0.01)
        assert training.cv_loss(X, y, spec) < float(np.var(y))

    def test_leave_one_out_matches_per_point_oracle(self, rng):
        X = rng.uniform(0, 2, size=(9, 2))
        y = np.sin(X[:, 0]) + 0.1 * rng.normal(size=9)
        spec = gpr.KernelSpec(kind=gpr.MATERN52, signal_std=1.0, length_scale=1.0, noise_std=0.1)
        loss = training.cv_loss(X, y, spec, k_folds=9, rng_seed=11)
        per_point = []
        for i in range(9):
            keep = np.array([j for j in range(9) if j != i])
            model = gpr.fit(X[keep], y[keep], spec)
            mean, _ = gpr.predict(model, X[i:i + 1])
            per_point.append((mean[0] - y[i]) ** 2)
        assert loss == pytest.approx(np.mean(per_point), abs=1e-12)

    def test_deterministic_under_seed(self, rng):
        X, y, _ = sample_from_se_gp(rng, 25)
        spec = gpr.KernelSpec(kind=gpr.MATERN32, signal_std=1.0, length_scale=0.5, noise_std=0.1)
        assert training.cv_loss(X, y, spec, rng_seed=5) == training.cv_loss(X, y, spec, rng_seed=5)

    def test_requires_enough_samples(self, rng):
        with pytest.raises(DomainError):
            training.cv_loss(rng.normal(size=(3, 2)), rng.normal(size=3),
                             gpr.KernelSpec(kind=gpr.MATERN32, signal_std=1.0, length_scale=1.0),
                             k_folds=5)


class TestObjective:
    def test_zero_loss_gives_zero(self):
        assert training.objective(0.0) == 0.0

    def test_e_minus_one(self):
        assert training.objective(math.e - 1.0) == pytest.approx(1.0, abs=1e-15)

    def test_published_scale_anchor(self):
        # log(1 + 53.2) = log(54.2); same order as the published minimum 3.9637
        assert training.objective(53.2) == pytest.approx(3.9926809084456005, abs=1e-12)

    def test_monotone(self, rng):
        values = np.sort(rng.uniform(0, 100, size=50))
        ofs = [training.objective(v) for v in values]
        assert np.all(np.diff(ofs) > 0)

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            training.objective(-1e-9)


class TestSelectKernel:
    def test_report_covers_every_kind_and_winner_minimizes(self, rng):
        X, y, _ = sample_from_se_gp(rng, 30)
        budget = training.OptimizationBudget(n_restarts=2, max_iterations=8, rng_seed=2)
        report = training.select_kernel(X, y, budget)
        assert [e.kind for e in report.entries] == list(gpr.KERNEL_KINDS)
        assert report.winning_entry.of == min(e.of for e in report.entries)
        assert len(report.surface) == 2 * len(gpr.KERNEL_KINDS)

    def test_surface_skippable(self, rng):
        X, y, _ = sample_from_se_gp(rng, 30)
        budget = training.OptimizationBudget(n_restarts=2, max_iterations=8, rng_seed=2)
        assert training.select_kernel(X, y, budget, surface=False).surface == []

    def test_se_data_selects_smooth_kernels(self):
        # repeated-trial oracle: the smooth-data winner should be the squared
        # exponential (or the rational quadratic, which contains it) in at
        # least 16 of 20 seeded repetitions
        wins = 0
        for rep in range(20):
            rng = np.random.default_rng(100 + rep)
            X, y, _ = sample_from_se_gp(rng, 120, length_scale=0.7, noise=0.05)
            budget = training.OptimizationBudget(n_restarts=2, max_iterations=12, rng_seed=rep)
            report = training.select_kernel(X, y, budget, surface=False)
            wins += report.winner in (gpr.SQUARED_EXPONENTIAL, gpr.RATIONAL_QUADRATIC)
        assert wins >= 16

    def test_deterministic_reports(self, rng):
        X, y, _ = sample_from_se_gp(rng, 30)
        budget = training.OptimizationBudget(n_restarts=2, max_iterations=8, rng_seed=9)
        a = training.select_kernel(X, y, budget)
        b = training.select_kernel(X, y, budget)
        assert [e.spec for e in a.entries] == [e.spec for e in b.entries]
        assert a.winner == b.winner
        assert [s.of for s in a.surface] == [s.of for s in b.surface]


class TestTrainPositionModels:
    def test_constant_coordinate_predicted_everywhere(self, rng):
        X = rng.normal(size=(30, 4))
        positions = np.column_stack([rng.uniform(0, 5, size=30), np.full(30, 2.5)])
        budget = training.OptimizationBudget(n_restarts=2, max_iterations=8, rng_seed=4)
        models = training.train_position_models(X, positions, budget, surface=False)
        mean, _ = gpr.predict(models.gpr_y, rng.normal(size=(20, 4)))
        np.testing.assert_allclose(mean, 2.5, atol=1e-3)

    def test_reports_recorded_per_coordinate(self, rng):
        X = rng.normal(size=(26, 3))
        positions = rng.uniform(0, 5, size=(26, 2))
        budget = training.OptimizationBudget(n_restarts=1, max_iterations=6, rng_seed=6)
        models = training.train_position_models(X, positions, budget, surface=False)
        assert models.report_x.winner in gpr.KERNEL_KINDS
        assert models.report_y.winner in gpr.KERNEL_KINDS
        gx, gy = models
        assert gx is models.gpr_x and gy is models.gpr_y

    def test_end_to_end_724_samples_generalizes(self):
        # seeded 4x4-profile scenario, 724 training points: training-set RMSE
        # must not exceed held-out RMSE
        sc = csiloc.synthetic_scenario(n_antennas=4, n_subcarriers=4,
                                       grid_rows=30, grid_cols=30, rng_seed=13)
        samples = csiloc.generate_dataset(sc)
        vectors = pipeline.profile_vectors(samples)
        positions = pipeline.positions_of(samples)
        assert vectors.shape[1] == 16
        rng = np.random.default_rng(77)
        order = rng.permutation(len(samples))
        train, heldout = order[:724], order[724:]
        budget = training.OptimizationBudget(n_restarts=1, max_iterations=6, rng_seed=5)
        models = training.train_position_models(vectors[train], positions[train], budget,
                                                surface=False)

        def rmse(idx):
            ex, _ = gpr.predict(models.gpr_x, vectors[idx])
            ey, _ = gpr.predict(models.gpr_y, vectors[idx])
            err = (ex - positions[idx, 0]) ** 2 + (ey - positions[idx, 1]) ** 2
            return float(np.sqrt(np.mean(err)))

        assert rmse(train) < rmse(heldout)

    def test_shape_validation(self, rng):
        budget = training.OptimizationBudget(rng_seed=0)
        with pytest.raises(DomainError):
            training.train_position_models(rng.normal(size=(10, 2)), rng.normal(size=(10, 3)), budget)
        with pytest.raises(DomainError):
            training.train_position_models(rng.normal(size=(10, 2)), rng.normal(size=(9, 2)), budget)


class TestBudgetValidation:
    def test_rejects_nonpositive_fields(self):
        with pytest.raises(DomainError):
            training.OptimizationBudget(n_restarts=0)
        with pytest.raises(DomainError):
            training.OptimizationBudget(max_iterations=0)
        with pytest.raises(DomainError):
            training.OptimizationBudget(tol=0.0)
