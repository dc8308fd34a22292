"""Tests for generator assembly, closure diagnostics and the EDMD baseline."""

import numpy as np
import pytest

from conftest import constant_field
from koopman_sill.dictionary import (
    SILLDictionary,
    exact_lambda_derivative,
    lambda_block,
    lift_batch,
    logistic_eval,
)
from koopman_sill.errors import ContractViolation, InvariantViolation, NumericalError
from koopman_sill.generator import (
    KoopmanGenerator,
    assemble_generator,
    closure_residual,
    closure_rhs_join,
    column_soft_threshold,
    edmd_discrete,
    edmd_objective,
    lifted_snapshots,
)
from koopman_sill.regression import WeightMatrix, fit_weights, make_sample_grid, residual_at


# ===================================================================
# Assembly
# ===================================================================

class TestAssembleGenerator:
    def test_zero_field_gives_zero_generator(self, lattice_2d):
        grid = make_sample_grid(lattice_2d)
        f = constant_field([0.0, 0.0])
        weights, _ = fit_weights(f, lattice_2d, grid)
        generator = assemble_generator(lattice_2d, weights, f, grid)
        np.testing.assert_array_equal(generator.K, 0.0)

    def test_structure(self, toggle_model):
        dictionary, _, _, weights, _, generator = toggle_model
        n = dictionary.state_dim
        assert generator.K.shape == (39, 39)
        np.testing.assert_array_equal(generator.K[0], 0.0)
        np.testing.assert_array_equal(generator.K[1:1 + n, :1 + n], 0.0)
        np.testing.assert_array_equal(generator.state_rows, weights.W)
        assert np.all(np.isfinite(generator.K))

    def test_constant_speed_single_center(self, single_center):
        # f(x) = c in 1-D: the Lambda row is the best fit of c alpha lambda (1 - lambda) in span{1, x, lambda}
        c = 0.7
        f = constant_field([c])
        grid = make_sample_grid(single_center, per_dim=41)
        weights, _ = fit_weights(f, single_center, grid)
        generator = assemble_generator(single_center, weights, f, grid)

        x = grid.points[:, 0]
        lam = logistic_eval(x, 0.0, single_center.alpha)
        target = c * single_center.alpha * lam * (1.0 - lam)
        basis = np.column_stack([np.ones_like(x), x, lam])
        expected, *_ = np.linalg.lstsq(basis, target, rcond=None)
        np.testing.assert_allclose(generator.lambda_rows[0], expected, rtol=1e-8, atol=1e-10)
        best_rms = np.sqrt(np.mean((target - basis @ expected) ** 2))
        assert generator.row_residuals[0] == pytest.approx(best_rms, rel=1e-6, abs=1e-14)

    def test_projection_beats_zero_rows(self, vdp_model):
        dictionary, field, grid, weights, _, generator = vdp_model
        assert dictionary.n_centers == 169
        frozen = assemble_generator(dictionary, weights, field, grid, mode="state_only")
        np.testing.assert_array_equal(frozen.lambda_rows, 0.0)
        assert np.all(generator.row_residuals <= frozen.row_residuals + 1e-15)
        assert np.all(generator.row_residuals[frozen.row_residuals > 0] < frozen.row_residuals[frozen.row_residuals > 0])

    def test_projection_beats_frozen_join_coefficients(self, toggle_model):
        # Any constant row built from the same data fits the grid no better than the projection
        dictionary, field, grid, weights, _, generator = toggle_model
        n = dictionary.state_dim
        X = grid.points
        F = field.evaluate_batch(X)
        psi = lift_batch(X, dictionary)
        centre = 0.5 * (dictionary.domain_lo + dictionary.domain_hi)
        alpha = dictionary.alpha
        for l in (0, 7, 20, 35):
            coefficient = alpha * (1.0 - logistic_eval(centre, dictionary.centers[l], alpha))
            candidate = np.zeros(dictionary.lifting_dim)
            for k in range(dictionary.n_centers):
                candidate[1 + n + dictionary.join_table[l, k]] += coefficient @ weights.W[:, k]
            exact = np.array([exact_lambda_derivative(x, fx, dictionary.centers[l], alpha) for x, fx in zip(X, F)])
            frozen_rms = np.sqrt(np.mean((exact - psi @ candidate) ** 2))
            assert generator.row_residuals[l] <= frozen_rms + 1e-12

    def test_weights_from_another_dictionary(self, lattice_2d):
        grid = make_sample_grid(lattice_2d)
        with pytest.raises(ContractViolation):
            assemble_generator(lattice_2d, WeightMatrix(np.zeros((1, 5))), constant_field([0.0, 0.0]), grid)

    def test_unknown_mode(self, lattice_2d):
        grid = make_sample_grid(lattice_2d)
        with pytest.raises(ContractViolation):
            assemble_generator(lattice_2d, WeightMatrix(np.zeros((2, 9))), constant_field([0.0, 0.0]), grid,
                               mode="collocation")


class TestKoopmanGenerator:
    def test_nonzero_constant_row_rejected(self):
        K = np.zeros((4, 4))
        K[0, 2] = 1.0
        with pytest.raises(InvariantViolation):
            KoopmanGenerator(K=K, state_dim=1, n_centers=2)

    def test_state_row_outside_block_rejected(self):
        K = np.zeros((4, 4))
        K[1, 1] = 1.0
        with pytest.raises(InvariantViolation):
            KoopmanGenerator(K=K, state_dim=1, n_centers=2)

    def test_non_finite_rejected(self):
        K = np.zeros((4, 4))
        K[3, 3] = np.inf
        with pytest.raises(NumericalError):
            KoopmanGenerator(K=K, state_dim=1, n_centers=2)

    def test_wrong_shape(self):
        with pytest.raises(ContractViolation):
            KoopmanGenerator(K=np.zeros((3, 3)), state_dim=1, n_centers=2)

    def test_spectral_abscissa(self):
        K = np.zeros((3, 3))
        K[1, 2] = 2.0
        K[2, 2] = 0.5
        assert KoopmanGenerator(K=K, state_dim=1, n_centers=1).spectral_abscissa == pytest.approx(0.5)
        K[2, 2] = -0.5
        assert KoopmanGenerator(K=K, state_dim=1, n_centers=1).spectral_abscissa == pytest.approx(0.0, abs=1e-12)


# ===================================================================
# Closure diagnostics
# ===================================================================

class TestClosureRhs:
    def test_zero_weights(self, lattice_2d):
        assert closure_rhs_join(np.array([0.3, 0.6]), 4, lattice_2d, WeightMatrix(np.zeros((2, 9)))) == 0.0

    def test_single_center_hand_expansion(self, single_center):
        w, x = 0.8, np.array([0.35])
        alpha = single_center.alpha
        lam = logistic_eval(x[0], 0.0, alpha)
        value = closure_rhs_join(x, 0, single_center, WeightMatrix(np.array([[w]])))
        assert value == pytest.approx(alpha * (1 - lam) * w * lam, rel=1e-14)
        # The exact derivative keeps the product lambda * lambda
        exact = exact_lambda_derivative(x, [w * lam], [0.0], alpha)
        assert value - exact == pytest.approx(alpha * (1 - lam) * w * (lam - lam ** 2), rel=1e-12)

    def test_far_below_a_center_matches_exact(self):
        centers = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        d = SILLDictionary(centers, 50.0, [0.0, 0.0], [1.0, 1.0], [1.0, 1.0])
        weights = WeightMatrix(np.array([[0.3, -0.2, 0.5, 0.1], [0.4, 0.2, -0.6, 0.3]]))
        x = np.array([-1.5, 0.4])
        fx = weights.W @ lambda_block(x, d)[0]
        l = d.index_of([1.0, 1.0])
        exact = exact_lambda_derivative(x, fx, d.centers[l], d.alpha)
        assert abs(closure_rhs_join(x, l, d, weights) - exact) < 1e-6

    def test_bad_index(self, lattice_2d):
        with pytest.raises(ContractViolation):
            closure_rhs_join(np.zeros(2), 9, lattice_2d, WeightMatrix(np.zeros((2, 9))))


class TestClosureResidual:
    def test_zero_everywhere_for_zero_field(self, lattice_2d):
        grid = make_sample_grid(lattice_2d)
        f = constant_field([0.0, 0.0])
        K = KoopmanGenerator(K=np.zeros((12, 12)), state_dim=2, n_centers=9)
        report = closure_residual(lattice_2d, WeightMatrix(np.zeros((2, 9))), f, K, grid)
        np.testing.assert_array_equal(report.epsilon, 0.0)
        assert report.sup == 0.0 and report.rms == 0.0

    def test_toggle_residual_is_finite(self, toggle_model):
        dictionary, field, grid, weights, _, generator = toggle_model
        report = closure_residual(dictionary, weights, field, generator, grid)
        assert np.isfinite(report.sup) and report.sup > 0.0
        assert np.all(report.row_rms >= 0.0) and np.all(report.row_sup >= report.row_rms - 1e-15)
        assert report.row_rms[0] == 0.0

    def test_state_rows_equal_regression_residual(self, toggle_model):
        dictionary, field, grid, weights, _, generator = toggle_model
        report = closure_residual(dictionary, weights, field, generator, grid)
        for s in range(0, grid.size, 53):
            delta = residual_at(field, weights, dictionary, grid.points[s])
            assert report.state_residual[s] == pytest.approx(np.linalg.norm(delta), rel=1e-9, abs=1e-12)

    def test_rms_is_grid_independent(self, toggle_model):
        dictionary, field, _, weights, _, generator = toggle_model
        coarse = closure_residual(dictionary, weights, field, generator, make_sample_grid(dictionary, 60))
        fine = closure_residual(dictionary, weights, field, generator, make_sample_grid(dictionary, 120))
        assert fine.rms == pytest.approx(coarse.rms, rel=0.05)


# ===================================================================
# EDMD baseline
# ===================================================================

class TestEDMD:
    def test_pseudoinverse_oracle(self, rng):
        prev = rng.normal(size=(20, 200))
        nxt = rng.normal(size=(20, 200))
        result = edmd_discrete(prev, nxt, 0.0)
        np.testing.assert_allclose(result.K, nxt @ np.linalg.pinv(prev), rtol=1e-10, atol=1e-10)
        assert result.converged

    def test_recovers_linear_map(self, rng):
        Q, _ = np.linalg.qr(rng.normal(size=(20, 20)))
        K_true = Q @ np.diag(rng.uniform(0.5, 0.95, size=20)) @ Q.T
        prev = rng.normal(size=(20, 200))
        result = edmd_discrete(prev, K_true @ prev, 0.0)
        np.testing.assert_allclose(result.K, K_true, atol=1e-8)

    def test_large_zeta_thresholds_every_column(self, rng):
        prev = rng.normal(size=(5, 50))
        nxt = rng.normal(size=(5, 50))
        result = edmd_discrete(prev, nxt, 1e8)
        np.testing.assert_array_equal(result.K, 0.0)
        assert result.converged

    def test_objective_non_increasing(self, rng):
        prev = rng.normal(size=(6, 80))
        nxt = 0.9 * prev + 0.05 * rng.normal(size=(6, 80))
        result = edmd_discrete(prev, nxt, 2.0)
        history = np.array(result.objective_history)
        assert np.all(np.diff(history) <= 1e-12 * np.abs(history[:-1]))
        assert result.objective_history[-1] == pytest.approx(edmd_objective(result.K, prev, nxt, 2.0), rel=1e-12)

    def test_small_zeta_approaches_least_squares(self, rng):
        prev = rng.normal(size=(4, 100))
        nxt = rng.normal(size=(4, 100))
        exact = edmd_discrete(prev, nxt, 0.0).K
        regularized = edmd_discrete(prev, nxt, 1e-6)
        assert regularized.converged
        np.testing.assert_allclose(regularized.K, exact, atol=1e-4)

    def test_iteration_cap_returns_best_iterate(self, rng):
        prev = rng.normal(size=(6, 40))
        nxt = rng.normal(size=(6, 40))
        result = edmd_discrete(prev, nxt, 1.0, max_iterations=3)
        assert not result.converged
        assert result.iterations == 3
        assert result.objective_history[-1] <= result.objective_history[0]

    def test_shape_mismatch(self, rng):
        with pytest.raises(ContractViolation):
            edmd_discrete(rng.normal(size=(3, 10)), rng.normal(size=(3, 9)))

    def test_negative_zeta(self, rng):
        with pytest.raises(ContractViolation):
            edmd_discrete(np.eye(3), np.eye(3), -1.0)

    def test_soft_threshold(self):
        K = np.array([[3.0, 0.1], [4.0, 0.0]])
        np.testing.assert_allclose(column_soft_threshold(K, 1.0), [[2.4, 0.0], [3.2, 0.0]])

    def test_snapshots_from_lifted_trajectory(self):
        Z = np.arange(12.0).reshape(4, 3)
        prev, nxt = lifted_snapshots(Z)
        np.testing.assert_array_equal(prev, Z[:-1].T)
        np.testing.assert_array_equal(nxt, Z[1:].T)


class TestMonomialNonClosure:
    def test_highest_monomial_leaks_out_of_the_span(self):
        # x' = x^2 maps x^p to p x^(p+1), one degree above any finite monomial set
        x = np.linspace(-1.0, 1.0, 101)
        for degree in (2, 4, 8):
            basis = np.vander(x, degree + 1, increasing=True)
            derivative = degree * x ** (degree + 1)
            coefficients, *_ = np.linalg.lstsq(basis, derivative, rcond=None)
            assert np.max(np.abs(derivative - basis @ coefficients)) > 1e-3
