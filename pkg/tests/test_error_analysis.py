"""Tests for pair errors, supremum estimates and the trajectory budgets."""

import numpy as np
import pytest

from config.config import DEMO_CONFIGS
from koopman_sill.dictionary import build_lattice
from koopman_sill.errors import ContractViolation
from koopman_sill.error_analysis import (
    ErrorBoundReport,
    PairErrorSpec,
    alpha_convergence_study,
    build_error_bound_report,
    delta_error_budget,
    delta_propagation_bound,
    estimate_delta_sup,
    estimate_sup_error,
    max_pair_error,
    offcenter_points,
    pair_error,
    pair_error_batch,
    refined_delta_propagation_bound,
    row_rates,
    shift_error_grid,
    trajectory_error_budget,
)
from koopman_sill.regression import WeightMatrix
from koopman_sill.simulation import predict_and_compare

ALPHAS = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0]


@pytest.fixture
def random_weights(lattice_2d, rng):
    return WeightMatrix(rng.normal(size=(2, lattice_2d.n_centers)))


# ===================================================================
# Pair specs and pointwise errors
# ===================================================================

class TestPairErrorSpec:
    def test_dominating_pair(self, lattice_2d):
        high, low = lattice_2d.index_of([1.0, 0.5]), lattice_2d.index_of([0.5, 0.0])
        spec = PairErrorSpec(lattice_2d, high, low)
        assert spec.top == high

    def test_wrong_order_rejected(self, lattice_2d):
        high, low = lattice_2d.index_of([1.0, 0.5]), lattice_2d.index_of([0.5, 0.0])
        with pytest.raises(ContractViolation):
            PairErrorSpec(lattice_2d, low, high)
        assert PairErrorSpec.ordered(lattice_2d, low, high).l == high

    def test_incomparable_pair(self, lattice_2d):
        a, b = lattice_2d.index_of([0.0, 1.0]), lattice_2d.index_of([1.0, 0.0])
        with pytest.raises(ContractViolation):
            PairErrorSpec.ordered(lattice_2d, a, b)
        spec = PairErrorSpec.joined(lattice_2d, a, b)
        np.testing.assert_array_equal(lattice_2d.centers[spec.top], [1.0, 1.0])
        np.testing.assert_array_equal(spec.centers[2], [1.0, 1.0])


class TestPairError:
    @pytest.mark.parametrize("alpha", [1.0, 4.0, 10.0])
    def test_same_center_at_center(self, single_center, alpha):
        spec = PairErrorSpec(single_center, 0, 0)
        assert pair_error(np.array([0.0]), spec, alpha) == pytest.approx(-alpha / 4.0, rel=1e-15)

    def test_vanishes_below_a_center(self):
        d = build_lattice([0.0], [1.0], [1.0], 60.0)
        spec = PairErrorSpec(d, 1, 0)
        assert abs(pair_error(np.array([0.3]), spec)) < 1e-6

    def test_vanishes_above_all_centers(self, lattice_2d):
        spec = PairErrorSpec.joined(lattice_2d, lattice_2d.index_of([0.0, 1.0]), lattice_2d.index_of([1.0, 0.0]))
        assert abs(pair_error(np.array([3.0, 3.0]), spec, 60.0)) < 1e-6

    def test_batch_matches_pointwise(self, lattice_2d, rng):
        spec = PairErrorSpec.joined(lattice_2d, 2, 6)
        X = rng.uniform(-0.5, 1.5, size=(25, 2))
        batch = pair_error_batch(X, spec)
        for x, value in zip(X, batch):
            assert pair_error(x, spec) == pytest.approx(value, rel=1e-14, abs=1e-300)

    def test_bad_alpha(self, single_center):
        with pytest.raises(ContractViolation):
            pair_error(np.array([0.0]), PairErrorSpec(single_center, 0, 0), -1.0)


class TestAlphaConvergence:
    def test_decreases_to_zero(self, lattice_2d):
        spec = PairErrorSpec.joined(lattice_2d, lattice_2d.index_of([0.0, 0.5]), lattice_2d.index_of([0.5, 0.0]))
        errors = alpha_convergence_study(np.array([0.25, 0.75]), spec, ALPHAS)
        assert errors[-1] < errors[0]
        assert errors[-1] < 1e-3
        assert np.all(np.diff(errors[2:]) < 0.0)

    def test_symmetric_offsets(self, single_center):
        spec = PairErrorSpec(single_center, 0, 0)
        for d in (0.2, 0.5, 0.9):
            np.testing.assert_allclose(
                alpha_convergence_study(np.array([d]), spec, ALPHAS),
                alpha_convergence_study(np.array([-d]), spec, ALPHAS),
                rtol=1e-10,
            )

    def test_on_center_coordinate_rejected(self, lattice_2d):
        spec = PairErrorSpec.joined(lattice_2d, 1, 3)
        with pytest.raises(ContractViolation):
            alpha_convergence_study(np.array([0.5, 0.3]), spec, ALPHAS)

    @pytest.mark.parametrize("alphas", [[], [2.0, 1.0], [0.0, 1.0], [1.0, 1.0]])
    def test_bad_alpha_lists(self, single_center, alphas):
        with pytest.raises(ContractViolation):
            alpha_convergence_study(np.array([0.3]), PairErrorSpec(single_center, 0, 0), alphas)

    def test_random_offcenter_sample(self):
        cfg = DEMO_CONFIGS["toggle"]
        d = build_lattice(cfg["domain"]["lo"], cfg["domain"]["hi"], cfg["dictionary"]["spacing"],
                          cfg["dictionary"]["alpha"])
        points = offcenter_points(d, 100, seed=0)
        maxima = np.array([max_pair_error(d, points, alpha) for alpha in ALPHAS])
        assert maxima[-1] < 1e-3 * maxima[0]
        assert np.all(np.diff(maxima[2:]) <= 0.0)


class TestOffcenterPoints:
    def test_distance_from_center_coordinates(self, lattice_2d):
        points = offcenter_points(lattice_2d, 200, seed=3, jitter=0.1)
        coords = np.unique(lattice_2d.centers[:, 0])
        gaps = np.min(np.abs(points[:, 0][:, None] - coords[None, :]), axis=1)
        assert np.all(gaps >= (0.5 - 0.1) * 0.5 - 1e-12)

    def test_seeded(self, lattice_2d):
        np.testing.assert_array_equal(offcenter_points(lattice_2d, 10, seed=4), offcenter_points(lattice_2d, 10, seed=4))

    def test_bad_jitter(self, lattice_2d):
        with pytest.raises(ContractViolation):
            offcenter_points(lattice_2d, 10, jitter=0.5)


# ===================================================================
# Supremum estimates
# ===================================================================

class TestSupEstimate:
    @pytest.mark.parametrize("alpha", [1.0, 4.0, 10.0])
    def test_same_center_quarter_alpha(self, single_center, alpha):
        spec = PairErrorSpec(single_center, 0, 0)
        assert estimate_sup_error(spec, alpha) == pytest.approx(alpha / 4.0, abs=1e-6)

    @pytest.mark.parametrize("pair", [(4, 4), (7, 0), (2, 6), (5, 1)])
    def test_bounds_random_points(self, lattice_2d, rng, pair):
        spec = PairErrorSpec.joined(lattice_2d, *pair)
        estimate = estimate_sup_error(spec, density=64)
        pad = 2 * lattice_2d.mesh_spacing
        X = rng.uniform(lattice_2d.domain_lo - pad, lattice_2d.domain_hi + pad, size=(10 ** 4, 2))
        assert np.max(np.abs(pair_error_batch(X, spec))) <= estimate * (1 + 1e-6)

    def test_density_doubling_is_stable(self, toggle_setup):
        dictionary = toggle_setup[0]
        spec = PairErrorSpec.joined(dictionary, 8, 13)
        coarse = estimate_sup_error(spec, density=16)
        fine = estimate_sup_error(spec, density=32)
        assert fine == pytest.approx(coarse, rel=0.01)

    def test_refinement_reaches_dense_scan_maximum(self):
        # the peak sits midway between the two centers, off every grid knot
        d = build_lattice([0.0], [1.0], [0.5], 40.0)
        spec = PairErrorSpec(d, 2, 1)
        scan = np.linspace(-1.0, 2.0, 30001)
        values = np.abs(pair_error_batch(scan[:, None], spec))
        assert abs(scan[np.argmax(values)] - 0.75) < 1e-3
        assert estimate_sup_error(spec) >= values.max() * (1 - 1e-9)

    def test_low_density_rejected(self, single_center):
        with pytest.raises(ContractViolation):
            estimate_sup_error(PairErrorSpec(single_center, 0, 0), density=8)

    def test_deterministic(self, lattice_2d):
        spec = PairErrorSpec.joined(lattice_2d, 3, 5)
        assert estimate_sup_error(spec) == estimate_sup_error(spec)


class TestShiftErrorGrid:
    def test_zero_shift_is_quarter_alpha(self):
        rows = shift_error_grid([1.0, 4.0], [0.0, 0.5])
        assert [(r.alpha, r.shift) for r in rows] == [(1.0, 0.0), (4.0, 0.0), (1.0, 0.5), (4.0, 0.5)]
        assert rows[0].sup_error == pytest.approx(0.25, abs=1e-6)
        assert rows[1].sup_error == pytest.approx(1.0, abs=1e-6)

    def test_separated_centers_beat_the_same_center(self):
        rows = shift_error_grid([10.0], [0.0, 1.0])
        assert rows[1].sup_error < rows[0].sup_error

    def test_negative_shift_rejected(self):
        with pytest.raises(ContractViolation):
            shift_error_grid([1.0], [-0.5])


# ===================================================================
# Budgets
# ===================================================================

class TestBudgets:
    @pytest.fixture
    def report(self, lattice_2d, random_weights):
        return build_error_bound_report(lattice_2d, random_weights, jobs=2, show_progress=False)

    def test_report_is_symmetric_and_non_negative(self, report, random_weights):
        assert isinstance(report, ErrorBoundReport)
        np.testing.assert_array_equal(report.M_hat, report.M_hat.T)
        assert np.all(report.M_hat >= 0.0)
        assert report.total_rate == pytest.approx(float(np.sum(row_rates(report.M_hat, random_weights))))

    def test_diagonal_is_quarter_alpha_envelope(self, report, lattice_2d):
        for l in range(lattice_2d.n_centers):
            assert report.M_hat[l, l] == pytest.approx(lattice_2d.alpha / 4.0, abs=1e-6)

    def test_linear_in_time(self, lattice_2d, random_weights, report):
        assert trajectory_error_budget(lattice_2d, random_weights, report, 0.0) == 0.0
        one = trajectory_error_budget(lattice_2d, random_weights, report, 1.0)
        assert one == pytest.approx(report.total_rate)
        assert trajectory_error_budget(lattice_2d, random_weights, report, 2.0) == pytest.approx(2.0 * one, rel=1e-15)
        times = np.array([0.0, 0.5, 3.0])
        np.testing.assert_allclose(trajectory_error_budget(lattice_2d, random_weights, report, times), times * one)

    def test_additive_over_rows(self, lattice_2d, random_weights, report):
        rates = row_rates(report.M_hat, random_weights)
        assert trajectory_error_budget(lattice_2d, random_weights, report, 1.5) == pytest.approx(1.5 * sum(rates))

    def test_negative_time_rejected(self, lattice_2d, random_weights, report):
        with pytest.raises(ContractViolation):
            trajectory_error_budget(lattice_2d, random_weights, report, -1.0)

    def test_report_to_dict(self, report):
        payload = report.to_dict()
        assert payload["padding_mesh_spacings"] == 2.0
        assert len(payload["M_hat"]) == 9 and len(payload["M_hat_Lambda"]) == 9


class TestDeltaBounds:
    def test_zero_regression_error(self):
        assert delta_propagation_bound([0.0, 0.0], 3.0) == 0.0
        assert delta_error_budget([0.0, 0.0], 3.0, 36, 5.0) == 0.0

    def test_linear_in_delta(self):
        base = delta_propagation_bound([0.1, 0.2], 3.0)
        assert delta_propagation_bound([0.3, 0.6], 3.0) == pytest.approx(3.0 * base)
        assert refined_delta_propagation_bound([0.1, 0.2], 3.0) == pytest.approx(base / 4.0)

    def test_budget_form(self):
        assert delta_error_budget([0.1, 0.2], 3.0, 4, 2.0) == pytest.approx(2.0 * (0.3 + 4 * 0.9))

    @pytest.mark.parametrize("t", [-1.0, np.inf, np.nan, [0.0, np.inf]])
    def test_budget_rejects_bad_times(self, t):
        with pytest.raises(ContractViolation):
            delta_error_budget([0.1, 0.2], 3.0, 4, t)

    def test_negative_delta_rejected(self):
        with pytest.raises(ContractViolation):
            delta_propagation_bound([-0.1], 1.0)

    def test_estimated_delta_is_small_for_toggle(self, toggle_model):
        dictionary, field, _, weights, _, _ = toggle_model
        delta = estimate_delta_sup(field, weights, dictionary)
        assert delta.shape == (2,)
        assert np.all(delta > 0.0) and np.all(delta < 0.5)


@pytest.mark.slow
def test_toggle_budget_covers_measured_error(toggle_model):
    dictionary, field, _, weights, _, generator = toggle_model
    cfg = DEMO_CONFIGS["toggle"]
    report = build_error_bound_report(dictionary, weights, show_progress=False)
    delta_sup = estimate_delta_sup(field, weights, dictionary)
    for x0 in cfg["simulation"]["initial_conditions"]:
        outcome = predict_and_compare(dictionary, generator, field, np.array(x0), 0.01, cfg["simulation"]["horizon"])
        times = outcome.comparison.times
        allowed = (trajectory_error_budget(dictionary, weights, report, times)
                   + delta_error_budget(delta_sup, dictionary.alpha, dictionary.n_centers, times))
        assert np.all(outcome.comparison.errors <= allowed)
