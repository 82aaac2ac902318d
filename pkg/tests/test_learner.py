import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from survgroup import (ForestConfig, LearnerConfig, ShapeError, SoftRuleParams, StepCurve,
                       SurvivalDataset, discover, exceptionality_vector, full_objective, harden,
                       learn_subgroup, membership, soft_objective, soft_rule)
from survgroup.learner import (Adam, _objective_terms, loss_and_grad, model_matrix,
                               predecessor_exceptionality)
from survgroup.pruner import jaccard
from survgroup.rsf import SurvivalMatrix, population_curve
from survgroup.survival import trapezoid_abs_diff, trapezoid_weights


def random_theta(rng, p):
    alpha = rng.uniform(-0.2, 0.5, p)
    return {"alpha": alpha, "beta": alpha + rng.uniform(0.2, 1.0, p),
            "weights": rng.uniform(0.1, 1.5, p)}


def finite_difference(theta, X, tau, terms, h=1e-5):
    out = {}
    for key, value in theta.items():
        g = np.zeros_like(value)
        for j in range(value.size):
            up = {k: v.copy() for k, v in theta.items()}
            down = {k: v.copy() for k, v in theta.items()}
            up[key][j] += h
            down[key][j] -= h
            g[j] = (loss_and_grad(up, X, tau, terms)[0] - loss_and_grad(down, X, tau, terms)[0]) / (2 * h)
        out[key] = g
    return out


def max_relative_error(analytic, numeric):
    worst = 0.0
    for key in analytic:
        a, f = analytic[key], numeric[key]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-6)
        worst = max(worst, float(np.max(np.abs(a - f) / denom)))
    return worst


def gradient_point(seed, n=50, p=5):
    rng = np.random.default_rng(seed)
    X = rng.random((n, p))
    terms = _objective_terms(rng.exponential(size=n), [rng.exponential(size=n)], gamma=rng.uniform(0, 1))
    return random_theta(rng, p), X, rng.uniform(0.1, 0.4), terms


class TestExceptionalityVector:
    def test_row_equal_to_reference(self):
        M = SurvivalMatrix(np.array([[1.0, 0.6, 0.2]]), np.array([1.0, 2.0, 4.0]))
        assert exceptionality_vector(M, np.array([1.0, 0.6, 0.2]))[0] == 0.0

    def test_rectangle(self):
        M = SurvivalMatrix(np.array([[0.5, 0.5]]), np.array([0.0, 2.0]))
        assert exceptionality_vector(M, np.array([1.0, 1.0]))[0] == pytest.approx(1.0)

    def test_grid_mismatch(self):
        M = SurvivalMatrix(np.array([[0.5, 0.5]]), np.array([0.0, 2.0]))
        with pytest.raises(ShapeError):
            exceptionality_vector(M, StepCurve([0.0, 3.0], [1.0, 1.0]))

    def test_matches_per_row_trapezoid(self, rng):
        grid = np.cumsum(rng.uniform(0.1, 1, 30))
        M = SurvivalMatrix(np.sort(rng.random((12, 30)), axis=1)[:, ::-1], grid)
        ref = M.values.mean(axis=0)
        expected = [trapezoid_abs_diff(row, ref, grid) for row in M.values]
        np.testing.assert_allclose(exceptionality_vector(M, ref), expected, rtol=1e-12)


class TestProposition:
    """Masked mean of per-row deviations dominates the deviation of the masked mean curve."""

    @given(st.integers(0, 2**32 - 1))
    def test_integrated_and_pointwise(self, seed):
        rng = np.random.default_rng(seed)
        n, m = rng.integers(2, 30), rng.integers(2, 40)
        grid = np.cumsum(rng.uniform(0.01, 2, m))
        rows = np.sort(rng.random((n, m)), axis=1)[:, ::-1]
        ref = np.sort(rng.random(m))[::-1]
        mask = rng.random(n) < 0.5
        mask[rng.integers(n)] = True
        M = SurvivalMatrix(rows, grid)
        lhs = exceptionality_vector(M, ref)[mask].mean()
        rhs = trapezoid_abs_diff(rows[mask].mean(axis=0), ref, grid)
        assert lhs >= rhs - 1e-12
        pointwise_l = np.abs(rows[mask] - ref).mean(axis=0)
        pointwise_r = np.abs(rows[mask].mean(axis=0) - ref)
        assert np.all(pointwise_l >= pointwise_r - 1e-12)

    @given(st.integers(0, 2**32 - 1))
    def test_strict_when_rows_straddle(self, seed):
        rng = np.random.default_rng(seed)
        m = 10
        grid = np.arange(1.0, m + 1)
        ref = np.full(m, 0.5)
        above = 0.5 + rng.uniform(0.05, 0.4, m)
        below = 0.5 - rng.uniform(0.05, 0.4, m)
        rows = np.vstack([np.sort(above)[::-1], np.sort(below)[::-1]])
        M = SurvivalMatrix(rows, grid)
        lhs = exceptionality_vector(M, ref).mean()
        rhs = trapezoid_abs_diff(rows.mean(axis=0), ref, grid)
        assert lhs > rhs + 1e-9


class TestObjective:
    def test_full_membership_gamma_one_is_mean(self, rng):
        ex = rng.exponential(size=20)
        assert soft_objective(np.ones(20), ex, 1.0) == pytest.approx(ex.mean())

    def test_one_hot_gamma_zero_is_that_subject(self, rng):
        ex = rng.exponential(size=20)
        s = np.zeros(20)
        s[7] = 1.0
        assert soft_objective(s, ex, 0.0) == pytest.approx(ex[7], rel=1e-6)

    @given(st.integers(0, 2**32 - 1), st.floats(0, 1))
    def test_unnormalised_form_differs_by_n_to_gamma(self, seed, gamma):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 50))
        s = rng.uniform(0.01, 1, n)
        ex = rng.exponential(size=n)
        unnormalised = np.sum(s * ex) * np.sum(s) ** (gamma - 1)
        assert unnormalised == pytest.approx(soft_objective(s, ex, gamma) * n ** gamma, rel=1e-10)

    def test_all_zero_memberships(self):
        with pytest.raises(ValueError, match="degenerate"):
            soft_objective(np.zeros(4), np.ones(4), 0.1)

    def test_no_predecessors_equals_soft_objective(self, rng):
        s, ex = rng.random(30), rng.exponential(size=30)
        assert full_objective(s, ex, [], 0.3) == soft_objective(s, ex, 0.3)

    def test_regulariser_exponent(self):
        s = np.r_[np.ones(25), np.zeros(75)]
        value = full_objective(s, np.zeros(100), [np.zeros(100), np.ones(100)], gamma=0.1)
        assert value == pytest.approx(0.25 ** 0.05, rel=1e-6)

    def test_coincident_predecessor_contributes_nothing(self, rng):
        n, m = 60, 15
        grid = np.arange(1.0, m + 1)
        members = np.arange(n) < 20
        inside = np.linspace(1, 0.2, m)
        rows = np.where(members[:, None], inside, np.sort(rng.random((n, m)), axis=1)[:, ::-1])
        M = SurvivalMatrix(rows, grid)
        X = np.where(members, 0.25, 0.75)[:, None]
        ds = SurvivalDataset(X, rng.exponential(size=n), np.ones(n))
        pred = SoftRuleParams([0.0], [0.5], [1.0], 1e-3)
        ex_g = predecessor_exceptionality(ds, M, population_curve(M), pred)
        s = members.astype(float)
        term = full_objective(s, np.zeros(n), [ex_g], gamma=0.1)
        assert term < 1e-8


class TestGradient:
    @given(st.integers(0, 2**32 - 1))
    def test_matches_central_differences(self, seed):
        theta, X, tau, terms = gradient_point(seed)
        _, grads, _ = loss_and_grad(theta, X, tau, terms)
        assert max_relative_error(grads, finite_difference(theta, X, tau, terms)) < 1e-4

    def test_inactive_features_get_no_weight_gradient(self, rng):
        theta, X, tau, terms = gradient_point(1)
        active = np.array([True, False, True, True, False])
        _, grads, _ = loss_and_grad(theta, X, tau, terms, active)
        assert np.all(grads["weights"][~active] == 0)

    def test_descent_at_tiny_learning_rate(self):
        theta, X, tau, terms = gradient_point(5)
        initial = loss_and_grad(theta, X, tau, terms)[0]
        opt = Adam(lr=1e-6)
        for _ in range(50):
            _, grads, _ = loss_and_grad(theta, X, tau, terms)
            opt.step(theta, grads)
        assert loss_and_grad(theta, X, tau, terms)[0] <= initial + 1e-9


class TestLearnSubgroup:
    def test_flat_objective_keeps_everyone(self, planted_small):
        ds, _ = planted_small
        grid = np.arange(1.0, 6.0)
        M = SurvivalMatrix(np.tile(np.linspace(0.9, 0.1, 5), (ds.n, 1)), grid)
        params = learn_subgroup(ds, M, config=LearnerConfig(epochs=50))
        assert membership(harden(params, ds), ds.features).all()

    def test_temperature_quartered(self, planted_small, small_forest):
        ds, _ = planted_small
        M = model_matrix(ds, small_forest)
        params = learn_subgroup(ds, M, config=LearnerConfig(epochs=10, initial_temperature=0.3))
        assert params.temperature * 4 == 0.3

    def test_constant_features_warn(self, rng):
        ds = SurvivalDataset(np.ones((50, 2)), rng.exponential(size=50), np.ones(50))
        M = SurvivalMatrix(np.ones((50, 3)), np.arange(1.0, 4.0))
        with pytest.warns(RuntimeWarning, match="constant"):
            params = learn_subgroup(ds, M, config=LearnerConfig(epochs=10))
        assert np.all(soft_rule(ds.features, params) == 1)

    def test_matrix_size_checked(self, planted_small):
        ds, _ = planted_small
        with pytest.raises(ShapeError):
            learn_subgroup(ds, SurvivalMatrix(np.ones((3, 2)), np.array([1.0, 2.0])))

    def test_larger_gamma_gives_larger_group(self, planted_small, small_forest):
        ds, _ = planted_small
        M = model_matrix(ds, small_forest)
        sizes = [soft_rule(ds.features, learn_subgroup(ds, M, config=LearnerConfig(gamma=g, epochs=300))).mean()
                 for g in (0.0, 1.0)]
        assert sizes[1] > sizes[0]

    def test_callback_sees_every_epoch(self, planted_small, small_forest):
        ds, _ = planted_small
        seen = []
        learn_subgroup(ds, model_matrix(ds, small_forest), config=LearnerConfig(epochs=12),
                       callback=lambda e, loss, size: seen.append(e))
        assert seen == list(range(1, 13))


class TestDiscover:
    def test_single_subgroup_equals_learn_and_harden(self, planted_small, small_forest):
        ds, _ = planted_small
        config = LearnerConfig(epochs=100)
        [result] = discover(ds, config, small_forest)
        params = learn_subgroup(ds, model_matrix(ds, small_forest), config=config)
        np.testing.assert_array_equal(result.mask, membership(harden(params, ds), ds.features))

    def test_deterministic(self, planted_small, small_forest):
        ds, _ = planted_small
        config = LearnerConfig(epochs=100, n_subgroups=2)
        a = discover(ds, config, small_forest)
        b = discover(ds, config, small_forest)
        for x, y in zip(a, b):
            assert x.rule == y.rule
            assert x.exceptionality == y.exceptionality
            np.testing.assert_array_equal(x.soft_params.alpha, y.soft_params.alpha)

    def test_two_opposite_subgroups_are_separated(self):
        rng = np.random.default_rng(8)
        n = 2000
        X = rng.random((n, 3))
        fast = X[:, 0] < 0.2
        slow = X[:, 1] > 0.8
        scale = np.where(fast, 0.5, np.where(slow, 20.0, 4.0))
        times = scale * rng.weibull(1.5, n)
        ds = SurvivalDataset(X, times, np.ones(n))
        results = discover(ds, LearnerConfig(n_subgroups=2, gamma=0.2, epochs=600),
                           ForestConfig(n_trees=30, seed=1))
        assert jaccard(results[0].mask, results[1].mask) < 0.5
