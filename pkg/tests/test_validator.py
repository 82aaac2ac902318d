import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from survgroup import (ForestConfig, LearnerConfig, NullModel, SurvivalDataset, bonferroni,
                       build_dfd, discover, p_value)
from survgroup.validator import empirical_p_value

TOY_FOREST = ForestConfig(n_trees=10, min_leaf=10, min_split=20)
TOY_LEARNER = LearnerConfig(epochs=60)


@pytest.fixture(scope="module")
def noise_data():
    rng = np.random.default_rng(3)
    n = 200
    return SurvivalDataset(rng.random((n, 3)), rng.exponential(size=n), (rng.random(n) < 0.8).astype(int))


class TestBuildDfd:
    def test_single_run(self, noise_data):
        null = build_dfd(noise_data, TOY_FOREST, TOY_LEARNER, runs=1, seed=1)
        assert null.eta == 0.0
        assert null.mu == null.scores[0]

    def test_constant_outcomes_give_zero_null(self):
        rng = np.random.default_rng(0)
        ds = SurvivalDataset(rng.random((60, 2)), np.full(60, 3.0), np.ones(60))
        null = build_dfd(ds, TOY_FOREST, TOY_LEARNER, runs=3)
        assert null.mu == 0.0 and null.eta == 0.0

    def test_independent_of_worker_count(self, noise_data):
        a = build_dfd(noise_data, TOY_FOREST, TOY_LEARNER, runs=4, seed=2, n_jobs=1)
        b = build_dfd(noise_data, TOY_FOREST, TOY_LEARNER, runs=4, seed=2, n_jobs=2)
        np.testing.assert_array_equal(a.scores, b.scores)

    def test_seeds_agree_within_sampling_noise(self, noise_data):
        a = build_dfd(noise_data, TOY_FOREST, TOY_LEARNER, runs=50, seed=10)
        b = build_dfd(noise_data, TOY_FOREST, TOY_LEARNER, runs=50, seed=11)
        assert not np.array_equal(a.scores, b.scores)
        eta = max(a.eta, b.eta)
        assert abs(a.mu - b.mu) < 3 * (eta / np.sqrt(50)) * 2

    def test_noise_discoveries_below_null_quantile(self, noise_data):
        null = build_dfd(noise_data, TOY_FOREST, TOY_LEARNER, runs=60, seed=20)
        q95 = np.quantile(null.scores, 0.95)
        rng = np.random.default_rng(21)
        below = 0
        for r in range(20):
            perm = rng.permutation(noise_data.n)
            shuffled = noise_data.with_outcomes(noise_data.times[perm], noise_data.events[perm])
            [res] = discover(shuffled, LearnerConfig(epochs=60, seed=r), TOY_FOREST.__class__(
                n_trees=10, min_leaf=10, min_split=20, seed=100 + r))
            below += res.exceptionality < q95
        assert below >= 18

    def test_invalid_arguments(self, noise_data):
        with pytest.raises(ValueError):
            build_dfd(noise_data, runs=0)

    def test_null_model_roundtrip(self):
        null = NullModel(0.5, 0.1, 3, np.array([0.4, 0.5, 0.6]))
        back = NullModel.from_dict(null.to_dict())
        assert (back.mu, back.eta, back.runs) == (0.5, 0.1, 3)
        np.testing.assert_array_equal(back.scores, null.scores)


class TestPValue:
    def test_at_mean(self):
        assert p_value(2.0, NullModel(2.0, 0.3, 10)) == pytest.approx(0.5)

    def test_upper_five_percent_quantile(self):
        # 1.6449 is the 0.95 quantile of the standard normal to four decimals
        assert p_value(1.6449, NullModel(0.0, 1.0, 10)) == pytest.approx(0.05, abs=1e-5)
        assert p_value(stats.norm.isf(0.05), NullModel(0.0, 1.0, 10)) == pytest.approx(0.05, rel=1e-12)

    def test_deep_lower_tail(self):
        assert p_value(-10.0, NullModel(0.0, 1.0, 10)) == pytest.approx(1.0)

    def test_degenerate_null(self):
        null = NullModel(1.0, 0.0, 5)
        with pytest.warns(RuntimeWarning, match="degenerate"):
            assert p_value(1.5, null) == 0.0
        with pytest.warns(RuntimeWarning):
            assert p_value(0.5, null) == 1.0

    def test_non_finite_score(self):
        with pytest.raises(ValueError):
            p_value(float("nan"), NullModel(0.0, 1.0, 10))

    @given(st.floats(-5, 5), st.floats(0.01, 3))
    def test_strictly_decreasing(self, score, delta):
        null = NullModel(0.3, 0.7, 10)
        assert p_value(score + delta, null) < p_value(score, null)

    def test_empirical(self):
        null = NullModel(0.0, 1.0, 4, np.array([0.1, 0.2, 0.3, 0.4]))
        assert empirical_p_value(0.25, null) == pytest.approx(3 / 5)


class TestBonferroni:
    def test_single(self):
        assert bonferroni([0.03]) == [(0.03, True)]

    def test_two(self):
        result = bonferroni([0.01, 0.04], 0.05)
        assert [a for a, _ in result] == pytest.approx([0.02, 0.08])
        assert [f for _, f in result] == [True, False]

    def test_capped(self):
        assert [a for a, _ in bonferroni([0.9, 0.9, 0.9])] == [1.0, 1.0, 1.0]

    @pytest.mark.parametrize("bad", [-0.1, 1.5, float("nan")])
    def test_out_of_range(self, bad):
        with pytest.raises(ValueError):
            bonferroni([0.1, bad])
