import numpy as np
import pytest
from hypothesis import given, strategies as st

from survgroup import PruneConfig, ShapeError, SoftRuleParams, SurvivalDataset, harden, jaccard, membership, prune_rule
from survgroup.errors import ConfigError
from survgroup.pruner import active_conditions


def _dataset(X):
    n = X.shape[0]
    return SurvivalDataset(X, np.arange(1.0, n + 1), np.ones(n))


def _mask(ds, params):
    return membership(harden(params, ds), ds.features)


class TestJaccard:
    def test_identical(self):
        assert jaccard([1, 0, 1], [1, 0, 1]) == 1.0

    def test_disjoint(self):
        assert jaccard([1, 0, 0], [0, 1, 1]) == 0.0

    def test_one_third(self):
        assert jaccard([1, 1, 0], [1, 0, 1]) == pytest.approx(1 / 3)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            jaccard([1, 0], [1, 0, 1])


class TestPruneRule:
    def test_duplicated_feature_loses_one_condition(self, rng):
        x = rng.random(200)
        ds = _dataset(np.column_stack([x, x, rng.random(200)]))
        params = SoftRuleParams([0.3, 0.3, 0.0], [0.7, 0.7, 1.0], [1.0, 1.0, 0.0], 0.01)
        pruned = prune_rule(ds, params, PruneConfig(0.95))
        assert active_conditions(pruned).tolist() == [1]
        assert jaccard(_mask(ds, params), _mask(ds, pruned)) == 1.0

    def test_single_condition_unchanged(self, rng):
        ds = _dataset(rng.random((100, 2)))
        params = SoftRuleParams([0.2, 0.0], [0.6, 1.0], [1.0, 0.0], 0.01)
        np.testing.assert_array_equal(prune_rule(ds, params).weights, params.weights)

    def test_threshold_one_keeps_binding_conditions(self):
        # each condition excludes a subject the other one keeps
        X = np.array([[0.1, 0.5], [0.5, 0.1], [0.5, 0.5], [0.9, 0.9], [0.5, 0.6]])
        ds = _dataset(X)
        params = SoftRuleParams([0.3, 0.3], [0.7, 0.7], [1.0, 1.0], 0.01)
        for j in range(2):
            w = params.weights.copy()
            w[j] = 0
            assert jaccard(_mask(ds, params), _mask(ds, params.replace(weights=w))) < 1
        np.testing.assert_array_equal(prune_rule(ds, params, PruneConfig(1.0)).weights, params.weights)

    def test_invalid_threshold(self):
        with pytest.raises(ConfigError):
            PruneConfig(0.0)

    @staticmethod
    def _random_case(seed):
        rng = np.random.default_rng(seed)
        p = 4
        base = rng.random((60, 2))
        X = np.column_stack([base, base[:, 0] + rng.normal(0, 0.05, 60), rng.random(60)])
        lo = rng.uniform(-0.1, 0.4, p)
        params = SoftRuleParams(lo, lo + rng.uniform(0.3, 1.0, p), rng.uniform(-0.2, 1.0, p), 0.01)
        return _dataset(X), params

    @given(st.integers(0, 2**32 - 1), st.floats(0.5, 1.0))
    def test_subset_and_jaccard_bound(self, seed, threshold):
        ds, params = self._random_case(seed)
        pruned = prune_rule(ds, params, PruneConfig(threshold))
        assert set(active_conditions(pruned)) <= set(active_conditions(params))
        assert jaccard(_mask(ds, params), _mask(ds, pruned)) >= threshold

    @given(st.integers(0, 2**32 - 1))
    def test_idempotent_at_threshold_one(self, seed):
        ds, params = self._random_case(seed)
        config = PruneConfig(1.0)
        once = prune_rule(ds, params, config)
        np.testing.assert_array_equal(prune_rule(ds, once, config).weights, once.weights)

    def test_second_pass_measures_against_its_own_input(self):
        # each condition excludes two subjects: dropping one keeps J = 96/98, both J = 96/100
        X = np.full((100, 2), 0.5)
        X[:2, 0] = 0.0
        X[2:4, 1] = 0.0
        X[4, :] = 1.0
        ds = _dataset(X)
        params = SoftRuleParams([0.25, 0.25], [2.0, 2.0], [1.0, 1.0], 0.01)
        config = PruneConfig(0.97)
        once = prune_rule(ds, params, config)
        assert len(active_conditions(once)) == 1
        twice = prune_rule(ds, once, config)
        # 98/100 against the once-pruned rule clears 0.97, so the bound to the original
        # (0.96) and idempotence cannot both hold here
        assert len(active_conditions(twice)) == 0
