import numpy as np
import pytest

from infsurv import (
    RandomSurvivalForest, RSFParams, SurvivalDataset, build_time_grid, fit_rsf,
    log_rank_statistic, nelson_aalen, oob_concordance, rsf_predict_chf,
)
from infsurv.errors import DatasetTooSmall, DimensionMismatch, NoEvents


def synthetic(n=80, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 3))
    t = rng.exponential(np.exp(-x[:, 0]))
    return SurvivalDataset(x, t, rng.random(n) < 0.8)


def test_log_rank_identical_groups():
    d = synthetic(30)
    assert log_rank_statistic(d, d) == pytest.approx(0.0, abs=1e-12)


def test_log_rank_two_singletons():
    a = SurvivalDataset([[0.0]], [1.0], [1])
    b = SurvivalDataset([[0.0]], [10.0], [1])
    assert log_rank_statistic(a, b) == pytest.approx(1.0)


def test_separable_root_split():
    # inside a cluster x runs against time, so no within-cluster cut can
    # outscore the gap on a bootstrap sample
    x = np.r_[np.linspace(1, 0, 20), np.linspace(6, 5, 20)]
    t = np.r_[np.linspace(1, 2, 20), np.linspace(10, 11, 20)]
    d = SurvivalDataset(x[:, None], t, np.ones(40))
    trees = [t for s in range(5) for t in fit_rsf(d, RSFParams(n_trees=10, min_leaf_size=3), s).trees]
    for tree in trees:
        assert tree.feature[0] == 0 and 1 < tree.threshold[0] < 5


def test_root_leaf_is_nelson_aalen():
    d = synthetic()
    forest = fit_rsf(d, RSFParams(n_trees=1, bootstrap=False, max_depth=0), seed=0)
    expected = nelson_aalen(d, build_time_grid(d)).values
    np.testing.assert_allclose(forest.predict_chf(d.features[:5]), np.tile(expected, (5, 1)))
    np.testing.assert_allclose(rsf_predict_chf(forest, d.features[0]).values, expected)


def test_same_seed_same_forest():
    d = synthetic()
    p = RSFParams(n_trees=5)
    a, b = fit_rsf(d, p, seed=3), fit_rsf(d, p, seed=3)
    assert [t.split_records() for t in a.trees] == [t.split_records() for t in b.trees]
    assert a.to_dict() == b.to_dict()


def test_round_trip_and_predictions_are_chfs():
    d = synthetic()
    forest = fit_rsf(d, RSFParams(n_trees=8), seed=2)
    again = RandomSurvivalForest.from_dict(forest.to_dict())
    H = forest.predict_chf(d.features)
    np.testing.assert_array_equal(H, again.predict_chf(d.features))
    assert np.all(H >= 0) and np.all(np.diff(H, axis=1) >= 0)


def test_leaf_sizes_and_oob():
    d = synthetic(120)
    forest = fit_rsf(d, RSFParams(n_trees=20, min_leaf_size=6), seed=4)
    for tree in forest.trees:
        leaves = tree.feature == -1
        assert np.all(tree.node_size[leaves] >= 6)
    assert 0.5 < oob_concordance(forest, d) <= 1.0


def test_errors():
    with pytest.raises(NoEvents):
        fit_rsf(SurvivalDataset(np.ones((10, 1)), np.arange(10), np.zeros(10)))
    with pytest.raises(DatasetTooSmall):
        fit_rsf(SurvivalDataset(np.ones((2, 1)), [1, 2], [1, 1]), RSFParams(min_leaf_size=5))
    forest = fit_rsf(synthetic(), RSFParams(n_trees=2))
    with pytest.raises(DimensionMismatch):
        forest.predict_chf(np.ones((1, 2)))
