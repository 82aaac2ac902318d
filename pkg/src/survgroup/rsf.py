"""Random survival forest used as the population model.

Trees are grown on bootstrap samples with logrank splitting over all features;
each leaf stores the Kaplan-Meier curve of its in-bag subjects, kept as sparse
jumps on the global grid of unique event times. Averaging the leaf curves a
subject falls into gives its row of the survival matrix.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .dataset import SurvivalDataset, unique_event_times
from .errors import ConfigError, ShapeError
from .survival import StepCurve, product_limit

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: Optional[int] = None  # None means twice the number of features
    max_subjects_per_tree: int = 2000
    min_split: int = 40
    min_leaf: int = 20
    seed: int = 0
    bootstrap: bool = True
    max_thresholds: int = 64
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if self.min_leaf < 1:
            raise ConfigError("min_leaf must be >= 1")
        if self.min_split < 2 * self.min_leaf:
            raise ConfigError("min_split must be >= 2 * min_leaf")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")
        if self.max_subjects_per_tree < 1:
            raise ConfigError("max_subjects_per_tree must be >= 1")
        if self.max_thresholds < 2:
            raise ConfigError("max_thresholds must be >= 2")

    def depth_for(self, p: int) -> int:
        return self.max_depth if self.max_depth is not None else 2 * p

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("n_jobs")  # scheduling never changes results
        return d


@dataclass
class Tree:
    """Flat binary tree. ``feature[k] == -1`` marks node ``k`` as a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_index: np.ndarray
    jump_ptr: np.ndarray  # CSR offsets into jump_col/jump_val per leaf
    jump_col: np.ndarray
    jump_val: np.ndarray

    @property
    def n_leaves(self) -> int:
        return self.jump_ptr.size - 1

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf number (0-based over leaves) reached by each row of ``X``."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            inner = self.feature[node] >= 0
            if not inner.any():
                break
            r, nd = rows[inner], node[inner]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])
        return self.leaf_index[node]

    def leaf_curve(self, leaf: int, m: int) -> np.ndarray:
        """Dense leaf survival curve on the m-point grid."""
        jumps = np.zeros(m)
        sl = slice(self.jump_ptr[leaf], self.jump_ptr[leaf + 1])
        jumps[self.jump_col[sl]] = self.jump_val[sl]
        return 1.0 + np.cumsum(jumps)


@dataclass
class Forest:
    trees: list
    grid: np.ndarray
    n_features: int
    config: ForestConfig


@dataclass
class SurvivalMatrix:
    """Per-subject survival probabilities; ``values[i, u]`` is S(grid[u] | x_i)."""

    values: np.ndarray
    grid: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.size:
            raise ShapeError("matrix columns must match the grid")

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _leaf_jumps(times, events, grid):
    et, surv, _ = product_limit(times, events)
    if et.size == 0:
        return np.empty(0, dtype=np.int64), np.empty(0)
    cols = np.searchsorted(grid, et)
    vals = np.diff(np.concatenate([[1.0], surv]))
    return cols.astype(np.int64), vals


def _grow_tree(X, times, events, grid, config, rng, depth_limit):
    n = X.shape[0]
    size = min(n, config.max_subjects_per_tree)
    if config.bootstrap:
        idx = rng.integers(0, n, size=size)
    elif size < n:
        idx = rng.choice(n, size=size, replace=False)
    else:
        idx = np.arange(n)
    idx = idx[np.argsort(times[idx], kind="stable")]

    feature, threshold, left, right = [], [], [], []
    leaves = []  # (node id, subject indices)
    stack = [(0, idx, 0)]
    feature.append(-1), threshold.append(0.0), left.append(-1), right.append(-1)
    while stack:
        node, sub, depth = stack.pop()
        f = -1
        if depth < depth_limit and sub.size >= config.min_split:
            ev = events[sub].astype(np.int64)
            if ev.sum() >= 2:
                Xt = np.ascontiguousarray(X[sub].T)
                f, thr, _ = _kernels.best_logrank_split(
                    Xt, times[sub], ev, config.min_leaf, config.max_thresholds
                )
        if f < 0:
            leaves.append((node, sub))
            continue
        go_left = X[sub, f] <= thr
        ids = []
        for _ in range(2):
            ids.append(len(feature))
            feature.append(-1), threshold.append(0.0), left.append(-1), right.append(-1)
        feature[node], threshold[node], left[node], right[node] = f, thr, ids[0], ids[1]
        # right pushed first so the left subtree is numbered first
        stack.append((ids[1], sub[~go_left], depth + 1))
        stack.append((ids[0], sub[go_left], depth + 1))

    leaves.sort(key=lambda item: item[0])
    leaf_index = np.full(len(feature), -1, dtype=np.int64)
    ptr, cols, vals = [0], [], []
    for k, (node, sub) in enumerate(leaves):
        leaf_index[node] = k
        c, v = _leaf_jumps(times[sub], events[sub], grid)
        cols.append(c)
        vals.append(v)
        ptr.append(ptr[-1] + c.size)
    return Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        leaf_index=leaf_index,
        jump_ptr=np.asarray(ptr, dtype=np.int64),
        jump_col=np.concatenate(cols) if cols else np.empty(0, dtype=np.int64),
        jump_val=np.concatenate(vals) if vals else np.empty(0),
    )


def fit_forest(dataset: SurvivalDataset, config: ForestConfig = ForestConfig()) -> Forest:
    """Grow ``config.n_trees`` logrank trees; deterministic given ``config.seed``."""
    if dataset.n < config.min_leaf:
        raise ConfigError(f"n={dataset.n} is smaller than min_leaf={config.min_leaf}")
    X = dataset.features
    times = dataset.times
    events = dataset.events
    grid = unique_event_times(dataset)
    depth = config.depth_for(dataset.p)
    streams = np.random.SeedSequence(config.seed).spawn(config.n_trees)

    def grow(ss):
        return _grow_tree(X, times, events, grid, config, np.random.default_rng(ss), depth)

    if config.n_jobs > 1:
        with ThreadPoolExecutor(config.n_jobs) as pool:
            trees = list(pool.map(grow, streams))
    else:
        trees = [grow(ss) for ss in streams]
    log.debug("fitted %d trees, %.1f leaves on average", len(trees),
              np.mean([t.n_leaves for t in trees]))
    return Forest(trees, grid, dataset.p, config)


def predict_matrix(forest: Forest, dataset: SurvivalDataset) -> SurvivalMatrix:
    """Average leaf curves over trees for every subject of ``dataset``."""
    X = dataset.features
    if X.shape[1] != forest.n_features:
        raise ShapeError(f"forest was fitted on {forest.n_features} features, got {X.shape[1]}")
    m = forest.grid.size
    acc = np.zeros((X.shape[0], m))
    for tree in forest.trees:
        _kernels.scatter_leaf_jumps(acc, tree.apply(X), tree.jump_ptr, tree.jump_col, tree.jump_val)
    np.cumsum(acc, axis=1, out=acc)
    acc /= len(forest.trees)
    acc += 1.0
    np.clip(acc, 0.0, 1.0, out=acc)
    return SurvivalMatrix(acc, forest.grid.copy())


def population_curve(matrix: SurvivalMatrix, weights=None) -> StepCurve:
    """Column means of the matrix, optionally weighted per subject."""
    if matrix.n == 0:
        raise ShapeError("empty survival matrix")
    if weights is None:
        values = matrix.values.mean(axis=0)
    else:
        w = np.asarray(weights, dtype=float)
        values = (w @ matrix.values) / w.sum()
    # column means of non-increasing rows are non-increasing; clip float dust
    values = np.minimum.accumulate(np.clip(values, 0.0, 1.0))
    return StepCurve(matrix.grid, values)
